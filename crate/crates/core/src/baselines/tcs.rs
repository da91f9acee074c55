//! Temporal compressed sensing: complex image recovery with an l1 prior on the
//! difference from a registered reference and an l1 wavelet sparsity prior.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::baselines::dwt::{check_levels, dwt_forward, dwt_inverse};
use crate::error::{Error, Result};
use crate::fft::DftPlan;
use crate::kspace::{zero_fill, KSpaceMeasurement};
use crate::par;
use crate::volume::{ComplexVolume, ScalarVolume, VectorField, VolumeKind};

/// Ratios of the two TCS weights to `||d2||^2`.
pub const TCS_LAMBDA_RATIOS: (f64, f64) = (5.85e-9, 3.63e-10);

/// `(lambda1, lambda2)` scaled by `||d2||^2`.
pub fn default_tcs_lambdas(m: &KSpaceMeasurement) -> (f64, f64) {
    let e = m.norm_sqr();
    (TCS_LAMBDA_RATIOS.0 * e, TCS_LAMBDA_RATIOS.1 * e)
}

/// Complex soft threshold: shrinks the modulus by `tau`, keeps the phase.
pub fn soft_threshold(z: Complex64, tau: f64) -> Complex64 {
    let m = z.norm();
    if m <= tau {
        Complex64::new(0.0, 0.0)
    } else {
        z * ((m - tau) / m)
    }
}

/// Displacement magnitude (voxels) above which a voxel counts as moving.
pub const SUPPORT_THRESHOLD: f64 = 1e-6;

/// Indicator of the DVF support, `|v| > 1e-6`; `invert` returns the
/// complement, i.e. weights that enforce similarity where nothing moved.
pub fn support_weights(v: &VectorField, invert: bool) -> ScalarVolume {
    let w = v
        .magnitudes()
        .into_iter()
        .map(|m| if (m > SUPPORT_THRESHOLD) != invert { 1.0 } else { 0.0 })
        .collect();
    ScalarVolume::from_parts_unchecked(v.shape().clone(), w, VolumeKind::Generic)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmmOptions {
    pub rho: f64,
    pub max_iters: usize,
    /// Relative tolerance on the primal and dual residuals.
    pub tol: f64,
}

impl Default for AdmmOptions {
    fn default() -> Self {
        Self {
            rho: 1.0,
            max_iters: 300,
            tol: 1e-5,
        }
    }
}

/// Inputs of the TCS objective
/// `||d2 - S F x||^2 + lambda1 sum w |x1 - x| + lambda2 ||Psi x||_1`.
#[derive(Clone, Debug)]
pub struct TcsProblem {
    x1_hat: ComplexVolume,
    measurement: KSpaceMeasurement,
    weights: ScalarVolume,
    lambda1: f64,
    lambda2: f64,
    levels: usize,
    plan: DftPlan,
}

impl TcsProblem {
    /// `x1_hat` must already be registered to the second frame.
    pub fn new(
        x1_hat: ComplexVolume,
        measurement: KSpaceMeasurement,
        weights: ScalarVolume,
        lambda1: f64,
        lambda2: f64,
        levels: usize,
    ) -> Result<Self> {
        x1_hat.shape().ensure_same(measurement.shape())?;
        x1_hat.shape().ensure_same(weights.shape())?;
        check_levels(x1_hat.shape(), levels)?;
        for l in [lambda1, lambda2] {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(Error::InvalidArgument(format!("TCS weight {l} must be >= 0")));
            }
        }
        if weights.data().iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidArgument("TCS weights must be >= 0".into()));
        }
        let plan = DftPlan::new(x1_hat.shape());
        Ok(Self {
            x1_hat,
            measurement,
            weights,
            lambda1,
            lambda2,
            levels,
            plan,
        })
    }

    pub fn x1_hat(&self) -> &ComplexVolume {
        &self.x1_hat
    }

    pub fn measurement(&self) -> &KSpaceMeasurement {
        &self.measurement
    }

    pub fn weights(&self) -> &ScalarVolume {
        &self.weights
    }

    pub fn lambdas(&self) -> (f64, f64) {
        (self.lambda1, self.lambda2)
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Data-fidelity term `||d2 - S F x||^2` given the full spectrum `F x`.
    fn data_term(&self, spectrum: &[Complex64]) -> f64 {
        let sel = self.measurement.mask().selected();
        let d = self.measurement.values();
        par::sum_by(sel.len(), |k| (d[k] - spectrum[sel[k]]).norm_sqr())
    }

    fn prior_terms(&self, x: &[Complex64], wx: &[Complex64]) -> f64 {
        let x1 = self.x1_hat.data();
        let w = self.weights.data();
        let t1 = par::sum_by(x.len(), |i| w[i] * (x1[i] - x[i]).norm());
        let t2 = par::sum_by(wx.len(), |i| wx[i].norm());
        self.lambda1 * t1 + self.lambda2 * t2
    }

    /// Objective value at `x`.
    pub fn objective(&self, x: &ComplexVolume) -> Result<f64> {
        self.x1_hat.shape().ensure_same(x.shape())?;
        let mut spectrum = x.data().to_vec();
        self.plan.forward_in_place(&mut spectrum);
        let wx = dwt_forward(x, self.levels)?;
        Ok(self.data_term(&spectrum) + self.prior_terms(x.data(), wx.data()))
    }

    /// Gradient of the data term, `-2 F^H S^T (d2 - S F x)`.
    pub fn data_gradient(&self, x: &ComplexVolume) -> Result<ComplexVolume> {
        self.x1_hat.shape().ensure_same(x.shape())?;
        let mut spectrum = x.data().to_vec();
        self.plan.forward_in_place(&mut spectrum);
        let mut back = vec![Complex64::new(0.0, 0.0); spectrum.len()];
        for (&i, &d) in self.measurement.mask().selected().iter().zip(self.measurement.values()) {
            back[i] = (spectrum[i] - d) * 2.0;
        }
        self.plan.inverse_in_place(&mut back);
        Ok(ComplexVolume::from_parts_unchecked(x.shape().clone(), back))
    }

    /// Wavelet analysis with this problem's level count.
    pub fn analysis(&self, x: &ComplexVolume) -> Result<ComplexVolume> {
        dwt_forward(x, self.levels)
    }

    /// Wavelet synthesis (the adjoint of [`TcsProblem::analysis`]).
    pub fn synthesis(&self, c: &ComplexVolume) -> Result<ComplexVolume> {
        dwt_inverse(c, self.levels)
    }
}

/// Output of [`tcs_solve`].
#[derive(Clone, Debug)]
pub struct TcsSolution {
    pub x2_hat: ComplexVolume,
    /// `(iteration, objective)`, starting with the initial point.
    pub objective_trace: Vec<(usize, f64)>,
    pub iterations: usize,
    pub converged: bool,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Scaled multipliers times `rho`: dual variables of `z1 = x` and `z2 = Psi x`.
    pub dual_identity: ComplexVolume,
    pub dual_wavelet: ComplexVolume,
}

fn norm_sqr(a: &[Complex64]) -> f64 {
    par::sum_by(a.len(), |i| a[i].norm_sqr())
}

/// Minimizes the TCS objective with ADMM on the splitting `z1 = x`,
/// `z2 = Psi x`, starting from the zero-filled inverse DFT.
///
/// With an orthonormal DFT and wavelet the `x` update is diagonal in
/// k-space: `(2 S^T S + 2 rho) F x = 2 S^T d2 + rho F (a + Psi^T b)`.
pub fn tcs_solve(problem: &TcsProblem, opts: &AdmmOptions) -> Result<TcsSolution> {
    if !(opts.rho > 0.0) || !opts.rho.is_finite() {
        return Err(Error::InvalidArgument(format!("rho {} must be > 0", opts.rho)));
    }
    let shape = problem.x1_hat.shape().clone();
    let n = shape.len();
    let rho = opts.rho;
    let plan = &problem.plan;
    let vol = |d: Vec<Complex64>| ComplexVolume::from_parts_unchecked(shape.clone(), d);

    let mut rhs_data = vec![Complex64::new(0.0, 0.0); n];
    let mut diag = vec![2.0 * rho; n];
    for (&i, &d) in problem.measurement.mask().selected().iter().zip(problem.measurement.values()) {
        rhs_data[i] = d * 2.0;
        diag[i] += 2.0;
    }

    let mut x = zero_fill(&problem.measurement).into_data();
    plan.inverse_in_place(&mut x);
    let mut z1 = x.clone();
    let mut z2 = problem.analysis(&vol(x.clone()))?.into_data();
    let mut u1 = vec![Complex64::new(0.0, 0.0); n];
    let mut u2 = vec![Complex64::new(0.0, 0.0); n];
    let mut trace = vec![(0, problem.objective(&vol(x.clone()))?)];

    let thr1: Vec<f64> = problem
        .weights
        .data()
        .iter()
        .map(|w| problem.lambda1 * w / rho)
        .collect();
    let thr2 = problem.lambda2 / rho;
    let x1 = problem.x1_hat.data();

    let mut converged = false;
    let mut iterations = 0;
    let (mut r_pri, mut r_dual) = (f64::INFINITY, f64::INFINITY);

    for k in 1..=opts.max_iters {
        // x update.
        let b: Vec<Complex64> = z2.iter().zip(&u2).map(|(z, u)| z - u).collect();
        let psi_t_b = problem.synthesis(&vol(b))?.into_data();
        let mut spec: Vec<Complex64> = (0..n).map(|i| z1[i] - u1[i] + psi_t_b[i]).collect();
        plan.forward_in_place(&mut spec);
        par::for_each_mut(&mut spec, |i, s| *s = (rhs_data[i] + *s * rho) / diag[i]);
        let data_term = problem.data_term(&spec);
        plan.inverse_in_place(&mut spec);
        x = spec;
        let wx = problem.analysis(&vol(x.clone()))?.into_data();

        // z updates.
        let z1_old = std::mem::take(&mut z1);
        let z2_old = std::mem::take(&mut z2);
        z1 = par::map_collect(n, |i| x1[i] + soft_threshold(x[i] + u1[i] - x1[i], thr1[i]));
        z2 = par::map_collect(n, |i| soft_threshold(wx[i] + u2[i], thr2));

        // Scaled dual updates.
        for i in 0..n {
            u1[i] += x[i] - z1[i];
            u2[i] += wx[i] - z2[i];
        }

        let pri1: Vec<Complex64> = (0..n).map(|i| x[i] - z1[i]).collect();
        let pri2: Vec<Complex64> = (0..n).map(|i| wx[i] - z2[i]).collect();
        r_pri = (norm_sqr(&pri1) + norm_sqr(&pri2)).sqrt();
        let dz2: Vec<Complex64> = (0..n).map(|i| z2[i] - z2_old[i]).collect();
        let psi_t_dz2 = problem.synthesis(&vol(dz2))?.into_data();
        let dual: Vec<Complex64> = (0..n).map(|i| z1[i] - z1_old[i] + psi_t_dz2[i]).collect();
        r_dual = rho * norm_sqr(&dual).sqrt();
        let psi_t_u2 = problem.synthesis(&vol(u2.clone()))?.into_data();
        let u_sum: Vec<Complex64> = (0..n).map(|i| u1[i] + psi_t_u2[i]).collect();

        let eps_pri = opts.tol * (2.0 * norm_sqr(&x)).sqrt().max((norm_sqr(&z1) + norm_sqr(&z2)).sqrt());
        let eps_dual = opts.tol * rho * norm_sqr(&u_sum).sqrt();

        let obj = data_term + problem.prior_terms(&x, &wx);
        if !obj.is_finite() {
            return Err(Error::NonFinite("TCS objective".into()));
        }
        trace.push((k, obj));
        iterations = k;
        if r_pri <= eps_pri && r_dual <= eps_dual {
            converged = true;
            break;
        }
    }

    let scale = |u: Vec<Complex64>| vol(u.into_iter().map(|z| z * rho).collect());
    Ok(TcsSolution {
        x2_hat: vol(x),
        objective_trace: trace,
        iterations,
        converged,
        primal_residual: r_pri,
        dual_residual: r_dual,
        dual_identity: scale(u1),
        dual_wavelet: scale(u2),
    })
}
