use rustfft::num_complex::Complex64;

use crate::delta::regularizer::Regularizer;
use crate::error::{Error, Result};
use crate::fft::DftPlan;
use crate::kspace::KSpaceMeasurement;
use crate::par;
use crate::volume::{ScalarVolume, VectorField, VolumeKind};
use crate::warp::{warp_apply, warp_vjp, RigidParams};

/// Ratio of the DVF regularization weight to `||d2||^2`.
pub const LAMBDA_RATIO: f64 = 5e-5;

/// `5e-5 * ||d2||_2^2`, which keeps the regularization strength comparable
/// across sampling schemes.
pub fn default_lambda(m: &KSpaceMeasurement) -> f64 {
    LAMBDA_RATIO * m.norm_sqr()
}

/// Inputs of the joint rigid + DVF estimator.
#[derive(Clone, Debug)]
pub struct DeltaProblem {
    r1_hat: ScalarVolume,
    phi2_hat: ScalarVolume,
    measurement: KSpaceMeasurement,
    lambda: f64,
    regularizer: Regularizer,
    lower: Vec<f64>,
    upper: Vec<f64>,
    phase: Vec<Complex64>,
    plan: DftPlan,
}

/// Cost with its gradients; either gradient may be skipped.
#[derive(Clone, Debug)]
pub struct CostGradient {
    pub cost: f64,
    pub grad_p: Option<Vec<f64>>,
    pub grad_v: Option<VectorField>,
}

impl DeltaProblem {
    /// Builds a problem with the default rigid bounds and regularizer.
    pub fn new(
        r1_hat: ScalarVolume,
        phi2_hat: ScalarVolume,
        measurement: KSpaceMeasurement,
        lambda: f64,
    ) -> Result<Self> {
        r1_hat.shape().ensure_same(phi2_hat.shape())?;
        r1_hat.shape().ensure_same(measurement.shape())?;
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda {lambda} must be >= 0")));
        }
        let r1_hat = r1_hat.with_kind(VolumeKind::Magnitude)?;
        let id = RigidParams::identity(r1_hat.shape().rank());
        let phase = phi2_hat.data().iter().map(|&p| Complex64::from_polar(1.0, p)).collect();
        let plan = DftPlan::new(r1_hat.shape());
        Ok(Self {
            r1_hat,
            phi2_hat,
            measurement,
            lambda,
            regularizer: Regularizer::default(),
            lower: id.lower,
            upper: id.upper,
            phase,
            plan,
        })
    }

    /// Same problem with `lambda = default_lambda(measurement)`.
    pub fn with_default_lambda(
        r1_hat: ScalarVolume,
        phi2_hat: ScalarVolume,
        measurement: KSpaceMeasurement,
    ) -> Result<Self> {
        let lambda = default_lambda(&measurement);
        Self::new(r1_hat, phi2_hat, measurement, lambda)
    }

    pub fn with_regularizer(mut self, regularizer: Regularizer) -> Self {
        self.regularizer = regularizer;
        self
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = RigidParams::n_params(self.r1_hat.shape().rank());
        if lower.len() != n || upper.len() != n || lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(Error::InvalidArgument("invalid rigid bounds".into()));
        }
        self.lower = lower;
        self.upper = upper;
        Ok(self)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("lambda {lambda} must be >= 0")));
        }
        self.lambda = lambda;
        Ok(self)
    }

    pub fn r1_hat(&self) -> &ScalarVolume {
        &self.r1_hat
    }

    pub fn phi2_hat(&self) -> &ScalarVolume {
        &self.phi2_hat
    }

    pub fn measurement(&self) -> &KSpaceMeasurement {
        &self.measurement
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn regularizer(&self) -> Regularizer {
        self.regularizer
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Zero rigid parameters carrying this problem's bounds.
    pub fn initial_rigid(&self) -> RigidParams {
        let rank = self.r1_hat.shape().rank();
        let mut p = RigidParams::identity(rank);
        p.lower = self.lower.clone();
        p.upper = self.upper.clone();
        p
    }

    /// k-space residual `d2 - S F (W(r1) e^{i phi2})` on the sampled indices.
    fn residual(&self, warped: &ScalarVolume) -> Vec<Complex64> {
        let mut x: Vec<Complex64> = warped
            .data()
            .iter()
            .zip(&self.phase)
            .map(|(&m, &e)| e * m)
            .collect();
        self.plan.forward_in_place(&mut x);
        self.measurement
            .mask()
            .selected()
            .iter()
            .zip(self.measurement.values())
            .map(|(&i, &d)| d - x[i])
            .collect()
    }

    fn data_term(res: &[Complex64]) -> f64 {
        par::sum_by(res.len(), |i| res[i].norm_sqr())
    }

    /// `||d2 - S F W(r1, p, v) e^{i phi2}||^2 + lambda R(v)`.
    pub fn cost_eval(&self, p: &RigidParams, v: &VectorField) -> Result<f64> {
        let warped = warp_apply(&self.r1_hat, p, v)?;
        let data = Self::data_term(&self.residual(&warped));
        let reg = if self.lambda > 0.0 {
            self.lambda * self.regularizer.value(v)
        } else {
            0.0
        };
        Ok(data + reg)
    }

    /// Cost and the requested gradients.
    ///
    /// The residual is pulled back through zero filling, the inverse DFT and
    /// the conjugate phase; the real part is the gradient with respect to the
    /// warped magnitude, which the warp's vector-Jacobian products carry to
    /// `v` and `(theta, t)`.
    pub fn cost_grad_parts(
        &self,
        p: &RigidParams,
        v: &VectorField,
        want_p: bool,
        want_v: bool,
    ) -> Result<CostGradient> {
        let warped = warp_apply(&self.r1_hat, p, v)?;
        let res = self.residual(&warped);
        let mut cost = Self::data_term(&res);

        let mut back = vec![Complex64::new(0.0, 0.0); self.plan.shape().len()];
        for (&i, &r) in self.measurement.mask().selected().iter().zip(&res) {
            back[i] = r;
        }
        self.plan.inverse_in_place(&mut back);
        let g: Vec<f64> = back
            .iter()
            .zip(&self.phase)
            .map(|(b, e)| -2.0 * (b * e.conj()).re)
            .collect();
        let g = ScalarVolume::from_parts_unchecked(self.r1_hat.shape().clone(), g, VolumeKind::Generic);
        let grads = warp_vjp(&self.r1_hat, p, v, &g, want_v, want_p)?;

        let mut grad_v = grads.v;
        if self.lambda > 0.0 {
            match grad_v.as_mut() {
                Some(gv) => {
                    let (rv, rg) = self.regularizer.eval(v);
                    cost += self.lambda * rv;
                    let lam = self.lambda;
                    gv.data_mut()
                        .iter_mut()
                        .zip(rg.data())
                        .for_each(|(a, b)| *a += lam * b);
                }
                None => cost += self.lambda * self.regularizer.value(v),
            }
        }
        if !cost.is_finite() {
            return Err(Error::NonFinite("DELTA cost".into()));
        }
        Ok(CostGradient {
            cost,
            grad_p: grads.rigid,
            grad_v,
        })
    }

    /// Cost with both gradients.
    pub fn cost_grad(&self, p: &RigidParams, v: &VectorField) -> Result<(f64, Vec<f64>, VectorField)> {
        let cg = self.cost_grad_parts(p, v, true, true)?;
        Ok((cg.cost, cg.grad_p.unwrap(), cg.grad_v.unwrap()))
    }
}
