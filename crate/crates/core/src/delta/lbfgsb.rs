//! Box-constrained limited-memory BFGS for small parameter vectors.
//!
//! Each iteration follows the L-BFGS-B scheme: the generalized Cauchy point
//! along the projected steepest-descent path fixes the active set, the
//! quadratic model is then minimized over the free variables (with the step
//! truncated to stay in the box), and a backtracking line search runs along
//! the resulting feasible direction. The limited-memory Hessian is formed
//! densely from the stored pairs, which is cheap for the handful of rigid
//! parameters this is used for.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LbfgsbOptions {
    /// Number of stored correction pairs.
    pub memory: usize,
    pub max_iters: usize,
    /// Converged when `max|P(x - g) - x| <= pg_tol * (1 + |f|)`.
    pub pg_tol: f64,
    /// Sufficient-decrease constant of the line search.
    pub armijo: f64,
    pub max_backtracks: usize,
    /// Stop when `(f_k - f_{k+1}) / max(|f_k|, |f_{k+1}|, 1) <= ftol`.
    pub ftol: f64,
}

impl Default for LbfgsbOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iters: 200,
            pg_tol: 1e-6,
            armijo: 1e-4,
            max_backtracks: 40,
            ftol: 1e7 * f64::EPSILON,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LbfgsbStop {
    Converged,
    MaxIterations,
    /// Relative decrease of the last step fell below `ftol`.
    FunctionTolerance,
    /// No decrease found along the search direction.
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct LbfgsbResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub projected_grad: f64,
    pub trace: Vec<(usize, f64)>,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop: LbfgsbStop,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lower[i], upper[i]);
    }
}

/// `max_i |clamp(x_i - g_i) - x_i|`.
pub fn projected_gradient_norm(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    (0..x.len())
        .map(|i| ((x[i] - g[i]).clamp(lower[i], upper[i]) - x[i]).abs())
        .fold(0.0, f64::max)
}

/// Dense limited-memory BFGS matrix: the stored updates applied to `theta I`.
fn bfgs_matrix(n: usize, pairs: &[(DVector<f64>, DVector<f64>)]) -> DMatrix<f64> {
    let theta = match pairs.last() {
        Some((s, y)) => y.dot(y) / s.dot(y),
        None => 1.0,
    };
    let mut b = DMatrix::<f64>::identity(n, n) * theta;
    for (s, y) in pairs {
        let bs = &b * s;
        let sbs = s.dot(&bs);
        let ys = y.dot(s);
        if sbs > 0.0 && ys > 0.0 {
            b -= &bs * bs.transpose() / sbs;
            b += y * y.transpose() / ys;
        }
    }
    b
}

/// Generalized Cauchy point of the quadratic model
/// `m(z) = g'(z - x) + 1/2 (z - x)' B (z - x)` along `P(x - t g)`.
fn cauchy_point(x: &[f64], g: &[f64], b: &DMatrix<f64>, lower: &[f64], upper: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut breaks: Vec<(f64, usize)> = Vec::new();
    let mut d = DVector::<f64>::zeros(n);
    for i in 0..n {
        let t = if g[i] < 0.0 {
            (x[i] - upper[i]) / g[i]
        } else if g[i] > 0.0 {
            (x[i] - lower[i]) / g[i]
        } else {
            f64::INFINITY
        };
        if t > 0.0 {
            d[i] = -g[i];
        }
        if t.is_finite() {
            breaks.push((t.max(0.0), i));
        }
    }
    breaks.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let gv = DVector::from_column_slice(g);
    let mut z = DVector::<f64>::zeros(n); // x(t) - x
    let mut t_prev = 0.0;
    let mut next = 0;
    loop {
        if d.iter().all(|&v| v == 0.0) {
            break;
        }
        let t_next = breaks.get(next).map_or(f64::INFINITY, |b| b.0);
        let bd = b * &d;
        let fp = gv.dot(&d) + z.dot(&bd);
        let fpp = d.dot(&bd);
        if fp >= 0.0 {
            break;
        }
        let dt = if fpp > 0.0 { -fp / fpp } else { f64::INFINITY };
        if dt < t_next - t_prev {
            z += &d * dt;
            break;
        }
        if !t_next.is_finite() {
            // Unbounded descent without curvature; stop at the current point.
            break;
        }
        z += &d * (t_next - t_prev);
        t_prev = t_next;
        // Fix every variable that reaches its bound at this breakpoint.
        while next < breaks.len() && breaks[next].0 <= t_next {
            let i = breaks[next].1;
            z[i] = if g[i] < 0.0 { upper[i] - x[i] } else { lower[i] - x[i] };
            d[i] = 0.0;
            next += 1;
        }
    }
    let mut xc: Vec<f64> = (0..n).map(|i| x[i] + z[i]).collect();
    project(&mut xc, lower, upper);
    xc
}

/// Minimizes the model over the variables that are free at the Cauchy point,
/// truncating the step so the result stays feasible.
fn subspace_step(
    x: &[f64],
    g: &[f64],
    b: &DMatrix<f64>,
    xc: &[f64],
    lower: &[f64],
    upper: &[f64],
) -> Vec<f64> {
    let n = x.len();
    let free: Vec<usize> = (0..n).filter(|&i| xc[i] > lower[i] && xc[i] < upper[i]).collect();
    if free.is_empty() {
        return xc.to_vec();
    }
    let zc = DVector::from_iterator(n, (0..n).map(|i| xc[i] - x[i]));
    let r = DVector::from_column_slice(g) + b * zc;
    let bff = DMatrix::from_fn(free.len(), free.len(), |i, j| b[(free[i], free[j])]);
    let rf = DVector::from_iterator(free.len(), free.iter().map(|&i| -r[i]));
    let Some(du) = bff.cholesky().map(|c| c.solve(&rf)) else {
        return xc.to_vec();
    };
    let mut alpha: f64 = 1.0;
    for (k, &i) in free.iter().enumerate() {
        if du[k] > 0.0 {
            alpha = alpha.min((upper[i] - xc[i]) / du[k]);
        } else if du[k] < 0.0 {
            alpha = alpha.min((lower[i] - xc[i]) / du[k]);
        }
    }
    let mut out = xc.to_vec();
    for (k, &i) in free.iter().enumerate() {
        out[i] += alpha.max(0.0) * du[k];
    }
    project(&mut out, lower, upper);
    out
}

/// Minimizes `f` over the box `[lower, upper]` starting from `x0` (which is
/// projected into the box first).
pub fn rigid_minimize<F>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &LbfgsbOptions,
) -> Result<LbfgsbResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x0.len();
    if lower.len() != n || upper.len() != n || (0..n).any(|i| lower[i] > upper[i]) {
        return Err(Error::InvalidArgument("inconsistent box bounds".into()));
    }
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let (mut fx, mut g) = eval(&mut f, &x)?;
    let mut evaluations = 1;
    let mut trace = vec![(0, fx)];
    let mut pairs: Vec<(DVector<f64>, DVector<f64>)> = Vec::new();
    let mut stop = LbfgsbStop::MaxIterations;
    let mut iterations = 0;

    for k in 1..=opts.max_iters {
        if projected_gradient_norm(&x, &g, lower, upper) <= opts.pg_tol * (1.0 + fx.abs()) {
            stop = LbfgsbStop::Converged;
            break;
        }
        let b = bfgs_matrix(n, &pairs);
        let xc = cauchy_point(&x, &g, &b, lower, upper);
        let xbar = subspace_step(&x, &g, &b, &xc, lower, upper);
        let mut d: Vec<f64> = (0..n).map(|i| xbar[i] - x[i]).collect();
        let mut slope: f64 = (0..n).map(|i| g[i] * d[i]).sum();
        if !(slope < 0.0) {
            // Model direction is useless; restart from projected steepest descent.
            pairs.clear();
            d = (0..n).map(|i| (x[i] - g[i]).clamp(lower[i], upper[i]) - x[i]).collect();
            slope = (0..n).map(|i| g[i] * d[i]).sum();
            if !(slope < 0.0) {
                stop = LbfgsbStop::Converged;
                break;
            }
        }
        // First iteration: the unit step along -g has no scale information.
        let dnorm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut step = if pairs.is_empty() { (1.0 / dnorm).min(1.0) } else { 1.0 };

        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let mut xt: Vec<f64> = (0..n).map(|i| x[i] + step * d[i]).collect();
            project(&mut xt, lower, upper);
            let (ft, gt) = eval(&mut f, &xt)?;
            evaluations += 1;
            if ft <= fx + opts.armijo * step * slope {
                accepted = Some((xt, ft, gt));
                break;
            }
            step *= 0.5;
        }
        let Some((xt, ft, gt)) = accepted else {
            stop = LbfgsbStop::LineSearchFailed;
            break;
        };

        let s = DVector::from_iterator(n, (0..n).map(|i| xt[i] - x[i]));
        let y = DVector::from_iterator(n, (0..n).map(|i| gt[i] - g[i]));
        if s.dot(&y) > f64::EPSILON * y.dot(&y) {
            pairs.push((s, y));
            if pairs.len() > opts.memory {
                pairs.remove(0);
            }
        }
        let decrease = (fx - ft) / fx.abs().max(ft.abs()).max(1.0);
        x = xt;
        fx = ft;
        g = gt;
        iterations = k;
        trace.push((k, fx));
        if decrease <= opts.ftol {
            stop = LbfgsbStop::FunctionTolerance;
            break;
        }
    }
    if stop != LbfgsbStop::LineSearchFailed
        && projected_gradient_norm(&x, &g, lower, upper) <= opts.pg_tol * (1.0 + fx.abs())
    {
        stop = LbfgsbStop::Converged;
    }

    Ok(LbfgsbResult {
        projected_grad: projected_gradient_norm(&x, &g, lower, upper),
        x,
        f: fx,
        trace,
        iterations,
        evaluations,
        stop,
    })
}

fn eval<F>(f: &mut F, x: &[f64]) -> Result<(f64, Vec<f64>)>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let (fx, g) = f(x)?;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("objective {fx} or its gradient at {x:?}")));
    }
    Ok((fx, g))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `f(x) = 1/2 (x - a)' H (x - a)` with a fixed SPD `H`.
    fn quadratic(a: Vec<f64>) -> impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)> {
        let h = DMatrix::from_row_slice(
            6,
            6,
            &[
                4.0, 1.0, 0.0, 0.5, 0.0, 0.0, //
                1.0, 3.0, 0.2, 0.0, 0.0, 0.0, //
                0.0, 0.2, 2.0, 0.0, 0.1, 0.0, //
                0.5, 0.0, 0.0, 1.0, 0.0, 0.3, //
                0.0, 0.0, 0.1, 0.0, 0.5, 0.0, //
                0.0, 0.0, 0.0, 0.3, 0.0, 0.8,
            ],
        );
        let a = DVector::from_vec(a);
        move |x| {
            let e = DVector::from_column_slice(x) - &a;
            let he = &h * &e;
            Ok((0.5 * e.dot(&he), he.iter().copied().collect()))
        }
    }

    fn boxes() -> (Vec<f64>, Vec<f64>) {
        (
            vec![-0.3, -0.3, -0.3, -20.0, -20.0, -20.0],
            vec![0.3, 0.3, 0.3, 20.0, 20.0, 20.0],
        )
    }

    #[test]
    fn interior_minimizer() {
        let a = vec![0.1, -0.05, 0.2, 3.0, -7.0, 12.0];
        let (lo, hi) = boxes();
        let res = rigid_minimize(quadratic(a.clone()), &[0.0; 6], &lo, &hi, &LbfgsbOptions {
            pg_tol: 1e-12,
            ftol: 0.0,
            ..Default::default()
        })
        .unwrap();
        for (x, a) in res.x.iter().zip(&a) {
            assert!((x - a).abs() < 1e-8, "{:?}", res.x);
        }
    }

    #[test]
    fn relative_decrease_stop_ends_early_near_the_minimizer() {
        let a = vec![0.1, -0.05, 0.2, 3.0, -7.0, 12.0];
        let (lo, hi) = boxes();
        let res = rigid_minimize(quadratic(a.clone()), &[0.0; 6], &lo, &hi, &LbfgsbOptions {
            pg_tol: 1e-12,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(res.stop, LbfgsbStop::FunctionTolerance);
        for (x, a) in res.x.iter().zip(&a) {
            assert!((x - a).abs() < 1e-4, "{:?}", res.x);
        }
    }

    #[test]
    fn separable_minimizer_outside_box_is_clamped() {
        let a = [0.5, -0.1, 0.0, 25.0, 1.0, -30.0];
        let (lo, hi) = boxes();
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let g: Vec<f64> = x.iter().zip(&a).map(|(x, a)| x - a).collect();
            Ok((0.5 * g.iter().map(|v| v * v).sum::<f64>(), g))
        };
        let res = rigid_minimize(f, &[0.0; 6], &lo, &hi, &LbfgsbOptions::default()).unwrap();
        let expected = [0.3, -0.1, 0.0, 20.0, 1.0, -20.0];
        for (x, e) in res.x.iter().zip(&expected) {
            assert!((x - e).abs() < 1e-8, "{:?}", res.x);
        }
        assert_eq!(res.stop, LbfgsbStop::Converged);
    }

    #[test]
    fn start_at_minimizer() {
        let a = vec![0.1, 0.0, -0.1, 1.0, 2.0, 3.0];
        let (lo, hi) = boxes();
        let res = rigid_minimize(quadratic(a.clone()), &a, &lo, &hi, &LbfgsbOptions::default()).unwrap();
        assert_eq!(res.x, a);
        assert_eq!(res.iterations, 0);
        assert_eq!(res.stop, LbfgsbStop::Converged);
    }

    #[test]
    fn coupled_quadratic_with_active_bounds() {
        // Minimizer of the coupled quadratic lies outside in two coordinates;
        // compare with a long projected-gradient run.
        let a = vec![0.6, -0.2, 0.1, 30.0, 2.0, -1.0];
        let (lo, hi) = boxes();
        let res = rigid_minimize(quadratic(a.clone()), &[0.0; 6], &lo, &hi, &LbfgsbOptions {
            pg_tol: 1e-12,
            ftol: 0.0,
            ..Default::default()
        })
        .unwrap();
        let mut f = quadratic(a);
        let mut x = vec![0.0; 6];
        for _ in 0..200_000 {
            let (_, g) = f(&x).unwrap();
            for i in 0..6 {
                x[i] = (x[i] - 0.2 * g[i]).clamp(lo[i], hi[i]);
            }
        }
        for (p, q) in res.x.iter().zip(&x) {
            assert!((p - q).abs() < 1e-7, "{:?} vs {:?}", res.x, x);
        }
    }
}
