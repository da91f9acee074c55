//! Barzilai-Borwein gradient descent with a nonmonotone line search.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BbOptions {
    pub max_iters: usize,
    /// Length of the reference window of the nonmonotone Armijo test.
    pub window: usize,
    /// Sufficient-decrease constant.
    pub gamma: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Stop once `max|g| <= grad_tol * max(1, max|g0|)`.
    pub grad_tol: f64,
}

impl Default for BbOptions {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            window: 10,
            gamma: 1e-4,
            min_step: 1e-12,
            max_step: 1e12,
            grad_tol: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BbStop {
    GradientTolerance,
    MaxIterations,
    /// Backtracking could not satisfy the acceptance test.
    LineSearchStalled,
}

#[derive(Clone, Debug)]
pub struct BbResult {
    pub x: Vec<f64>,
    pub cost: f64,
    /// `(iteration, cost)` of the initial point and every accepted iterate.
    pub trace: Vec<(usize, f64)>,
    pub iterations: usize,
    pub evaluations: usize,
    pub stop: BbStop,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Minimizes `f` from `x0` with alternating BB1/BB2 step lengths.
///
/// A trial step is accepted when
/// `f(x - a g) <= max(last `window` costs) - gamma * a * |g|^2`;
/// otherwise the step is halved. The first step length is `1 / max|g0|`.
/// Every accepted cost is below the initial cost, so the returned (last)
/// iterate never does worse than `x0`.
pub fn bb_minimize<F>(mut f: F, x0: Vec<f64>, opts: &BbOptions) -> Result<BbResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut x = x0;
    let (mut fx, mut g) = f(&x)?;
    let mut evaluations = 1;
    check_finite(fx, &g)?;
    let mut trace = vec![(0, fx)];
    let g0 = max_abs(&g);
    let tol = opts.grad_tol * g0.max(1.0);
    if g0 <= tol {
        return Ok(BbResult {
            x,
            cost: fx,
            trace,
            iterations: 0,
            evaluations,
            stop: BbStop::GradientTolerance,
        });
    }

    let mut window: VecDeque<f64> = VecDeque::from([fx]);
    let mut alpha = (1.0 / g0).clamp(opts.min_step, opts.max_step);
    let mut x_new = vec![0.0; x.len()];
    let mut stop = BbStop::MaxIterations;
    let mut iterations = 0;

    for k in 1..=opts.max_iters {
        let f_ref = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let gg = dot(&g, &g);
        let mut step = alpha;
        let accepted = loop {
            for ((xn, xi), gi) in x_new.iter_mut().zip(&x).zip(&g) {
                *xn = xi - step * gi;
            }
            let (fn_, gn) = f(&x_new)?;
            evaluations += 1;
            if fn_.is_finite() && fn_ <= f_ref - opts.gamma * step * gg {
                check_finite(fn_, &gn)?;
                break Some((fn_, gn));
            }
            step *= 0.5;
            if step < opts.min_step {
                break None;
            }
        };
        let Some((f_next, g_next)) = accepted else {
            stop = BbStop::LineSearchStalled;
            break;
        };

        let mut sy = 0.0;
        let mut ss = 0.0;
        let mut yy = 0.0;
        for i in 0..x.len() {
            let s = x_new[i] - x[i];
            let y = g_next[i] - g[i];
            sy += s * y;
            ss += s * s;
            yy += y * y;
        }
        alpha = if sy > 0.0 {
            if k % 2 == 1 {
                ss / sy
            } else {
                sy / yy
            }
        } else {
            // Non-positive curvature along the step: be bolder.
            step * 2.0
        }
        .clamp(opts.min_step, opts.max_step);

        std::mem::swap(&mut x, &mut x_new);
        fx = f_next;
        g = g_next;
        iterations = k;
        trace.push((k, fx));
        window.push_back(fx);
        if window.len() > opts.window.max(1) {
            window.pop_front();
        }
        if max_abs(&g) <= tol {
            stop = BbStop::GradientTolerance;
            break;
        }
    }

    Ok(BbResult {
        x,
        cost: fx,
        trace,
        iterations,
        evaluations,
        stop,
    })
}

fn check_finite(f: f64, g: &[f64]) -> Result<()> {
    if !f.is_finite() {
        return Err(Error::NonFinite(format!("objective value {f}")));
    }
    if let Some(i) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("gradient component {i}")));
    }
    Ok(())
}
