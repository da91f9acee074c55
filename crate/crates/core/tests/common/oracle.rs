#![allow(dead_code)]
//! Independent reference computations for the TCS solver and the warp.

use delta_mri::baselines::{soft_threshold, TcsProblem, TcsSolution};
use delta_mri::kspace::{make_gaussian_mask, simulate_measurement, MaskParams};
use delta_mri::volume::{ComplexVolume, GridShape, ScalarVolume, VectorField, VolumeKind};
use delta_mri::warp::{warp_adjoint, warp_apply, RigidParams};
use delta_mri::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest entry of `|A - B^T|`, where the columns of `A` are warps of unit
/// images and the columns of `B` are adjoint warps of unit images.
pub fn dense_warp_mismatch(s: &GridShape, p: &RigidParams, v: &VectorField) -> f64 {
    let n = s.len();
    let unit = |j: usize| {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        ScalarVolume::new(s.clone(), e, VolumeKind::Generic).unwrap()
    };
    let a: Vec<Vec<f64>> = (0..n).map(|j| warp_apply(&unit(j), p, v).unwrap().into_data()).collect();
    let b: Vec<Vec<f64>> = (0..n).map(|j| warp_adjoint(&unit(j), p, v).unwrap().into_data()).collect();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            // A[i][j] = a[j][i]; B^T[i][j] = B[j][i] = b[i][j].
            worst = worst.max((a[j][i] - b[i][j]).abs());
        }
    }
    worst
}

/// 16x16 TCS test problem with active priors.
pub fn small_tcs_problem() -> TcsProblem {
    let s = GridShape::new(&[16, 16]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let x2: Vec<Complex64> = (0..s.len())
        .map(|i| {
            let (a, b) = ((i / 16) as f64 - 7.5, (i % 16) as f64 - 7.5);
            let m = (-(a * a + b * b) / 30.0).exp() + if (a - 3.0).abs() < 2.0 && b.abs() < 2.0 { 0.4 } else { 0.0 };
            Complex64::from_polar(m, 0.05 * a - 0.03 * b)
        })
        .collect();
    let x2 = ComplexVolume::new(s.clone(), x2).unwrap();
    // Reference: same image without the block feature, plus noise.
    let x1: Vec<Complex64> = x2
        .data()
        .iter()
        .enumerate()
        .map(|(i, &z)| {
            let (a, b) = ((i / 16) as f64 - 7.5, (i % 16) as f64 - 7.5);
            let base = if (a - 3.0).abs() < 2.0 && b.abs() < 2.0 { z * (z.norm() - 0.4) / z.norm() } else { z };
            base + Complex64::new(rng.random_range(-0.02..0.02), rng.random_range(-0.02..0.02))
        })
        .collect();
    let x1 = ComplexVolume::new(s.clone(), x1).unwrap();
    let mask = make_gaussian_mask(&s, 35.0, &MaskParams::default(), 5).unwrap();
    let m = simulate_measurement(&x2, &mask, 0.0, 0).unwrap();
    let w: Vec<f64> = (0..s.len())
        .map(|i| {
            let (a, b) = ((i / 16) as f64 - 7.5, (i % 16) as f64 - 7.5);
            if (a - 3.0).abs() < 3.0 && b.abs() < 3.0 { 0.0 } else { 1.0 }
        })
        .collect();
    let w = ScalarVolume::new(s, w, VolumeKind::Generic).unwrap();
    TcsProblem::new(x1, m, w, 0.05, 0.02, 2).unwrap()
}

/// Condat-Vu primal-dual iteration for `f(x) + g1(x) + g2(Psi x)` with
/// `grad f` 2-Lipschitz and `||Psi|| = 1`.
pub fn condat_vu(problem: &TcsProblem, iters: usize) -> ComplexVolume {
    let (l1, l2) = problem.lambdas();
    let x1 = problem.x1_hat().data().to_vec();
    let w = problem.weights().data().to_vec();
    let s = problem.x1_hat().shape().clone();
    let (tau, sigma) = (0.5, 0.9);
    let mut x = ComplexVolume::zeros(s.clone());
    let mut y = ComplexVolume::zeros(s.clone());
    for _ in 0..iters {
        let g = problem.data_gradient(&x).unwrap();
        let pty = problem.synthesis(&y).unwrap();
        let xt: Vec<Complex64> = (0..s.len())
            .map(|i| {
                let z = x.data()[i] - (g.data()[i] + pty.data()[i]) * tau;
                x1[i] + soft_threshold(z - x1[i], tau * l1 * w[i])
            })
            .collect();
        let xt = ComplexVolume::new(s.clone(), xt).unwrap();
        let extrap: Vec<Complex64> = (0..s.len()).map(|i| xt.data()[i] * 2.0 - x.data()[i]).collect();
        let pe = problem.analysis(&ComplexVolume::new(s.clone(), extrap).unwrap()).unwrap();
        let yn: Vec<Complex64> = (0..s.len())
            .map(|i| {
                let z = y.data()[i] + pe.data()[i] * sigma;
                let m = z.norm();
                if m > l2 { z * (l2 / m) } else { z }
            })
            .collect();
        y = ComplexVolume::new(s.clone(), yn).unwrap();
        x = xt;
    }
    x
}

/// Worst violation of the first-order conditions at an ADMM solution,
/// relative to the scale of the data gradient and the weights:
/// stationarity `grad f + y1 + Psi^T y2 = 0` and `y_k` in the subdifferentials.
pub fn tcs_optimality_violation(problem: &TcsProblem, sol: &TcsSolution) -> f64 {
    let (l1, l2) = problem.lambdas();
    let x = &sol.x2_hat;
    let g = problem.data_gradient(x).unwrap();
    let y1 = sol.dual_identity.data();
    let pty2 = problem.synthesis(&sol.dual_wavelet).unwrap();
    let stat: f64 = (0..x.data().len())
        .map(|i| (g.data()[i] + y1[i] + pty2.data()[i]).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let scale = g.norm().max(l1).max(l2);
    let mut worst = stat / scale;

    let x1 = problem.x1_hat().data();
    let w = problem.weights().data();
    for i in 0..x.data().len() {
        let d = x.data()[i] - x1[i];
        let bound = l1 * w[i];
        worst = worst.max((y1[i].norm() - bound).max(0.0) / l1);
        if d.norm() > 1e-3 && bound > 0.0 {
            worst = worst.max((y1[i] - d / d.norm() * bound).norm() / l1);
        }
    }
    let c = problem.analysis(x).unwrap();
    let y2 = sol.dual_wavelet.data();
    for i in 0..c.data().len() {
        worst = worst.max((y2[i].norm() - l2).max(0.0) / l2);
        let z = c.data()[i];
        if z.norm() > 1e-3 {
            worst = worst.max((y2[i] - z / z.norm() * l2).norm() / l2);
        }
    }
    worst
}

pub fn rel_diff(a: &ComplexVolume, b: &ComplexVolume) -> f64 {
    let e: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    e / b.norm()
}
