mod common;

use std::sync::OnceLock;

use common::*;
use delta_mri::baselines::*;
use delta_mri::fft::dft_inverse;
use delta_mri::kspace::{zero_fill, KSpaceMeasurement, SamplingMask};
use delta_mri::sim::{make_scenario, sweep, MethodConfig, Scenario, ScenarioConfig};
use delta_mri::volume::{ScalarVolume, VectorField};
use delta_mri::warp::warp_apply_complex;
use delta_mri::Complex64;

fn desk() -> &'static Scenario {
    static S: OnceLock<Scenario> = OnceLock::new();
    S.get_or_init(|| make_scenario(&ScenarioConfig::default_for(shape(&[64, 48, 32]), 1)).unwrap())
}

/// Reference aligned with the true rigid motion.
fn aligned_reference(s: &Scenario) -> delta_mri::volume::ComplexVolume {
    warp_apply_complex(&s.x1_hat, &s.rigid_true, &VectorField::zeros(s.x1_hat.shape().clone())).unwrap()
}

#[test]
fn default_lambda_examples() {
    let s = shape(&[2, 2]);
    let mut vals = vec![Complex64::new(0.0, 0.0); 4];
    vals[3] = Complex64::new(0.0, -1.0);
    let m = KSpaceMeasurement::new(SamplingMask::full(s), vals).unwrap();
    let (l1, l2) = default_tcs_lambdas(&m);
    assert!((l1 - 5.85e-9).abs() < 1e-24 && (l2 - 3.63e-10).abs() < 1e-25);
    assert_eq!(default_tcs_lambdas(&m.scaled(0.0)), (0.0, 0.0));
    let (a, b) = default_tcs_lambdas(&m.scaled(10.0));
    assert!((a / l1 - 100.0).abs() < 1e-12 && (b / l2 - 100.0).abs() < 1e-12);
}

#[test]
fn soft_threshold_examples() {
    let z = Complex64::new(0.3, -0.4);
    assert_eq!(soft_threshold(z, 0.5), Complex64::new(0.0, 0.0));
    assert_eq!(soft_threshold(z, 0.0), z);
    let t = soft_threshold(Complex64::new(2.0, 0.0), 1.0);
    assert!((t - Complex64::new(1.0, 0.0)).norm() < 1e-15);
}

#[test]
fn dominant_similarity_term_returns_the_reference() {
    let s = desk();
    let mc = MethodConfig::default();
    let m = sweep::measure(s, 10.0, 1, &mc).unwrap();
    let x1 = aligned_reference(s);
    let (l1, l2) = default_tcs_lambdas(&m);
    let ones = ScalarVolume::generic(x1.shape().clone(), vec![1.0; x1.shape().len()]).unwrap();
    let problem = TcsProblem::new(x1.clone(), m, ones, 1e6 * l1, l2, 3).unwrap();
    let sol = tcs_solve(&problem, &mc.admm).unwrap();
    let diff: f64 = sol.x2_hat.data().iter().zip(x1.data()).map(|(a, b)| (a - b).norm_sqr()).sum();
    let rel = diff.sqrt() / x1.norm();
    assert!(rel <= 1e-3, "relative distance {rel}");
}

#[test]
fn desk_one_percent_objective_comparison() {
    let s = desk();
    let mc = MethodConfig::default();
    let m = sweep::measure(s, 1.0, 1, &mc).unwrap();
    let x1 = aligned_reference(s);
    let (l1, l2) = default_tcs_lambdas(&m);
    let w = support_weights(&s.v_true, true);
    let problem = TcsProblem::new(x1.clone(), m.clone(), w, l1, l2, 3).unwrap();
    let sol = tcs_solve(&problem, &mc.admm).unwrap();
    let f = problem.objective(&sol.x2_hat).unwrap();
    let f_zidft = problem.objective(&dft_inverse(&zero_fill(&m))).unwrap();
    let f_ref = problem.objective(&x1).unwrap();
    assert!(f <= f_zidft && f <= f_ref, "tcs {f}, zidft {f_zidft}, reference {f_ref}");
    let trace = &sol.objective_trace;
    assert!(trace.last().unwrap().1 <= trace[0].1);
}

#[test]
fn both_weightings_run_in_the_sweep_path() {
    let s = desk();
    let mut mc = MethodConfig::default();
    let m = sweep::measure(s, 5.0, 2, &mc).unwrap();
    let a = sweep::run_tcs(s, &s.rigid_true, &m, &mc).unwrap();
    mc.tcs_invert_weights = false;
    let b = sweep::run_tcs(s, &s.rigid_true, &m, &mc).unwrap();
    assert!(a.x2_hat.data().iter().all(|z| z.is_finite()));
    assert!(b.x2_hat.data().iter().all(|z| z.is_finite()));
    assert_ne!(a.x2_hat, b.x2_hat);
}
