mod common;

use common::*;
use delta_mri::baselines::z_idft;
use delta_mri::delta::*;
use delta_mri::fft::dft_forward;
use delta_mri::kspace::{make_gaussian_mask, simulate_measurement, subsample, KSpaceMeasurement, MaskParams, SamplingMask};
use delta_mri::sim::{make_scenario, normalized_error, sweep, MethodConfig, ScenarioConfig};
use delta_mri::volume::{from_polar, ScalarVolume, VectorField};
use delta_mri::warp::{warp_apply, RigidParams};
use delta_mri::Complex64;

/// Smooth phase field in [-1, 1] rad.
fn smooth_phase(s: &delta_mri::volume::GridShape) -> ScalarVolume {
    let d = (0..s.len())
        .map(|i| {
            let x = s.unravel(i);
            let u = x[0] as f64 / s.dims()[0] as f64;
            let w = x[s.rank() - 1] as f64 / s.dims()[s.rank() - 1] as f64;
            (0.6 * u - 0.4 * w * w).clamp(-1.0, 1.0)
        })
        .collect();
    ScalarVolume::generic(s.clone(), d).unwrap()
}

/// Problem whose measurement is generated exactly by `(p, v)` on a full mask.
fn matched_problem(lambda: f64) -> (DeltaProblem, RigidParams, VectorField) {
    let s = shape(&[16, 12, 8]);
    let mut rng = rng(11);
    let r1 = smooth_image(&s);
    let phi = smooth_phase(&s);
    let p = random_rigid(3, 0.05, 0.8, &mut rng);
    let v = random_field(&s, 0.3, &mut rng);
    let x2 = from_polar(&warp_apply(&r1, &p, &v).unwrap(), &phi).unwrap();
    let m = simulate_measurement(&x2, &SamplingMask::full(s.clone()), 0.0, 0).unwrap();
    (DeltaProblem::new(r1, phi, m, lambda).unwrap(), p, v)
}

#[test]
fn default_lambda_examples() {
    let s = shape(&[2, 2]);
    let mut vals = vec![Complex64::new(0.0, 0.0); 4];
    vals[0] = Complex64::new(0.6, 0.8);
    let m = KSpaceMeasurement::new(SamplingMask::full(s.clone()), vals).unwrap();
    assert!((default_lambda(&m) - 5e-5).abs() < 1e-20);
    assert_eq!(default_lambda(&m.scaled(0.0)), 0.0);
    assert!((default_lambda(&m.scaled(10.0)) - 5e-3).abs() < 1e-17);
}

#[test]
fn cost_vanishes_at_exact_model_match() {
    let (problem, p, v) = matched_problem(0.0);
    let cg = problem.cost_grad_parts(&p, &v, true, true).unwrap();
    let dn = problem.measurement().norm_sqr();
    assert!(cg.cost <= 1e-18 * dn, "cost {} vs {}", cg.cost, dn);
    let gp = cg.grad_p.unwrap();
    assert!(gp.iter().all(|g| g.abs() <= 1e-9), "{gp:?}");
    assert!(cg.grad_v.unwrap().max_abs() <= 1e-9);
}

#[test]
fn zero_measurement_cost_is_forward_model_energy() {
    let (problem, _, _) = matched_problem(0.0);
    let s = problem.r1_hat().shape().clone();
    let m = problem.measurement().scaled(0.0);
    let problem = DeltaProblem::new(problem.r1_hat().clone(), problem.phi2_hat().clone(), m, 0.0).unwrap();
    let x = from_polar(problem.r1_hat(), problem.phi2_hat()).unwrap();
    let direct = subsample(&dft_forward(&x), &SamplingMask::full(s.clone())).unwrap().norm_sqr();
    let cost = problem.cost_eval(&RigidParams::identity(3), &VectorField::zeros(s)).unwrap();
    assert!((cost - direct).abs() <= 1e-12 * direct);
    // Sub-sampling keeps only the selected energy.
    let mask = make_gaussian_mask(problem.r1_hat().shape(), 30.0, &MaskParams::default(), 2).unwrap();
    let d = subsample(&dft_forward(&x), &mask).unwrap();
    let sub = DeltaProblem::new(problem.r1_hat().clone(), problem.phi2_hat().clone(), d.scaled(0.0), 0.0).unwrap();
    let cost = sub.cost_eval(&RigidParams::identity(3), &VectorField::zeros(problem.r1_hat().shape().clone())).unwrap();
    assert!((cost - d.norm_sqr()).abs() <= 1e-12 * cost);
}

#[test]
fn regularization_adds_exactly() {
    let (problem, p, _) = matched_problem(0.0);
    let s = problem.r1_hat().shape().clone();
    let v = random_field(&s, 0.5, &mut rng(12));
    let lambda = 0.37;
    let with = problem.clone().with_lambda(lambda).unwrap();
    let c0 = problem.cost_eval(&p, &v).unwrap();
    let c1 = with.cost_eval(&p, &v).unwrap();
    let r = regularizer(&v).0;
    assert!(r > 0.0);
    assert!(((c1 - c0) - lambda * r).abs() <= 1e-10 * c1);
}

#[test]
fn identity_scenario_is_recovered() {
    let cfg = ScenarioConfig::identity(shape(&[32, 24, 16]), 1);
    let s = make_scenario(&cfg).unwrap();
    let full = SamplingMask::full(s.r2.shape().clone());
    let m = simulate_measurement(&s.x2(), &full, 0.0, 0).unwrap();
    let sol = sweep::run_delta(&s.r1_hat, &m, &MethodConfig::default()).unwrap();
    assert!(sol.p_hat.theta.iter().all(|x| x.abs() <= 1e-3), "{:?}", sol.p_hat);
    assert!(sol.p_hat.t.iter().all(|x| x.abs() <= 1e-3), "{:?}", sol.p_hat);
    assert!(sol.v_hat.max_abs() <= 1e-2, "max |v| {}", sol.v_hat.max_abs());
    // r1_hat equals r2 here, so the relative error stands in for the metric.
    let rel = sol.r2_hat.sub(&s.r2).unwrap().norm() / s.r2.norm();
    assert!(rel <= 1e-3, "relative error {rel}");
}

#[test]
fn heavy_regularization_flattens_the_field() {
    let s = make_scenario(&ScenarioConfig::default_for(shape(&[48, 40, 32]), 1)).unwrap();
    let mc = MethodConfig::default();
    let m = sweep::measure(&s, 10.0, 1, &mc).unwrap();
    let phi = delta_mri::kspace::estimate_phase(&m);
    let base = DeltaProblem::with_default_lambda(s.r1_hat.clone(), phi, m).unwrap();
    let heavy = base.clone().with_lambda(1e6 * base.lambda()).unwrap();
    let a = solve_delta(&base, &mc.solve).unwrap();
    let b = solve_delta(&heavy, &mc.solve).unwrap();
    let (ra, rb) = (regularizer(&a.v_hat).0, regularizer(&b.v_hat).0);
    assert!(rb < ra, "heavy {rb} vs default {ra}");
    assert!(rb <= 1e-6 * ra.max(1e-12) || rb < 1e-8, "heavy {rb}");
}

#[test]
fn cost_trace_decreases_over_blocks() {
    let s = make_scenario(&ScenarioConfig::default_for(shape(&[48, 40, 32]), 2)).unwrap();
    let mut mc = MethodConfig::default();
    mc.solve.cycles = 2;
    mc.solve.bb.max_iters = 300;
    let m = sweep::measure(&s, 20.0, 1, &mc).unwrap();
    let sol = sweep::run_delta(&s.r1_hat, &m, &mc).unwrap();
    assert_eq!(sol.blocks.len(), 4);
    for b in &sol.blocks {
        assert!(b.cost_after <= b.cost_before, "{b:?}");
    }
    for w in sol.blocks.windows(2) {
        assert!(w[1].cost_before <= w[0].cost_after * (1.0 + 1e-12));
    }
    let first = sol.cost_trace.first().unwrap().1;
    let last = sol.cost_trace.last().unwrap().1;
    assert!(last < first);
}

#[test]
fn desk_ten_percent_beats_zero_filling() {
    let s = make_scenario(&ScenarioConfig::default_for(shape(&[64, 48, 32]), 1)).unwrap();
    let mc = MethodConfig::default();
    let m = sweep::measure(&s, 10.0, 1, &mc).unwrap();
    let sol = sweep::run_delta(&s.r1_hat, &m, &mc).unwrap();
    let e_delta = normalized_error(&sol.r2_hat, &s.r2, &s.r1_hat).unwrap();
    let e_zidft = normalized_error(&z_idft(&m), &s.r2, &s.r1_hat).unwrap();
    assert!(e_delta < 1.0 && e_delta < e_zidft, "delta {e_delta}, zidft {e_zidft}");
}
