use std::fs;
use std::path::Path;
use std::time::Instant;

use delta_mri::baselines::z_idft;
use delta_mri::container::{self, Payload};
use delta_mri::kspace::make_gaussian_mask;
use delta_mri::sim::sweep::{measure, run_delta, run_hash, run_tcs};
use delta_mri::sim::{
    config_hash, make_scenario, normalized_error, read_bundle, run_sweep, write_bundle, Method, MethodConfig, Scenario,
};
use delta_mri::volume::{ScalarVolume, VolumeKind};
use delta_mri::warp::RigidParams;
use delta_mri::Error;
use serde::Serialize;
use serde_json::json;

use crate::config::{self, env_seed, parse_list, parse_shape, pick, ScenarioFlags};
use crate::plot::write_plot;
use crate::{EvaluateArgs, Failure, MaskArgs, ReconstructArgs, SimulateArgs, SweepArgs};

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(usage)?;
    fs::write(path, text + "\n").map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))
}

fn load_scenario(dir: &Path) -> Result<Scenario, Failure> {
    read_bundle(dir).map_err(|e| usage(format!("cannot load scenario {}: {e}", dir.display())))
}

/// Epsilon, or `None` when the reference equals the ground truth.
fn epsilon(r2_hat: &ScalarVolume, s: &Scenario) -> Result<Option<f64>, Failure> {
    match normalized_error(r2_hat, &s.r2, &s.r1_hat) {
        Ok(e) => Ok(Some(e)),
        Err(Error::ZeroDenominator) => Ok(None),
        Err(e) => Err(usage(e)),
    }
}

fn show(e: Option<f64>) -> String {
    e.map_or_else(|| "undefined".into(), |e| format!("{e:.6e}"))
}

pub fn simulate(a: &SimulateArgs) -> Result<(), Failure> {
    let file = config::load(a.config.as_deref())?;
    let flags = ScenarioFlags {
        shape: a.shape.as_deref().map(parse_shape).transpose()?,
        seed: a.seed,
        theta_deg: a.theta_deg.as_deref().map(|s| parse_list(s, "angle")).transpose()?,
        t: a.t.as_deref().map(|s| parse_list(s, "translation")).transpose()?,
        noise_frac: a.noise_frac,
        no_dvf: a.no_dvf,
        identity: a.identity,
    };
    let cfg = config::resolve_scenario(&file.scenario, &flags)?;
    let scenario = make_scenario(&cfg).map_err(|e| match e {
        Error::InvalidArgument(_) | Error::InvalidShape(_) => usage(e),
        e => Failure::Simulation(e.to_string()),
    })?;
    write_bundle(&a.out, &scenario).map_err(|e| usage(format!("cannot write scenario: {e}")))?;
    println!("scenario {}", a.out.display());
    println!("residual {:.6e}", scenario.residual);
    println!("noise_std {:.6e}", scenario.noise_std);
    println!("config_hash {}", config_hash(&cfg));
    Ok(())
}

pub fn mask(a: &MaskArgs) -> Result<(), Failure> {
    let file = config::load(a.config.as_deref())?;
    let shape = parse_shape(&a.shape)?;
    let seed = pick(a.seed, env_seed()?, file.reconstruct.seed).unwrap_or(1);
    let m = make_gaussian_mask(&shape, a.pct, &file.method.mask, seed).map_err(usage)?;
    container::write(&a.out, &Payload::Mask(m.clone())).map_err(|e| usage(format!("cannot write mask: {e}")))?;
    println!("selected {} of {}", m.count(), shape.len());
    println!(
        "config_hash {}",
        config_hash(&json!({"shape": shape, "pct": a.pct, "seed": seed, "mask": file.method.mask}))
    );
    Ok(())
}

fn tcs_alignment(a: &ReconstructArgs, rank: usize) -> Result<RigidParams, Failure> {
    if a.aligned {
        return Ok(RigidParams::identity(rank));
    }
    let path = a.rigid.clone().unwrap_or_else(|| a.out.join("rigid.json"));
    let text = fs::read_to_string(&path).map_err(|_| {
        usage(format!(
            "tcs needs a reference registered to the follow-up frame: run `reconstruct --method delta` \
             into the same --out directory first (its rigid.json is used to align the reference), \
             pass --rigid FILE, or pass --aligned if the reference is already aligned ({} not found)",
            path.display()
        ))
    })?;
    let p: RigidParams =
        serde_json::from_str(&text).map_err(|e| usage(format!("invalid rigid estimate {}: {e}", path.display())))?;
    if p.rank() != rank {
        return Err(usage(format!("rigid estimate {} is for a rank-{} grid", path.display(), p.rank())));
    }
    Ok(p)
}

pub fn reconstruct(a: &ReconstructArgs) -> Result<(), Failure> {
    let file = config::load(a.config.as_deref())?;
    let method: Method = match a.method.as_deref() {
        Some(m) => m.parse().map_err(usage)?,
        None => file.reconstruct.method.ok_or_else(|| usage("missing --method (delta, tcs, zidft)"))?,
    };
    let pct = a.pct.or(file.reconstruct.pct).ok_or_else(|| usage("missing --pct"))?;
    let seed = pick(a.seed, env_seed()?, file.reconstruct.seed).unwrap_or(1);
    let cfg: MethodConfig = file.method;
    let s = load_scenario(&a.scenario)?;
    let rank = s.r2.shape().rank();
    // Check the TCS precondition before doing any work.
    let alignment = match method {
        Method::Tcs => Some(tcs_alignment(a, rank)?),
        _ => None,
    };
    create_dir(&a.out)?;
    let m = measure(&s, pct, seed, &cfg).map_err(usage)?;
    let mut hash = run_hash(&s.config, method, pct, seed, &cfg);
    let start = Instant::now();
    let write = |name: &str, p: Payload| {
        container::write(a.out.join(name), &p).map_err(|e| usage(format!("cannot write {name}: {e}")))
    };

    let r2_hat = match method {
        Method::Zidft => {
            let r = z_idft(&m);
            write_json(&a.out.join("trace.json"), &json!({"method": "zidft", "samples": m.mask().count()}))?;
            r
        }
        Method::Delta => {
            let sol = run_delta(&s.r1_hat, &m, &cfg).map_err(|e| Failure::Solver(format!("delta: {e}")))?;
            write("v_hat.dmri", Payload::Field(sol.v_hat.clone()))?;
            write_json(&a.out.join("rigid.json"), &sol.p_hat)?;
            write_json(
                &a.out.join("trace.json"),
                &json!({"method": "delta", "cost_trace": sol.cost_trace, "blocks": sol.blocks}),
            )?;
            sol.r2_hat
        }
        Method::Tcs => {
            let p = alignment.unwrap();
            hash = config_hash(&json!({"run": hash, "alignment": p.to_vec()}));
            let sol = run_tcs(&s, &p, &m, &cfg).map_err(|e| Failure::Solver(format!("tcs: {e}")))?;
            write("x2_hat.dmri", Payload::Complex(sol.x2_hat.clone()))?;
            write_json(
                &a.out.join("trace.json"),
                &json!({
                    "method": "tcs",
                    "objective_trace": sol.objective_trace,
                    "iterations": sol.iterations,
                    "converged": sol.converged,
                    "primal_residual": sol.primal_residual,
                    "dual_residual": sol.dual_residual,
                }),
            )?;
            sol.x2_hat.magnitude()
        }
    };
    let secs = start.elapsed().as_secs_f64();
    let r2_hat = r2_hat.with_kind(VolumeKind::Magnitude).map_err(|e| Failure::Solver(e.to_string()))?;
    write("r2_hat.dmri", Payload::Real(r2_hat.clone()))?;
    let eps = epsilon(&r2_hat, &s)?;
    write_json(
        &a.out.join("run.json"),
        &json!({
            "method": method,
            "pct": pct,
            "seed": seed,
            "epsilon": eps,
            "config_hash": hash,
            "wall_time_s": secs,
        }),
    )?;
    println!("method {method}");
    println!("epsilon {}", show(eps));
    println!("config_hash {hash}");
    Ok(())
}

pub fn evaluate(a: &EvaluateArgs) -> Result<(), Failure> {
    let s = load_scenario(&a.scenario)?;
    let est = match container::read(&a.estimate).map_err(|e| usage(format!("{}: {e}", a.estimate.display())))? {
        Payload::Real(r) => r,
        Payload::Complex(x) => x.magnitude(),
        _ => return Err(usage("estimate must be a real or complex volume")),
    };
    container::expect_shape(est.shape(), s.r2.shape()).map_err(usage)?;
    println!("epsilon {}", show(epsilon(&est, &s)?));
    Ok(())
}

pub fn sweep(a: &SweepArgs) -> Result<(), Failure> {
    let file = config::load(a.config.as_deref())?;
    let pcts: Vec<f64> = match a.pcts.as_deref() {
        Some(s) => parse_list(s, "percentage")?,
        None => file.sweep.pcts.clone().unwrap_or_else(|| vec![1.0, 2.0, 5.0, 10.0, 20.0]),
    };
    let methods: Vec<Method> = match a.methods.as_deref() {
        Some(s) => parse_list(s, "method")?,
        None => file.sweep.methods.clone().unwrap_or_else(|| Method::ALL.to_vec()),
    };
    let seeds: Vec<u64> = match (a.seeds.as_deref(), env_seed()?) {
        (Some(s), _) => parse_list(s, "seed")?,
        (None, Some(e)) => vec![e],
        (None, None) => file.sweep.seeds.clone().unwrap_or_else(|| vec![1, 2, 3]),
    };
    if pcts.is_empty() || methods.is_empty() || seeds.is_empty() {
        return Err(usage("sweep needs at least one percentage, method and seed"));
    }
    let cfg = file.method;
    let s = load_scenario(&a.scenario)?;
    create_dir(&a.out)?;
    let result = run_sweep(&s, &pcts, &methods, &seeds, &cfg).map_err(usage)?;

    let mut csv = Vec::new();
    result.write_csv(&mut csv).map_err(usage)?;
    fs::write(a.out.join("sweep.csv"), csv).map_err(usage)?;
    let failed: Vec<_> = result.rows.iter().filter(|r| r.error.is_some()).collect();
    if !failed.is_empty() {
        write_json(&a.out.join("sweep_errors.json"), &failed)?;
    }
    write_plot(&a.out.join("sweep.png"), &result, &pcts, &methods).map_err(|e| usage(format!("plot: {e}")))?;

    let hash = config_hash(&json!({
        "scenario": s.config, "pcts": pcts, "methods": methods, "seeds": seeds, "method": cfg,
    }));
    println!("{:>8} {:>14} {:>14} {:>14}", "pct", "delta", "tcs", "zidft");
    let mut sorted = pcts.clone();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    for p in sorted {
        let cell = |m| {
            if methods.contains(&m) {
                result.median(m, p).map_or_else(|| "failed".into(), |e| format!("{e:.4}"))
            } else {
                "-".into()
            }
        };
        println!("{p:>8} {:>14} {:>14} {:>14}", cell(Method::Delta), cell(Method::Tcs), cell(Method::Zidft));
    }
    println!("rows {} ({} failed)", result.rows.len(), failed.len());
    println!("config_hash {hash}");
    if result.successes() == 0 {
        return Err(Failure::Solver("every run in the sweep failed".into()));
    }
    Ok(())
}
