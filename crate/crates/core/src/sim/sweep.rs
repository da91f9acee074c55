//! Reconstruction error against sub-sampling percentage for each method.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{default_tcs_lambdas, support_weights, tcs_solve, z_idft, AdmmOptions, TcsProblem};
use crate::delta::{solve_delta, DeltaProblem, DeltaSolution, SolveOptions};
use crate::error::{Error, Result};
use crate::kspace::{estimate_phase, make_gaussian_mask, simulate_measurement, KSpaceMeasurement, MaskParams};
use crate::par;
use crate::sim::scenario::{normalized_error, Scenario, ScenarioConfig};
use crate::volume::{ScalarVolume, VectorField};
use crate::warp::{warp_apply_complex, RigidParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Delta,
    Tcs,
    Zidft,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Delta, Method::Tcs, Method::Zidft];

    pub fn name(self) -> &'static str {
        match self {
            Method::Delta => "delta",
            Method::Tcs => "tcs",
            Method::Zidft => "zidft",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method {s:?} (delta, tcs, zidft)")))
    }
}

/// Settings shared by every reconstruction of a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MethodConfig {
    pub mask: MaskParams,
    pub solve: SolveOptions,
    pub admm: AdmmOptions,
    pub wavelet_levels: usize,
    /// TCS weights: complement of the true DVF support when true.
    pub tcs_invert_weights: bool,
    /// Standard deviation of optional complex noise on the follow-up k-space.
    pub measurement_noise: f64,
}

impl Default for MethodConfig {
    fn default() -> Self {
        Self {
            mask: MaskParams::default(),
            solve: SolveOptions::default(),
            admm: AdmmOptions::default(),
            wavelet_levels: 3,
            tcs_invert_weights: true,
            measurement_noise: 0.0,
        }
    }
}

/// One sweep cell. `epsilon` is `None` when the run failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: Method,
    pub pct: f64,
    pub seed: u64,
    pub epsilon: Option<f64>,
    pub wall_time_s: f64,
    pub config_hash: String,
    pub error: Option<String>,
    /// DELTA's `[theta..., t...]`, kept so TCS can be rerun with the same alignment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rigid: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

pub const CSV_HEADER: &str = "method,pct,seed,epsilon,wall_time_s,config_hash";

/// Hex SHA-256 of the JSON form of `value`; object keys are sorted, so the
/// digest does not depend on field order.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("config serializes");
    let bytes = serde_json::to_vec(&v).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct RunKey<'a> {
    scenario: &'a ScenarioConfig,
    method: Method,
    pct: f64,
    seed: u64,
    config: &'a MethodConfig,
}

/// Digest of everything that determines one run's numeric output.
pub fn run_hash(scenario: &ScenarioConfig, method: Method, pct: f64, seed: u64, config: &MethodConfig) -> String {
    config_hash(&RunKey {
        scenario,
        method,
        pct,
        seed,
        config,
    })
}

/// Mask and noiseless (by default) follow-up measurement for one cell.
pub fn measure(scenario: &Scenario, pct: f64, seed: u64, config: &MethodConfig) -> Result<KSpaceMeasurement> {
    let mask = make_gaussian_mask(scenario.r2.shape(), pct, &config.mask, seed)?;
    simulate_measurement(&scenario.x2(), &mask, config.measurement_noise, seed)
}

/// DELTA reconstruction of one measurement.
pub fn run_delta(r1_hat: &ScalarVolume, m: &KSpaceMeasurement, config: &MethodConfig) -> Result<DeltaSolution> {
    let problem = DeltaProblem::with_default_lambda(r1_hat.clone(), estimate_phase(m), m.clone())?;
    solve_delta(&problem, &config.solve)
}

/// TCS reconstruction with the reference rigidly aligned by `rigid`.
pub fn run_tcs(
    scenario: &Scenario,
    rigid: &RigidParams,
    m: &KSpaceMeasurement,
    config: &MethodConfig,
) -> Result<crate::baselines::TcsSolution> {
    let shape = scenario.x1_hat.shape().clone();
    let aligned = warp_apply_complex(&scenario.x1_hat, rigid, &VectorField::zeros(shape))?;
    let w = support_weights(&scenario.v_true, config.tcs_invert_weights);
    let (l1, l2) = default_tcs_lambdas(m);
    let problem = TcsProblem::new(aligned, m.clone(), w, l1, l2, config.wavelet_levels)?;
    tcs_solve(&problem, &config.admm)
}

fn cell(scenario: &Scenario, pct: f64, seed: u64, methods: &[Method], config: &MethodConfig) -> Vec<SweepRow> {
    let hash = |m| run_hash(&scenario.config, m, pct, seed, config);
    let row = |method, eps: Result<f64>, secs| SweepRow {
        method,
        pct,
        seed,
        wall_time_s: secs,
        config_hash: hash(method),
        epsilon: eps.as_ref().ok().copied(),
        error: eps.err().map(|e| e.to_string()),
        rigid: None,
    };
    let m = match measure(scenario, pct, seed, config) {
        Ok(m) => m,
        Err(e) => {
            return methods
                .iter()
                .map(|&meth| row(meth, Err(Error::InvalidArgument(e.to_string())), 0.0))
                .collect()
        }
    };
    let eps = |r2_hat: &ScalarVolume| normalized_error(r2_hat, &scenario.r2, &scenario.r1_hat);

    let mut out = Vec::new();
    let mut delta: Option<Result<DeltaSolution>> = None;
    let mut delta_secs = 0.0;
    if methods.iter().any(|&m| m != Method::Zidft) {
        let start = Instant::now();
        delta = Some(run_delta(&scenario.r1_hat, &m, config));
        delta_secs = start.elapsed().as_secs_f64();
    }
    for &method in methods {
        let r = match method {
            Method::Zidft => {
                let start = Instant::now();
                let e = eps(&z_idft(&m));
                row(method, e, start.elapsed().as_secs_f64())
            }
            Method::Delta => {
                let e = match delta.as_ref().unwrap() {
                    Ok(sol) => eps(&sol.r2_hat),
                    Err(e) => Err(Error::InvalidArgument(format!("DELTA failed: {e}"))),
                };
                let mut r = row(method, e, delta_secs);
                r.rigid = delta.as_ref().unwrap().as_ref().ok().map(|sol| sol.p_hat.to_vec());
                r
            }
            Method::Tcs => {
                let start = Instant::now();
                let e = match delta.as_ref().unwrap() {
                    Ok(sol) => run_tcs(scenario, &sol.p_hat, &m, config).and_then(|s| eps(&s.x2_hat.magnitude())),
                    Err(e) => Err(Error::InvalidArgument(format!("no DELTA rigid estimate for alignment: {e}"))),
                };
                row(method, e, start.elapsed().as_secs_f64())
            }
        };
        out.push(r);
    }
    out
}

/// Runs every `(pct, seed)` cell for the requested methods. Cells run in
/// parallel; rows come back sorted by `(method, pct, seed)` whatever the
/// schedule. A failed run becomes a row with `epsilon = None`.
pub fn run_sweep(
    scenario: &Scenario,
    pcts: &[f64],
    methods: &[Method],
    seeds: &[u64],
    config: &MethodConfig,
) -> Result<SweepResult> {
    if let Some(p) = pcts.iter().find(|p| !(**p > 0.0 && **p <= 100.0)) {
        return Err(Error::InvalidArgument(format!("sampling percentage {p} outside (0, 100]")));
    }
    let mut methods = methods.to_vec();
    methods.sort();
    methods.dedup();
    let cells: Vec<(f64, u64)> = pcts.iter().flat_map(|&p| seeds.iter().map(move |&s| (p, s))).collect();
    let mut rows: Vec<SweepRow> = par::map_collect(cells.len(), |i| cell(scenario, cells[i].0, cells[i].1, &methods, config))
        .into_iter()
        .flatten()
        .collect();
    rows.sort_by(|a, b| {
        a.method
            .cmp(&b.method)
            .then(a.pct.total_cmp(&b.pct))
            .then(a.seed.cmp(&b.seed))
    });
    Ok(SweepResult { rows })
}

impl SweepResult {
    /// Median epsilon over the successful rows of `(method, pct)`.
    pub fn median(&self, method: Method, pct: f64) -> Option<f64> {
        let mut v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.method == method && r.pct == pct)
            .filter_map(|r| r.epsilon)
            .collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
    }

    pub fn successes(&self) -> usize {
        self.rows.iter().filter(|r| r.epsilon.is_some()).count()
    }

    /// CSV with one row per run; failed runs carry `NaN` as epsilon.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.rows {
            let eps = r.epsilon.map_or_else(|| "NaN".to_string(), |e| format!("{e:.17e}"));
            writeln!(
                w,
                "{},{},{},{},{:.6},{}",
                r.method, r.pct, r.seed, eps, r.wall_time_s, r.config_hash
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("fista".parse::<Method>().is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let s = ScenarioConfig::default_for(crate::volume::GridShape::new(&[16, 16]).unwrap(), 1);
        let c = MethodConfig::default();
        let a = run_hash(&s, Method::Delta, 10.0, 1, &c);
        assert_eq!(a, run_hash(&s, Method::Delta, 10.0, 1, &c));
        assert_ne!(a, run_hash(&s, Method::Delta, 10.0, 2, &c));
        assert_ne!(a, run_hash(&s, Method::Tcs, 10.0, 1, &c));
        let mut c2 = c.clone();
        c2.wavelet_levels = 2;
        assert_ne!(a, run_hash(&s, Method::Delta, 10.0, 1, &c2));
        assert_eq!(a.len(), 64);
    }

    #[test]
    fn median_of_rows() {
        let row = |e| SweepRow {
            method: Method::Zidft,
            pct: 5.0,
            seed: 0,
            epsilon: e,
            wall_time_s: 0.0,
            config_hash: String::new(),
            error: None,
            rigid: None,
        };
        let r = SweepResult {
            rows: vec![row(Some(3.0)), row(Some(1.0)), row(None), row(Some(2.0))],
        };
        assert_eq!(r.median(Method::Zidft, 5.0), Some(2.0));
        assert_eq!(r.median(Method::Delta, 5.0), None);
        assert_eq!(r.successes(), 3);
    }
}
