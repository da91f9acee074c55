//! JSON configuration file and its resolution against command-line flags.
//!
//! Precedence, lowest first: built-in defaults, the `--config` file, the
//! `DMRI_SEED` environment variable (seeds only), explicit flags.

use std::path::Path;

use delta_mri::sim::{DvfSpec, Method, MethodConfig, ScenarioConfig};
use delta_mri::volume::GridShape;
use serde::{Deserialize, Serialize};

use crate::Failure;

pub const SEED_ENV: &str = "DMRI_SEED";

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub scenario: ScenarioSection,
    pub method: MethodConfig,
    pub reconstruct: RunSection,
    pub sweep: SweepSection,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub shape: Option<GridShape>,
    pub seed: Option<u64>,
    pub theta_deg: Option<Vec<f64>>,
    pub t: Option<Vec<f64>>,
    pub dvf: Option<DvfSpec>,
    pub noise_frac: Option<f64>,
    pub foreground_threshold: Option<f64>,
    /// No rigid motion, no deformation, no noise.
    pub identity: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub method: Option<Method>,
    pub pct: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub pcts: Option<Vec<f64>>,
    pub methods: Option<Vec<Method>>,
    pub seeds: Option<Vec<u64>>,
}

pub fn load(path: Option<&Path>) -> Result<ConfigFile, Failure> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("invalid config {}: {e}", path.display())))
}

/// Seed from `DMRI_SEED`, if set.
pub fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Usage(format!("{SEED_ENV}={s:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

/// First present value, flag before environment before file.
pub fn pick<T>(flag: Option<T>, env: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(env).or(file)
}

pub fn parse_shape(text: &str) -> Result<GridShape, Failure> {
    GridShape::parse(text).map_err(|e| Failure::Usage(e.to_string()))
}

pub fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, Failure> {
    text.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<T>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| Failure::Usage(format!("cannot parse {what} list {text:?}")))
}

/// Scenario flags as given on the command line.
#[derive(Clone, Debug, Default)]
pub struct ScenarioFlags {
    pub shape: Option<GridShape>,
    pub seed: Option<u64>,
    pub theta_deg: Option<Vec<f64>>,
    pub t: Option<Vec<f64>>,
    pub noise_frac: Option<f64>,
    pub no_dvf: bool,
    pub identity: bool,
}

pub fn resolve_scenario(file: &ScenarioSection, flags: &ScenarioFlags) -> Result<ScenarioConfig, Failure> {
    let shape = flags
        .shape
        .clone()
        .or_else(|| file.shape.clone())
        .ok_or_else(|| Failure::Usage(format!("missing --shape (or scenario.shape in --config)\n\n{}", crate::SIMULATE_USAGE)))?;
    let seed = pick(flags.seed, env_seed()?, file.seed).unwrap_or(1);
    let mut cfg = if flags.identity || file.identity {
        ScenarioConfig::identity(shape, seed)
    } else {
        ScenarioConfig::default_for(shape, seed)
    };
    if let Some(v) = flags.theta_deg.clone().or_else(|| file.theta_deg.clone()) {
        cfg.theta_deg = v;
    }
    if let Some(v) = flags.t.clone().or_else(|| file.t.clone()) {
        cfg.t = v;
    }
    if let Some(v) = file.dvf.clone() {
        cfg.dvf = v;
    }
    if flags.no_dvf {
        cfg.dvf = DvfSpec::Zero;
    }
    if let Some(v) = flags.noise_frac.or(file.noise_frac) {
        cfg.noise_frac = v;
    }
    if let Some(v) = file.foreground_threshold {
        cfg.foreground_threshold = v;
    }
    cfg.rigid().map_err(|e| Failure::Usage(e.to_string()))?;
    if !(cfg.noise_frac >= 0.0) {
        return Err(Failure::Usage(format!("noise fraction {} must be >= 0", cfg.noise_frac)));
    }
    Ok(cfg)
}
