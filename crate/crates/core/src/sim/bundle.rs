//! Scenario directory: one DMRI file per array plus `manifest.json`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::container::{self, Payload};
use crate::error::{Error, Result};
use crate::sim::scenario::{Scenario, ScenarioConfig};
use crate::volume::VolumeKind;
use crate::warp::RigidParams;

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format: u32,
    pub config: ScenarioConfig,
    pub rigid_true: RigidParams,
    pub noise_std: f64,
    pub residual: f64,
    pub files: Vec<String>,
}

const FILES: [&str; 6] = ["r1.dmri", "r1_hat.dmri", "r2.dmri", "phi2.dmri", "v_true.dmri", "x1_hat.dmri"];

/// Writes the scenario arrays and manifest into `dir`, creating it if needed.
pub fn write_bundle(dir: impl AsRef<Path>, s: &Scenario) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let payloads = [
        Payload::Real(s.r1.clone()),
        Payload::Real(s.r1_hat.clone()),
        Payload::Real(s.r2.clone()),
        Payload::Real(s.phi2.clone()),
        Payload::Field(s.v_true.clone()),
        Payload::Complex(s.x1_hat.clone()),
    ];
    for (name, p) in FILES.iter().zip(&payloads) {
        container::write(dir.join(name), p)?;
    }
    let manifest = Manifest {
        format: 1,
        config: s.config.clone(),
        rigid_true: s.rigid_true.clone(),
        noise_std: s.noise_std,
        residual: s.residual,
        files: FILES.iter().map(|f| f.to_string()).collect(),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::MalformedHeader(e.to_string()))?;
    fs::write(dir.join(MANIFEST), json + "\n")?;
    Ok(())
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let text = fs::read_to_string(dir.as_ref().join(MANIFEST))?;
    serde_json::from_str(&text).map_err(|e| Error::MalformedHeader(format!("manifest: {e}")))
}

/// Loads a scenario written by [`write_bundle`] (arrays at file precision).
pub fn read_bundle(dir: impl AsRef<Path>) -> Result<Scenario> {
    let dir = dir.as_ref();
    let m = read_manifest(dir)?;
    let shape = &m.config.shape;
    let r1 = container::read_real(dir.join(FILES[0]), VolumeKind::Magnitude)?;
    let r1_hat = container::read_real(dir.join(FILES[1]), VolumeKind::Magnitude)?;
    let r2 = container::read_real(dir.join(FILES[2]), VolumeKind::Magnitude)?;
    let phi2 = container::read_real(dir.join(FILES[3]), VolumeKind::Phase)?;
    let v_true = container::read_field(dir.join(FILES[4]))?;
    let x1_hat = container::read_complex(dir.join(FILES[5]))?;
    for s in [r1.shape(), r1_hat.shape(), r2.shape(), phi2.shape(), v_true.shape(), x1_hat.shape()] {
        container::expect_shape(s, shape)?;
    }
    Ok(Scenario {
        config: m.config,
        r2,
        phi2,
        rigid_true: m.rigid_true,
        v_true,
        r1,
        r1_hat,
        x1_hat,
        noise_std: m.noise_std,
        residual: m.residual,
    })
}
