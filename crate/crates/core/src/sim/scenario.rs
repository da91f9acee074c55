//! Ground-truth scenario: a follow-up image, a reference that the true
//! transform maps onto it, and a noisy complex reference acquisition.

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::sim::phantom::Phantom;
use crate::volume::{ComplexVolume, GridShape, ScalarVolume, VectorField, VolumeKind};
use crate::warp::{invert_map, warp_apply, RigidParams};

/// Largest accepted `||W(r1, p*, v*) - r2|| / ||r2||`.
pub const CONSTRUCTION_RESIDUAL_LIMIT: f64 = 1e-2;
const INVERT_ITERS: usize = 60;

/// Reference grid and translation the default rigid truth is quoted for.
pub const REFERENCE_DIM0: f64 = 256.0;
pub const REFERENCE_T: [f64; 3] = [-6.0, -5.0, -4.5];
pub const REFERENCE_THETA_DEG: [f64; 3] = [2.9, 4.0, 5.7];

/// Ground-truth deformation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DvfSpec {
    Zero,
    /// Truncated Gaussian bump `peak * g(|x - c| / sigma) * dir`, with
    /// `sigma = radius_frac * smallest_dim`, cut at `3 sigma` and shifted so
    /// it reaches 0 there.
    GaussianBump {
        peak: f64,
        radius_frac: f64,
        /// Index-space center; defaults to the first lesion.
        #[serde(default)]
        center: Option<Vec<f64>>,
        /// Displacement direction; defaults to the unit diagonal.
        #[serde(default)]
        direction: Option<Vec<f64>>,
    },
}

impl Default for DvfSpec {
    fn default() -> Self {
        DvfSpec::GaussianBump {
            peak: 3.0,
            radius_frac: 0.125,
            center: None,
            direction: None,
        }
    }
}

impl DvfSpec {
    pub fn build(&self, phantom: &Phantom) -> Result<VectorField> {
        let shape = phantom.shape();
        let rank = shape.rank();
        match self {
            DvfSpec::Zero => Ok(VectorField::zeros(shape.clone())),
            DvfSpec::GaussianBump {
                peak,
                radius_frac,
                center,
                direction,
            } => {
                if !(*radius_frac > 0.0) || !peak.is_finite() {
                    return Err(Error::InvalidArgument("invalid Gaussian bump".into()));
                }
                let c = center.clone().unwrap_or_else(|| phantom.lesion_centers()[0].clone());
                let dir = direction.clone().unwrap_or_else(|| vec![1.0; rank]);
                if c.len() != rank || dir.len() != rank {
                    return Err(Error::InvalidArgument(format!(
                        "bump center and direction need {rank} components"
                    )));
                }
                let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(Error::InvalidArgument("zero bump direction".into()));
                }
                let dir: Vec<f64> = dir.iter().map(|d| d / norm).collect();
                let sigma = radius_frac * shape.smallest_dim() as f64;
                let floor = (-4.5f64).exp();
                let data = par::map_collect(shape.len(), |i| {
                    let x = shape.unravel(i);
                    let d2: f64 = x.iter().zip(&c).map(|(&k, c)| (k as f64 - c).powi(2)).sum();
                    let r2 = d2 / (sigma * sigma);
                    let g = if r2 < 9.0 { ((-0.5 * r2).exp() - floor) / (1.0 - floor) } else { 0.0 };
                    dir.iter().map(|d| peak * g * d).collect::<Vec<f64>>()
                })
                .concat();
                VectorField::new(shape.clone(), data)
            }
        }
    }
}

/// Everything needed to build a [`Scenario`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub shape: GridShape,
    pub seed: u64,
    /// Rotation angles in degrees (three in 3D, one in 2D).
    pub theta_deg: Vec<f64>,
    /// Translation in voxels.
    pub t: Vec<f64>,
    pub dvf: DvfSpec,
    pub noise_frac: f64,
    pub foreground_threshold: f64,
}

impl ScenarioConfig {
    /// Default rigid truth, with the translation scaled by `dims[0] / 256`.
    pub fn default_for(shape: GridShape, seed: u64) -> Self {
        let rank = shape.rank();
        let scale = shape.dims()[0] as f64 / REFERENCE_DIM0;
        let (theta_deg, t) = if rank == 3 {
            (REFERENCE_THETA_DEG.to_vec(), REFERENCE_T.iter().map(|t| t * scale).collect())
        } else {
            (vec![REFERENCE_THETA_DEG[2]], REFERENCE_T[..2].iter().map(|t| t * scale).collect())
        };
        Self {
            shape,
            seed,
            theta_deg,
            t,
            dvf: DvfSpec::default(),
            noise_frac: 0.04,
            foreground_threshold: 0.1,
        }
    }

    /// No motion, no deformation, no noise.
    pub fn identity(shape: GridShape, seed: u64) -> Self {
        let rank = shape.rank();
        Self {
            theta_deg: vec![0.0; RigidParams::n_angles(rank)],
            t: vec![0.0; rank],
            dvf: DvfSpec::Zero,
            noise_frac: 0.0,
            ..Self::default_for(shape, seed)
        }
    }

    pub fn rigid(&self) -> Result<RigidParams> {
        RigidParams::new(self.theta_deg.iter().map(|d| d.to_radians()).collect(), self.t.clone())
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub r2: ScalarVolume,
    pub phi2: ScalarVolume,
    pub rigid_true: RigidParams,
    pub v_true: VectorField,
    pub r1: ScalarVolume,
    /// `|x1_hat|`.
    pub r1_hat: ScalarVolume,
    pub x1_hat: ComplexVolume,
    /// Standard deviation of the complex noise added to `x1`.
    pub noise_std: f64,
    /// `||W(r1, p*, v*) - r2|| / ||r2||`.
    pub residual: f64,
}

impl Scenario {
    pub fn x2(&self) -> ComplexVolume {
        let data = self
            .r2
            .data()
            .iter()
            .zip(self.phi2.data())
            .map(|(&m, &p)| Complex64::from_polar(m, p))
            .collect();
        ComplexVolume::from_parts_unchecked(self.r2.shape().clone(), data)
    }
}

/// Mean of `r` over voxels above `threshold * max(r)`.
pub fn foreground_mean(r: &ScalarVolume, threshold: f64) -> f64 {
    let cut = threshold * r.max();
    let (sum, count) = r
        .data()
        .iter()
        .filter(|&&v| v > cut)
        .fold((0.0, 0usize), |(s, c), &v| (s + v, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Builds the phantom, the true motion, the reference `r1` with
/// `W(r1, p*, v*) ~ r2`, and the noisy complex reference `x1_hat`.
///
/// `r1` is the analytic phantom sampled at the inverse-mapped grid points,
/// so the only construction error is one interpolation inside `W`.
pub fn make_scenario(cfg: &ScenarioConfig) -> Result<Scenario> {
    let shape = cfg.shape.clone();
    if !(cfg.noise_frac >= 0.0) || !(0.0..1.0).contains(&cfg.foreground_threshold) {
        return Err(Error::InvalidArgument("noise_frac must be >= 0 and threshold in [0, 1)".into()));
    }
    let rigid = cfg.rigid()?;
    let phantom = Phantom::new(&shape, cfg.seed);
    let r2 = phantom.magnitude();
    let phi2 = phantom.phase();
    let v_true = cfg.dvf.build(&phantom)?;

    let r1 = if rigid.is_identity() && v_true.max_abs() == 0.0 {
        r2.clone()
    } else {
        let inv = invert_map(&rigid, &v_true, INVERT_ITERS)?;
        let rank = shape.rank();
        let u = inv.field.data();
        let data = par::map_collect(shape.len(), |i| {
            let x: Vec<f64> = shape
                .unravel(i)
                .iter()
                .enumerate()
                .map(|(a, &k)| k as f64 + u[i * rank + a])
                .collect();
            phantom.magnitude_at(&x)
        });
        ScalarVolume::from_parts_unchecked(shape.clone(), data, VolumeKind::Magnitude)
    };

    let forward = warp_apply(&r1, &rigid, &v_true)?;
    let residual = forward.sub(&r2)?.norm() / r2.norm();
    if !(residual <= CONSTRUCTION_RESIDUAL_LIMIT) {
        return Err(Error::ConstructionResidual {
            residual,
            limit: CONSTRUCTION_RESIDUAL_LIMIT,
        });
    }

    let noise_std = cfg.noise_frac * foreground_mean(&r1, cfg.foreground_threshold);
    let clean: Vec<Complex64> = r1
        .data()
        .iter()
        .zip(phi2.data())
        .map(|(&m, &p)| Complex64::from_polar(m, p))
        .collect();
    let (x1_hat, r1_hat) = if noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(2);
        let normal = Normal::new(0.0, noise_std / std::f64::consts::SQRT_2)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let noisy: Vec<Complex64> = clean
            .iter()
            .map(|z| z + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
            .collect();
        let x = ComplexVolume::from_parts_unchecked(shape.clone(), noisy);
        let m = x.magnitude();
        (x, m)
    } else {
        (ComplexVolume::from_parts_unchecked(shape.clone(), clean), r1.clone())
    };

    Ok(Scenario {
        config: cfg.clone(),
        r2,
        phi2,
        rigid_true: rigid,
        v_true,
        r1,
        r1_hat,
        x1_hat,
        noise_std,
        residual,
    })
}

/// `||r2_hat - r2|| / ||r1_hat - r2||`.
pub fn normalized_error(r2_hat: &ScalarVolume, r2: &ScalarVolume, r1_hat: &ScalarVolume) -> Result<f64> {
    r2.shape().ensure_same(r2_hat.shape())?;
    r2.shape().ensure_same(r1_hat.shape())?;
    let den = r1_hat.sub(r2)?.norm();
    if den == 0.0 {
        return Err(Error::ZeroDenominator);
    }
    Ok(r2_hat.sub(r2)?.norm() / den)
}
