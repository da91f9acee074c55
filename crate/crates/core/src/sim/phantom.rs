//! Piecewise-smooth synthetic anatomy.

use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::par;
use crate::volume::{GridShape, ScalarVolume, VolumeKind};

/// `(center, semi-axes, intensity increment)`, in units of the half extent
/// of each axis. The first entry is the outer boundary; the others lie
/// inside it.
const ELLIPSOIDS: [([f64; 3], [f64; 3], f64); 4] = [
    ([0.0, 0.0, 0.0], [0.80, 0.78, 0.82], 0.30),
    ([0.0, 0.02, 0.0], [0.62, 0.58, 0.64], 0.30),
    ([0.20, -0.15, 0.0], [0.22, 0.25, 0.30], 0.25),
    ([-0.25, 0.20, 0.05], [0.20, 0.22, 0.25], -0.15),
];

const LESION_COUNT: usize = 3;
const LESION_AMPLITUDE: f64 = 0.12;
const MODULATION: f64 = 0.04;

/// Quintic smoothstep: 0 at `t <= 0`, 1 at `t >= 1`, C2 in between.
fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Analytic phantom on a fixed grid; it can be evaluated off-grid, which
/// lets a deformed copy be sampled without interpolation error.
#[derive(Clone, Debug)]
pub struct Phantom {
    shape: GridShape,
    half: Vec<f64>,
    center: Vec<f64>,
    edge: f64,
    lesions: Vec<Vec<f64>>,
    lesion_radius: f64,
    phase_range: (f64, f64),
}

impl Phantom {
    pub fn new(shape: &GridShape, seed: u64) -> Self {
        let rank = shape.rank();
        let half: Vec<f64> = shape.dims().iter().map(|&d| d as f64 / 2.0).collect();
        let center = shape.center();
        let smallest = shape.smallest_dim() as f64;
        let edge = (smallest / 6.0).max(2.0);

        // Lesion centers, drawn inside the second ellipsoid.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let (c1, a1, _) = ELLIPSOIDS[1];
        let mut lesions = Vec::with_capacity(LESION_COUNT);
        while lesions.len() < LESION_COUNT {
            let u: Vec<f64> = (0..rank).map(|_| rng.random_range(-1.0..1.0)).collect();
            let rho2: f64 = u.iter().map(|x| x * x).sum();
            if rho2 > 0.55 * 0.55 {
                continue;
            }
            let pos: Vec<f64> = (0..rank)
                .map(|a| center[a] + (c1[a] + u[a] * a1[a]) * half[a])
                .collect();
            lesions.push(pos);
        }

        let mut p = Self {
            shape: shape.clone(),
            half,
            center,
            edge,
            lesions,
            lesion_radius: (0.15 * smallest).max(3.0),
            phase_range: (0.0, 1.0),
        };
        let raw = par::map_collect(shape.len(), |i| {
            let x: Vec<f64> = shape.unravel(i).iter().map(|&k| k as f64).collect();
            p.raw_phase(&x)
        });
        let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        p.phase_range = (lo, hi);
        p
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn lesion_centers(&self) -> &[Vec<f64>] {
        &self.lesions
    }

    fn normalized(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.center)
            .zip(&self.half)
            .map(|((x, c), h)| (x - c) / h)
            .collect()
    }

    /// Soft indicator of ellipsoid `k`, exactly 0 outside it.
    fn ellipsoid(&self, k: usize, u: &[f64]) -> f64 {
        let (c, a, _) = ELLIPSOIDS[k];
        let rho = u
            .iter()
            .enumerate()
            .map(|(i, &ui)| ((ui - c[i]) / a[i]).powi(2))
            .sum::<f64>()
            .sqrt();
        // Edge width in voxels, converted with the shortest semi-axis.
        let a_min = (0..u.len()).map(|i| a[i] * self.half[i]).fold(f64::INFINITY, f64::min);
        smoothstep((1.0 - rho) * a_min / self.edge)
    }

    /// Magnitude at a continuous index-space position.
    pub fn magnitude_at(&self, x: &[f64]) -> f64 {
        let u = self.normalized(x);
        let outer = self.ellipsoid(0, &u);
        if outer == 0.0 {
            return 0.0;
        }
        let mut value = ELLIPSOIDS[0].2 * outer;
        for k in 1..ELLIPSOIDS.len() {
            value += ELLIPSOIDS[k].2 * self.ellipsoid(k, &u);
        }
        let r2 = self.lesion_radius * self.lesion_radius;
        for c in &self.lesions {
            let d2: f64 = x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum();
            if d2 < r2 {
                value += LESION_AMPLITUDE * (1.0 - d2 / r2).powi(3);
            }
        }
        let m = 1.0 + MODULATION * (1.3 * u[0]).sin() * (0.9 * u[u.len() - 1] + 0.4).cos();
        (value * m).clamp(0.0, 1.0)
    }

    fn raw_phase(&self, x: &[f64]) -> f64 {
        let u = self.normalized(x);
        let g = |i: usize| u.get(i).copied().unwrap_or(0.0);
        0.6 * g(0) - 0.4 * g(1) + 0.3 * g(2) + 0.5 * g(0) * g(1) - 0.2 * g(1) * g(1) + 0.25 * g(2) * g(2)
    }

    /// Phase at a continuous position, mapped so the grid spans `[-pi/2, pi/2]`.
    pub fn phase_at(&self, x: &[f64]) -> f64 {
        let (lo, hi) = self.phase_range;
        let t = if hi > lo { (self.raw_phase(x) - lo) / (hi - lo) } else { 0.5 };
        (-FRAC_PI_2 + std::f64::consts::PI * t).clamp(-FRAC_PI_2, FRAC_PI_2)
    }

    fn sample(&self, f: impl Fn(&[f64]) -> f64 + Sync + Send) -> Vec<f64> {
        par::map_collect(self.shape.len(), |i| {
            let x: Vec<f64> = self.shape.unravel(i).iter().map(|&k| k as f64).collect();
            f(&x)
        })
    }

    pub fn magnitude(&self) -> ScalarVolume {
        let data = self.sample(|x| self.magnitude_at(x));
        ScalarVolume::from_parts_unchecked(self.shape.clone(), data, VolumeKind::Magnitude)
    }

    pub fn phase(&self) -> ScalarVolume {
        let data = self.sample(|x| self.phase_at(x));
        ScalarVolume::from_parts_unchecked(self.shape.clone(), data, VolumeKind::Phase)
    }
}

/// Magnitude `r2` in `[0, 1]` and a smooth phase `phi2` in `[-pi/2, pi/2]`.
pub fn make_phantom(shape: &GridShape, seed: u64) -> Result<(ScalarVolume, ScalarVolume)> {
    let p = Phantom::new(shape, seed);
    Ok((p.magnitude(), p.phase()))
}
