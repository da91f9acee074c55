#![allow(dead_code)]

use delta_mri::volume::{ComplexVolume, GridShape, ScalarVolume, VectorField, VolumeKind};
use delta_mri::warp::{rotation_matrix, RigidParams};
use delta_mri::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn shape(d: &[usize]) -> GridShape {
    GridShape::new(d).unwrap()
}

pub fn random_real(s: &GridShape, rng: &mut ChaCha8Rng) -> ScalarVolume {
    let d = (0..s.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    ScalarVolume::new(s.clone(), d, VolumeKind::Generic).unwrap()
}

pub fn random_complex(s: &GridShape, rng: &mut ChaCha8Rng) -> ComplexVolume {
    let d = (0..s.len())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    ComplexVolume::new(s.clone(), d).unwrap()
}

pub fn random_field(s: &GridShape, amp: f64, rng: &mut ChaCha8Rng) -> VectorField {
    let d = (0..s.len() * s.rank()).map(|_| rng.random_range(-amp..amp)).collect();
    VectorField::new(s.clone(), d).unwrap()
}

pub fn random_rigid(rank: usize, rot: f64, trans: f64, rng: &mut ChaCha8Rng) -> RigidParams {
    let theta = (0..RigidParams::n_angles(rank)).map(|_| rng.random_range(-rot..rot)).collect();
    let t = (0..rank).map(|_| rng.random_range(-trans..trans)).collect();
    RigidParams::new(theta, t).unwrap()
}

/// Smooth test image: a sum of broad Gaussians, nonzero everywhere.
pub fn smooth_image(s: &GridShape) -> ScalarVolume {
    let c = s.center();
    let n = s.smallest_dim() as f64;
    let d = (0..s.len())
        .map(|i| {
            let x = s.unravel(i);
            let r2 = |off: &[f64], w: f64| -> f64 {
                x.iter()
                    .enumerate()
                    .map(|(a, &k)| (k as f64 - c[a] - off[a] * n).powi(2))
                    .sum::<f64>()
                    / (w * n).powi(2)
            };
            0.2 + (-r2(&[0.1, -0.1, 0.05], 0.3)).exp() + 0.5 * (-r2(&[-0.2, 0.15, -0.1], 0.15)).exp()
        })
        .collect();
    ScalarVolume::new(s.clone(), d, VolumeKind::Magnitude).unwrap()
}

/// Sample points of the pull warp, recomputed from the rotation matrix:
/// `R^T (y + v(y) - c - t) + c` in a 3D frame (2D grids get a unit leading axis).
pub fn sample_points(s: &GridShape, p: &RigidParams, v: &VectorField) -> Vec<[f64; 3]> {
    let rank = s.rank();
    let lift = |x: &[f64]| -> [f64; 3] {
        if rank == 3 {
            [x[0], x[1], x[2]]
        } else {
            [0.0, x[0], x[1]]
        }
    };
    let theta = if rank == 3 {
        [p.theta[0], p.theta[1], p.theta[2]]
    } else {
        [p.theta[0], 0.0, 0.0]
    };
    let r = rotation_matrix(theta);
    let c = lift(&s.center());
    let t = lift(&p.t);
    (0..s.len())
        .map(|i| {
            let y: Vec<f64> = s.unravel(i).iter().map(|&k| k as f64).collect();
            let y = lift(&y);
            let d = lift(v.at(i));
            let q = [y[0] + d[0] - c[0] - t[0], y[1] + d[1] - c[1] - t[1], y[2] + d[2] - c[2] - t[2]];
            let mut out = [0.0; 3];
            for a in 0..3 {
                out[a] = (0..3).map(|b| r[b][a] * q[b]).sum::<f64>() + c[a];
            }
            out
        })
        .collect()
}

/// Smallest distance of any coordinate of any sample point to a cell face.
pub fn boundary_margin(points: &[[f64; 3]], rank: usize) -> f64 {
    let first = 3 - rank;
    points
        .iter()
        .flat_map(|p| p[first..].to_vec())
        .map(|x| {
            let f = x - x.floor();
            f.min(1.0 - f)
        })
        .fold(f64::INFINITY, f64::min)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub mod oracle;
