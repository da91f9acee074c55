//! Backward (pull) image warping: a rigid rotation about the grid center
//! and a translation, followed by a local displacement field.
//!
//! For an output voxel `y` the sample position in the input image is
//!
//! ```text
//! s(y) = R(theta)^T (y + v(y) - c - t) + c,     R = Rz(theta3) Ry(theta2) Rx(theta1)
//! ```
//!
//! i.e. `output(y) = r(rho^-1(y + v(y)))` with `rho(x) = R (x - c) + c + t`.
//! Values are obtained by multilinear interpolation; samples outside the grid
//! read as zero. The map is linear in the image, so it has an exact sparse
//! adjoint, and its derivatives with respect to `v`, `theta` and `t` follow
//! from the piecewise-constant gradient of the interpolant.
//!
//! 2D grids are handled as 3D grids with a leading axis of length one; the
//! single in-plane angle is the rotation about that axis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::volume::{ComplexVolume, GridShape, ScalarVolume, VectorField, VolumeKind};

/// Default half-width of the rotation box, radians.
pub const DEFAULT_THETA_BOUND: f64 = 0.3;
/// Default half-width of the translation box, voxels.
pub const DEFAULT_T_BOUND: f64 = 20.0;

/// Rotation angles and translation of the rigid part of the warp, with the
/// box they are constrained to.
///
/// Packed vector order is `[theta..., t...]`: 6 entries in 3D, 3 in 2D.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigidParams {
    pub theta: Vec<f64>,
    pub t: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl RigidParams {
    /// Number of rotation angles for a grid of the given rank.
    pub fn n_angles(rank: usize) -> usize {
        if rank == 2 {
            1
        } else {
            3
        }
    }

    pub fn n_params(rank: usize) -> usize {
        Self::n_angles(rank) + rank
    }

    pub fn identity(rank: usize) -> Self {
        let na = Self::n_angles(rank);
        let (lower, upper) = default_bounds(rank);
        Self {
            theta: vec![0.0; na],
            t: vec![0.0; rank],
            lower,
            upper,
        }
    }

    /// Parameters with default bounds; fails if any component is outside them.
    pub fn new(theta: Vec<f64>, t: Vec<f64>) -> Result<Self> {
        let rank = t.len();
        if !(2..=3).contains(&rank) || theta.len() != Self::n_angles(rank) {
            return Err(Error::InvalidArgument(format!(
                "rigid parameters need {} angle(s) for {} translations",
                Self::n_angles(rank.clamp(2, 3)),
                rank
            )));
        }
        let (lower, upper) = default_bounds(rank);
        let p = Self { theta, t, lower, upper };
        p.validate()?;
        Ok(p)
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        self.lower = lower;
        self.upper = upper;
        self.validate()?;
        Ok(self)
    }

    pub fn rank(&self) -> usize {
        self.t.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.theta.len() + self.t.len();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::InvalidArgument("bounds length mismatch".into()));
        }
        for (i, x) in self.to_vec().into_iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::NonFinite(format!("rigid parameter {i}")));
            }
            if x < self.lower[i] || x > self.upper[i] {
                return Err(Error::InvalidArgument(format!(
                    "rigid parameter {i} = {x} outside [{}, {}]",
                    self.lower[i], self.upper[i]
                )));
            }
        }
        Ok(())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.theta.iter().chain(&self.t).copied().collect()
    }

    /// Replaces the values from a packed vector, keeping the bounds.
    pub fn with_values(&self, x: &[f64]) -> Self {
        let na = self.theta.len();
        assert_eq!(x.len(), na + self.t.len());
        Self {
            theta: x[..na].to_vec(),
            t: x[na..].to_vec(),
            lower: self.lower.clone(),
            upper: self.upper.clone(),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.to_vec().iter().all(|&x| x == 0.0)
    }
}

fn default_bounds(rank: usize) -> (Vec<f64>, Vec<f64>) {
    let na = RigidParams::n_angles(rank);
    let mut lower = vec![-DEFAULT_THETA_BOUND; na];
    let mut upper = vec![DEFAULT_THETA_BOUND; na];
    lower.extend(std::iter::repeat_n(-DEFAULT_T_BOUND, rank));
    upper.extend(std::iter::repeat_n(DEFAULT_T_BOUND, rank));
    (lower, upper)
}

type Mat3 = [[f64; 3]; 3];

fn matmul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn transpose(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

fn matvec(a: &Mat3, x: &[f64; 3]) -> [f64; 3] {
    [
        a[0][0] * x[0] + a[0][1] * x[1] + a[0][2] * x[2],
        a[1][0] * x[0] + a[1][1] * x[1] + a[1][2] * x[2],
        a[2][0] * x[0] + a[2][1] * x[1] + a[2][2] * x[2],
    ]
}

fn rot_x(a: f64) -> (Mat3, Mat3) {
    let (s, c) = a.sin_cos();
    (
        [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]],
        [[0.0, 0.0, 0.0], [0.0, -s, -c], [0.0, c, -s]],
    )
}

fn rot_y(a: f64) -> (Mat3, Mat3) {
    let (s, c) = a.sin_cos();
    (
        [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]],
        [[-s, 0.0, c], [0.0, 0.0, 0.0], [-c, 0.0, -s]],
    )
}

fn rot_z(a: f64) -> (Mat3, Mat3) {
    let (s, c) = a.sin_cos();
    (
        [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
        [[-s, -c, 0.0], [c, -s, 0.0], [0.0, 0.0, 0.0]],
    )
}

/// Rotation `Rz(t3) Ry(t2) Rx(t1)`.
pub fn rotation_matrix(theta: [f64; 3]) -> [[f64; 3]; 3] {
    let (rx, _) = rot_x(theta[0]);
    let (ry, _) = rot_y(theta[1]);
    let (rz, _) = rot_z(theta[2]);
    matmul(&rz, &matmul(&ry, &rx))
}

/// Warp geometry lifted to three axes.
struct Geometry {
    rank: usize,
    dims: [usize; 3],
    center: [f64; 3],
    t: [f64; 3],
    /// `R`
    rot: Mat3,
    /// `R^T`
    rot_t: Mat3,
    /// `d R^T / d theta_k` for the three Euler angles.
    d_rot_t: [Mat3; 3],
}

impl Geometry {
    fn new(shape: &GridShape, p: &RigidParams) -> Result<Self> {
        let rank = shape.rank();
        if p.rank() != rank || p.theta.len() != RigidParams::n_angles(rank) {
            return Err(Error::InvalidArgument(format!(
                "rigid parameters of rank {} for a rank-{rank} grid",
                p.rank()
            )));
        }
        let d = shape.dims();
        let c = shape.center();
        let (dims, center, t, theta) = if rank == 3 {
            (
                [d[0], d[1], d[2]],
                [c[0], c[1], c[2]],
                [p.t[0], p.t[1], p.t[2]],
                [p.theta[0], p.theta[1], p.theta[2]],
            )
        } else {
            (
                [1, d[0], d[1]],
                [0.0, c[0], c[1]],
                [0.0, p.t[0], p.t[1]],
                [p.theta[0], 0.0, 0.0],
            )
        };
        let (rx, drx) = rot_x(theta[0]);
        let (ry, dry) = rot_y(theta[1]);
        let (rz, drz) = rot_z(theta[2]);
        let rot = matmul(&rz, &matmul(&ry, &rx));
        let (rxt, ryt, rzt) = (transpose(&rx), transpose(&ry), transpose(&rz));
        let d_rot_t = [
            matmul(&transpose(&drx), &matmul(&ryt, &rzt)),
            matmul(&rxt, &matmul(&transpose(&dry), &rzt)),
            matmul(&rxt, &matmul(&ryt, &transpose(&drz))),
        ];
        Ok(Self {
            rank,
            dims,
            center,
            t,
            rot,
            rot_t: transpose(&rot),
            d_rot_t,
        })
    }

    fn n(&self) -> usize {
        self.dims.iter().product()
    }

    fn coords(&self, i: usize) -> [f64; 3] {
        let k = i % self.dims[2];
        let j = (i / self.dims[2]) % self.dims[1];
        let l = i / (self.dims[2] * self.dims[1]);
        [l as f64, j as f64, k as f64]
    }

    /// Displacement of voxel `i` lifted to three components.
    fn disp(&self, v: Option<&VectorField>, i: usize) -> [f64; 3] {
        match v {
            None => [0.0; 3],
            Some(v) => {
                let d = v.at(i);
                if self.rank == 3 {
                    [d[0], d[1], d[2]]
                } else {
                    [0.0, d[0], d[1]]
                }
            }
        }
    }

    /// `q = y + v - c - t`, the argument of `R^T`.
    fn q(&self, y: [f64; 3], d: [f64; 3]) -> [f64; 3] {
        [
            y[0] + d[0] - self.center[0] - self.t[0],
            y[1] + d[1] - self.center[1] - self.t[1],
            y[2] + d[2] - self.center[2] - self.t[2],
        ]
    }

    fn sample_point(&self, q: &[f64; 3]) -> [f64; 3] {
        let s = matvec(&self.rot_t, q);
        [s[0] + self.center[0], s[1] + self.center[1], s[2] + self.center[2]]
    }

    /// Calls `f(index, weight)` for each in-grid interpolation corner of `s`.
    #[inline]
    fn corners(&self, s: &[f64; 3], mut f: impl FnMut(usize, f64, [f64; 3])) {
        if s.iter().any(|x| !x.is_finite()) {
            return;
        }
        let mut base = [0isize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let fl = s[a].floor();
            if fl < -1.0 || fl > self.dims[a] as f64 - 1.0 {
                return;
            }
            base[a] = fl as isize;
            frac[a] = s[a] - fl;
        }
        for corner in 0..8 {
            let mut idx = 0usize;
            let mut w = [0.0; 3];
            let mut dw = [0.0; 3];
            let mut inside = true;
            for a in 0..3 {
                let bit = (corner >> (2 - a)) & 1;
                let p = base[a] + bit as isize;
                if p < 0 || p >= self.dims[a] as isize {
                    inside = false;
                    break;
                }
                idx = idx * self.dims[a] + p as usize;
                if bit == 1 {
                    w[a] = frac[a];
                    dw[a] = 1.0;
                } else {
                    w[a] = 1.0 - frac[a];
                    dw[a] = -1.0;
                }
            }
            if !inside {
                continue;
            }
            let weight = w[0] * w[1] * w[2];
            let grad = [dw[0] * w[1] * w[2], w[0] * dw[1] * w[2], w[0] * w[1] * dw[2]];
            f(idx, weight, grad);
        }
    }

    fn interpolate(&self, data: &[f64], s: &[f64; 3]) -> f64 {
        let mut acc = 0.0;
        self.corners(s, |i, w, _| acc += w * data[i]);
        acc
    }

    /// Interpolant gradient at `s` (sub-gradient on cell faces: the cell
    /// with `floor(s)` as its lower corner is used).
    fn gradient(&self, data: &[f64], s: &[f64; 3]) -> [f64; 3] {
        let mut g = [0.0; 3];
        self.corners(s, |i, _, dw| {
            let v = data[i];
            g[0] += v * dw[0];
            g[1] += v * dw[1];
            g[2] += v * dw[2];
        });
        g
    }
}

fn check_shapes(r: &GridShape, v: &VectorField) -> Result<()> {
    r.ensure_same(v.shape())
}

/// `W(r, theta, t, v)`.
pub fn warp_apply(r: &ScalarVolume, p: &RigidParams, v: &VectorField) -> Result<ScalarVolume> {
    check_shapes(r.shape(), v)?;
    let geo = Geometry::new(r.shape(), p)?;
    let data = r.data();
    let out = par::map_collect(geo.n(), |i| {
        let q = geo.q(geo.coords(i), geo.disp(Some(v), i));
        geo.interpolate(data, &geo.sample_point(&q))
    });
    let kind = if r.kind() == VolumeKind::Magnitude {
        VolumeKind::Magnitude
    } else {
        VolumeKind::Generic
    };
    Ok(ScalarVolume::from_parts_unchecked(r.shape().clone(), out, kind))
}

/// Warps the real and imaginary parts of a complex image.
pub fn warp_apply_complex(x: &ComplexVolume, p: &RigidParams, v: &VectorField) -> Result<ComplexVolume> {
    let re = warp_apply(&x.real_part(), p, v)?;
    let im = warp_apply(&x.imag_part(), p, v)?;
    ComplexVolume::from_re_im(&re, &im)
}

/// Adjoint of `r -> warp_apply(r, p, v)`: scatters `g` back along the
/// interpolation weights.
pub fn warp_adjoint(g: &ScalarVolume, p: &RigidParams, v: &VectorField) -> Result<ScalarVolume> {
    check_shapes(g.shape(), v)?;
    let geo = Geometry::new(g.shape(), p)?;
    let gd = g.data();
    let mut out = vec![0.0; geo.n()];
    // Sequential scatter keeps the summation order fixed.
    for (i, &gi) in gd.iter().enumerate() {
        if gi == 0.0 {
            continue;
        }
        let q = geo.q(geo.coords(i), geo.disp(Some(v), i));
        geo.corners(&geo.sample_point(&q), |j, w, _| out[j] += w * gi);
    }
    Ok(ScalarVolume::from_parts_unchecked(g.shape().clone(), out, VolumeKind::Generic))
}

/// Vector-Jacobian products of `<W(r, p, v), g>`.
#[derive(Clone, Debug)]
pub struct WarpGradients {
    pub v: Option<VectorField>,
    /// Packed `[theta..., t...]` gradient.
    pub rigid: Option<Vec<f64>>,
}

/// Computes the requested derivatives of `<warp_apply(r, p, v), g>` in one
/// pass over the output grid.
pub fn warp_vjp(
    r: &ScalarVolume,
    p: &RigidParams,
    v: &VectorField,
    g: &ScalarVolume,
    want_v: bool,
    want_rigid: bool,
) -> Result<WarpGradients> {
    check_shapes(r.shape(), v)?;
    r.shape().ensure_same(g.shape())?;
    let geo = Geometry::new(r.shape(), p)?;
    let rank = geo.rank;
    let (rd, gd) = (r.data(), g.data());

    // Per-voxel weighted image gradient at the sample point: g(y) * grad r(s(y)).
    let weighted = |i: usize| -> ([f64; 3], [f64; 3]) {
        let q = geo.q(geo.coords(i), geo.disp(Some(v), i));
        let gi = gd[i];
        if gi == 0.0 {
            return ([0.0; 3], q);
        }
        let gr = geo.gradient(rd, &geo.sample_point(&q));
        ([gi * gr[0], gi * gr[1], gi * gr[2]], q)
    };

    let v_grad = want_v.then(|| {
        let mut out = vec![0.0; geo.n() * rank];
        par::for_each_chunk_mut(&mut out, rank, |i, chunk| {
            let (wg, _) = weighted(i);
            let d = matvec(&geo.rot, &wg);
            if rank == 3 {
                chunk.copy_from_slice(&d);
            } else {
                chunk.copy_from_slice(&d[1..]);
            }
        });
        VectorField::from_parts_unchecked(r.shape().clone(), out)
    });

    let rigid_grad = want_rigid.then(|| {
        let acc = par::reduce(
            geo.n(),
            || [0.0f64; 6],
            |acc, i| {
                let (wg, q) = weighted(i);
                if wg == [0.0; 3] {
                    return;
                }
                for k in 0..3 {
                    let dq = matvec(&geo.d_rot_t[k], &q);
                    acc[k] += wg[0] * dq[0] + wg[1] * dq[1] + wg[2] * dq[2];
                }
                let rt = matvec(&geo.rot, &wg);
                acc[3] -= rt[0];
                acc[4] -= rt[1];
                acc[5] -= rt[2];
            },
            |a, b| a.iter_mut().zip(b).for_each(|(x, y)| *x += y),
        );
        if rank == 3 {
            acc.to_vec()
        } else {
            vec![acc[0], acc[4], acc[5]]
        }
    });

    Ok(WarpGradients {
        v: v_grad,
        rigid: rigid_grad,
    })
}

/// `d/dv <warp_apply(r, p, v), g>`.
pub fn warp_jacobian_v(
    r: &ScalarVolume,
    p: &RigidParams,
    v: &VectorField,
    g: &ScalarVolume,
) -> Result<VectorField> {
    Ok(warp_vjp(r, p, v, g, true, false)?.v.unwrap())
}

/// `d/d(theta, t) <warp_apply(r, p, v), g>`, packed as `[theta..., t...]`.
pub fn warp_jacobian_rigid(
    r: &ScalarVolume,
    p: &RigidParams,
    v: &VectorField,
    g: &ScalarVolume,
) -> Result<Vec<f64>> {
    Ok(warp_vjp(r, p, v, g, false, true)?.rigid.unwrap())
}

/// Result of [`invert_map`].
#[derive(Clone, Debug)]
pub struct InverseMap {
    /// Displacement `u` on the source grid: `x + u(x)` is the output-grid
    /// point that the warp sends to `x`.
    pub field: VectorField,
    /// `max_x |s(x + u(x)) - x|` in voxels after the last iteration.
    pub residual: f64,
    pub iterations: usize,
}

/// Default fixed-point iteration count of [`invert_map`].
pub const DEFAULT_INVERT_ITERS: usize = 20;

/// Inverts the sample-point map `y -> s(y)` by fixed-point iteration
/// `u <- -(s(x + u) - (x + u))` from `u = 0`.
///
/// With `u` in hand, `warp_apply(image, identity, u)` pulls an output-grid
/// image back onto the source grid, which is how a reference satisfying
/// `W(r1, p, v) ~ r2` is constructed.
pub fn invert_map(p: &RigidParams, v: &VectorField, iters: usize) -> Result<InverseMap> {
    let shape = v.shape().clone();
    let geo = Geometry::new(&shape, p)?;
    let rank = geo.rank;
    let n = geo.n();
    // Displacement components on the lifted grid, for interpolation at off-grid points.
    let comps: Vec<Vec<f64>> = (0..3)
        .map(|a| (0..n).map(|i| geo.disp(Some(v), i)[a]).collect())
        .collect();
    let map_disp = |z: [f64; 3]| -> [f64; 3] {
        let d = [
            geo.interpolate(&comps[0], &z),
            geo.interpolate(&comps[1], &z),
            geo.interpolate(&comps[2], &z),
        ];
        let s = geo.sample_point(&geo.q(z, d));
        [s[0] - z[0], s[1] - z[1], s[2] - z[2]]
    };
    let step = |u: &[[f64; 3]]| -> Vec<[f64; 3]> {
        par::map_collect(n, |i| {
            let x = geo.coords(i);
            let z = [x[0] + u[i][0], x[1] + u[i][1], x[2] + u[i][2]];
            let d = map_disp(z);
            [-d[0], -d[1], -d[2]]
        })
    };
    let residual_of = |u: &[[f64; 3]], next: &[[f64; 3]]| -> f64 {
        u.iter()
            .zip(next)
            .map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt())
            .fold(0.0, f64::max)
    };

    let mut u = vec![[0.0; 3]; n];
    let mut next = step(&u);
    let initial = residual_of(&u, &next);
    let mut residual = initial;
    for _ in 0..iters {
        u = next;
        next = step(&u);
        residual = residual_of(&u, &next);
        if !residual.is_finite() {
            return Err(Error::Divergence { residual });
        }
    }
    if residual > initial && residual > 1e-12 {
        return Err(Error::Divergence { residual });
    }
    let data = u
        .iter()
        .flat_map(|d| if rank == 3 { d.to_vec() } else { d[1..].to_vec() })
        .collect();
    Ok(InverseMap {
        field: VectorField::from_parts_unchecked(shape, data),
        residual,
        iterations: iters,
    })
}
