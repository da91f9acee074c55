//! Array types shared by every operator: grid geometry, complex and real
//! volumes, and per-voxel displacement fields.
//!
//! All volumes are stored row-major with the last axis varying fastest.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Grid dimensions of a 2D or 3D volume.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct GridShape(Vec<usize>);

impl GridShape {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if !(2..=3).contains(&dims.len()) || dims.iter().any(|&d| d < 2) {
            return Err(Error::InvalidShape(dims.to_vec()));
        }
        dims.iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::InvalidShape(dims.to_vec()))?;
        Ok(Self(dims.to_vec()))
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    /// Total voxel count N.
    pub fn len(&self) -> usize {
        self.0.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major strides (last axis has stride 1).
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.rank()];
        for a in (0..self.rank().saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * self.0[a + 1];
        }
        strides
    }

    /// Multi-index of a linear voxel index.
    pub fn unravel(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.rank()];
        for a in (0..self.rank()).rev() {
            out[a] = index % self.0[a];
            index /= self.0[a];
        }
        out
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.0).fold(0, |acc, (&i, &d)| acc * d + i)
    }

    /// Geometric center `(dims - 1) / 2` per axis.
    pub fn center(&self) -> Vec<f64> {
        self.0.iter().map(|&d| (d as f64 - 1.0) / 2.0).collect()
    }

    pub fn smallest_dim(&self) -> usize {
        *self.0.iter().min().unwrap()
    }

    pub(crate) fn ensure_same(&self, other: &GridShape) -> Result<()> {
        if self != other {
            return Err(Error::ShapeMismatch {
                expected: self.0.clone(),
                found: other.0.clone(),
            });
        }
        Ok(())
    }

    /// Parses `AxB` or `AxBxC`.
    pub fn parse(text: &str) -> Result<Self> {
        let dims = text
            .split(['x', 'X'])
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::InvalidArgument(format!("cannot parse shape {text:?}")))?;
        Self::new(&dims)
    }
}

impl TryFrom<Vec<usize>> for GridShape {
    type Error = Error;
    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Self::new(&dims)
    }
}

impl From<GridShape> for Vec<usize> {
    fn from(shape: GridShape) -> Self {
        shape.0
    }
}

impl std::fmt::Display for GridShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        f.write_str(&parts.join("x"))
    }
}

/// Complex-valued image or k-space array.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexVolume {
    shape: GridShape,
    data: Vec<Complex64>,
}

impl ComplexVolume {
    pub fn new(shape: GridShape, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::LengthMismatch {
                expected: shape.len(),
                found: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(format!("complex voxel {i}")));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: GridShape) -> Self {
        let n = shape.len();
        Self {
            shape,
            data: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// Promotes a real volume to complex with zero imaginary part.
    pub fn from_real(r: &ScalarVolume) -> Self {
        Self {
            shape: r.shape.clone(),
            data: r.data.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }

    pub(crate) fn from_parts_unchecked(shape: GridShape, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(shape.len(), data.len());
        Self { shape, data }
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn norm_sqr(&self) -> f64 {
        par::sum_by(self.data.len(), |i| self.data[i].norm_sqr())
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Real part of the Hermitian inner product `<self, other>`.
    pub fn dot_re(&self, other: &ComplexVolume) -> f64 {
        par::sum_by(self.data.len(), |i| {
            let (a, b) = (self.data[i], other.data[i]);
            a.re * b.re + a.im * b.im
        })
    }

    pub fn real_part(&self) -> ScalarVolume {
        ScalarVolume::from_parts_unchecked(
            self.shape.clone(),
            self.data.iter().map(|z| z.re).collect(),
            VolumeKind::Generic,
        )
    }

    pub fn imag_part(&self) -> ScalarVolume {
        ScalarVolume::from_parts_unchecked(
            self.shape.clone(),
            self.data.iter().map(|z| z.im).collect(),
            VolumeKind::Generic,
        )
    }

    pub fn from_re_im(re: &ScalarVolume, im: &ScalarVolume) -> Result<Self> {
        re.shape.ensure_same(&im.shape)?;
        let data = re
            .data
            .iter()
            .zip(&im.data)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect();
        Ok(Self::from_parts_unchecked(re.shape.clone(), data))
    }

    /// Point-wise modulus.
    pub fn magnitude(&self) -> ScalarVolume {
        ScalarVolume::from_parts_unchecked(
            self.shape.clone(),
            self.data.iter().map(|z| z.norm()).collect(),
            VolumeKind::Magnitude,
        )
    }

    /// Point-wise phase in (-pi, pi], with arg(0) = 0.
    pub fn phase(&self) -> ScalarVolume {
        ScalarVolume::from_parts_unchecked(
            self.shape.clone(),
            self.data.iter().map(|&z| wrapped_arg(z)).collect(),
            VolumeKind::Phase,
        )
    }
}

/// Interpretation tag of a real volume.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolumeKind {
    Magnitude,
    Phase,
    Generic,
}

/// Real-valued magnitude, phase or generic image.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarVolume {
    shape: GridShape,
    data: Vec<f64>,
    kind: VolumeKind,
}

impl ScalarVolume {
    pub fn new(shape: GridShape, data: Vec<f64>, kind: VolumeKind) -> Result<Self> {
        if data.len() != shape.len() {
            return Err(Error::LengthMismatch {
                expected: shape.len(),
                found: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("real voxel {i}")));
        }
        match kind {
            VolumeKind::Magnitude => {
                if let Some(i) = data.iter().position(|&v| v < 0.0) {
                    return Err(Error::NegativeMagnitude {
                        index: i,
                        value: data[i],
                    });
                }
            }
            VolumeKind::Phase => {
                if let Some(i) = data.iter().position(|&v| v <= -PI || v > PI) {
                    return Err(Error::InvalidArgument(format!(
                        "phase {} at voxel {i} outside (-pi, pi]",
                        data[i]
                    )));
                }
            }
            VolumeKind::Generic => {}
        }
        Ok(Self { shape, data, kind })
    }

    pub fn generic(shape: GridShape, data: Vec<f64>) -> Result<Self> {
        Self::new(shape, data, VolumeKind::Generic)
    }

    pub fn zeros(shape: GridShape, kind: VolumeKind) -> Self {
        let n = shape.len();
        Self {
            shape,
            data: vec![0.0; n],
            kind,
        }
    }

    pub(crate) fn from_parts_unchecked(shape: GridShape, data: Vec<f64>, kind: VolumeKind) -> Self {
        debug_assert_eq!(shape.len(), data.len());
        Self { shape, data, kind }
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn kind(&self) -> VolumeKind {
        self.kind
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Re-tags the volume, validating the new kind's invariants.
    pub fn with_kind(self, kind: VolumeKind) -> Result<Self> {
        Self::new(self.shape, self.data, kind)
    }

    pub fn norm(&self) -> f64 {
        par::sum_by(self.data.len(), |i| self.data[i] * self.data[i]).sqrt()
    }

    pub fn dot(&self, other: &ScalarVolume) -> f64 {
        par::sum_by(self.data.len(), |i| self.data[i] * other.data[i])
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `self - other` as a generic volume.
    pub fn sub(&self, other: &ScalarVolume) -> Result<ScalarVolume> {
        self.shape.ensure_same(&other.shape)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Self::from_parts_unchecked(self.shape.clone(), data, VolumeKind::Generic))
    }

    pub fn scaled(&self, factor: f64) -> ScalarVolume {
        let kind = if factor >= 0.0 && self.kind == VolumeKind::Magnitude {
            VolumeKind::Magnitude
        } else {
            VolumeKind::Generic
        };
        Self::from_parts_unchecked(
            self.shape.clone(),
            self.data.iter().map(|v| v * factor).collect(),
            kind,
        )
    }
}

/// Per-voxel displacement, `rank` components interleaved per voxel, in voxel
/// units. Interpreted as a backward (pull) displacement on the output grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    shape: GridShape,
    data: Vec<f64>,
}

impl VectorField {
    pub fn new(shape: GridShape, data: Vec<f64>) -> Result<Self> {
        let expected = shape.len() * shape.rank();
        if data.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                found: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("vector component {i}")));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: GridShape) -> Self {
        let n = shape.len() * shape.rank();
        Self {
            shape,
            data: vec![0.0; n],
        }
    }

    pub(crate) fn from_parts_unchecked(shape: GridShape, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.len() * shape.rank(), data.len());
        Self { shape, data }
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.rank()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn at(&self, voxel: usize) -> &[f64] {
        let c = self.rank();
        &self.data[voxel * c..(voxel + 1) * c]
    }

    pub fn dot(&self, other: &VectorField) -> f64 {
        par::sum_by(self.data.len(), |i| self.data[i] * other.data[i])
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Euclidean length of the displacement at each voxel.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.data
            .chunks_exact(self.rank())
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect()
    }
}

/// `arg(z)` mapped into (-pi, pi], with arg(0) = 0.
pub fn wrapped_arg(z: Complex64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        return 0.0;
    }
    let a = z.im.atan2(z.re);
    if a <= -PI {
        PI
    } else {
        a
    }
}

/// Splits a complex volume into magnitude and phase.
pub fn to_polar(x: &ComplexVolume) -> (ScalarVolume, ScalarVolume) {
    (x.magnitude(), x.phase())
}

/// Builds `r * exp(i phi)` element-wise.
pub fn from_polar(r: &ScalarVolume, phi: &ScalarVolume) -> Result<ComplexVolume> {
    r.shape.ensure_same(&phi.shape)?;
    if let Some(i) = r.data.iter().position(|&v| v < 0.0) {
        return Err(Error::NegativeMagnitude {
            index: i,
            value: r.data[i],
        });
    }
    let data = r
        .data
        .iter()
        .zip(&phi.data)
        .map(|(&m, &p)| Complex64::from_polar(m, p))
        .collect();
    Ok(ComplexVolume::from_parts_unchecked(r.shape.clone(), data))
}
