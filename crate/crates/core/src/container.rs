//! The `DMRI` binary container.
//!
//! Layout (little-endian):
//!
//! | bytes | content |
//! |-------|---------|
//! | 0..4  | magic `DMRI` |
//! | 4     | version (1) |
//! | 5     | dtype: 1 real f32, 2 complex f32 (re, im), 3 vector field f32, 4 mask u8 |
//! | 6     | rank (2 or 3) |
//! | 7     | reserved (0) |
//! | 8..   | `rank` x u64 dims |
//!
//! followed by the row-major payload (last axis fastest). Vector fields store
//! `rank` components per voxel. Values are stored as f32 and widened to f64
//! on read.

use std::fs;
use std::path::Path;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::kspace::{KSpaceMeasurement, SamplingMask};
use crate::volume::{ComplexVolume, GridShape, ScalarVolume, VectorField, VolumeKind};

pub const MAGIC: [u8; 4] = *b"DMRI";
pub const VERSION: u8 = 1;

pub const DTYPE_REAL: u8 = 1;
pub const DTYPE_COMPLEX: u8 = 2;
pub const DTYPE_FIELD: u8 = 3;
pub const DTYPE_MASK: u8 = 4;

/// Anything that can live in a container file.
#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Real(ScalarVolume),
    Complex(ComplexVolume),
    Field(VectorField),
    Mask(SamplingMask),
}

impl Payload {
    pub fn dtype(&self) -> u8 {
        match self {
            Payload::Real(_) => DTYPE_REAL,
            Payload::Complex(_) => DTYPE_COMPLEX,
            Payload::Field(_) => DTYPE_FIELD,
            Payload::Mask(_) => DTYPE_MASK,
        }
    }

    fn shape(&self) -> &GridShape {
        match self {
            Payload::Real(v) => v.shape(),
            Payload::Complex(v) => v.shape(),
            Payload::Field(v) => v.shape(),
            Payload::Mask(v) => v.shape(),
        }
    }
}

fn header(dtype: u8, dims: &[usize]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * dims.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&[VERSION, dtype, dims.len() as u8, 0]);
    for &d in dims {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    out
}

fn push_f32(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&(v as f32).to_le_bytes());
}

/// Serializes a payload.
pub fn encode(payload: &Payload) -> Vec<u8> {
    let mut out = header(payload.dtype(), payload.shape().dims());
    match payload {
        Payload::Real(v) => v.data().iter().for_each(|&x| push_f32(&mut out, x)),
        Payload::Complex(v) => v.data().iter().for_each(|z| {
            push_f32(&mut out, z.re);
            push_f32(&mut out, z.im);
        }),
        Payload::Field(v) => v.data().iter().for_each(|&x| push_f32(&mut out, x)),
        Payload::Mask(m) => out.extend(m.to_dense()),
    }
    out
}

/// Parsed header plus the raw payload bytes.
struct Raw<'a> {
    dtype: u8,
    dims: Vec<usize>,
    body: &'a [u8],
}

fn element_size(dtype: u8, rank: usize) -> usize {
    match dtype {
        DTYPE_REAL => 4,
        DTYPE_COMPLEX => 8,
        DTYPE_FIELD => 4 * rank,
        _ => 1,
    }
}

fn parse(bytes: &[u8]) -> Result<Raw<'_>> {
    if bytes.len() < 8 {
        return Err(Error::Truncated {
            expected: 8,
            found: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    if bytes[4] != VERSION {
        return Err(Error::UnsupportedVersion(bytes[4]));
    }
    let dtype = bytes[5];
    if !(DTYPE_REAL..=DTYPE_MASK).contains(&dtype) {
        return Err(Error::UnknownDtype(dtype));
    }
    let rank = bytes[6] as usize;
    if !(2..=3).contains(&rank) {
        return Err(Error::MalformedHeader(format!("rank {rank}")));
    }
    if bytes[7] != 0 {
        return Err(Error::MalformedHeader("reserved byte is not zero".into()));
    }
    let head = 8 + 8 * rank;
    if bytes.len() < head {
        return Err(Error::Truncated {
            expected: head,
            found: bytes.len(),
        });
    }
    let dims: Vec<usize> = bytes[8..head]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let count = dims
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .and_then(|n| n.checked_mul(element_size(dtype, rank)))
        .ok_or_else(|| Error::MalformedHeader(format!("dims {dims:?} overflow")))?;
    let expected = head + count;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::MalformedHeader(format!(
            "{} trailing bytes",
            bytes.len() - expected
        )));
    }
    Ok(Raw {
        dtype,
        dims,
        body: &bytes[head..],
    })
}

fn f32s(body: &[u8]) -> impl Iterator<Item = f64> + '_ {
    body.chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
}

/// Deserializes a payload.
pub fn decode(bytes: &[u8]) -> Result<Payload> {
    let raw = parse(bytes)?;
    let shape = GridShape::new(&raw.dims).map_err(|_| Error::MalformedHeader(format!("dims {:?}", raw.dims)))?;
    Ok(match raw.dtype {
        DTYPE_REAL => Payload::Real(ScalarVolume::generic(shape, f32s(raw.body).collect())?),
        DTYPE_COMPLEX => {
            let v: Vec<f64> = f32s(raw.body).collect();
            let data = v.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
            Payload::Complex(ComplexVolume::new(shape, data)?)
        }
        DTYPE_FIELD => Payload::Field(VectorField::new(shape, f32s(raw.body).collect())?),
        _ => {
            if let Some(b) = raw.body.iter().find(|&&b| b > 1) {
                return Err(Error::MalformedHeader(format!("mask byte {b} not in {{0, 1}}")));
            }
            let idx = raw
                .body
                .iter()
                .enumerate()
                .filter(|(_, &b)| b == 1)
                .map(|(i, _)| i)
                .collect();
            Payload::Mask(SamplingMask::from_indices(shape, idx)?)
        }
    })
}

pub fn write(path: impl AsRef<Path>, payload: &Payload) -> Result<()> {
    fs::write(path, encode(payload))?;
    Ok(())
}

pub fn read(path: impl AsRef<Path>) -> Result<Payload> {
    decode(&fs::read(path)?)
}

fn mismatch(expected: u8, found: &Payload) -> Error {
    Error::DtypeMismatch {
        expected,
        found: found.dtype(),
    }
}

/// Reads a real volume and tags it with `kind`.
pub fn read_real(path: impl AsRef<Path>, kind: VolumeKind) -> Result<ScalarVolume> {
    match read(path)? {
        Payload::Real(v) => v.with_kind(kind),
        other => Err(mismatch(DTYPE_REAL, &other)),
    }
}

pub fn read_complex(path: impl AsRef<Path>) -> Result<ComplexVolume> {
    match read(path)? {
        Payload::Complex(v) => Ok(v),
        other => Err(mismatch(DTYPE_COMPLEX, &other)),
    }
}

pub fn read_field(path: impl AsRef<Path>) -> Result<VectorField> {
    match read(path)? {
        Payload::Field(v) => Ok(v),
        other => Err(mismatch(DTYPE_FIELD, &other)),
    }
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<SamplingMask> {
    match read(path)? {
        Payload::Mask(v) => Ok(v),
        other => Err(mismatch(DTYPE_MASK, &other)),
    }
}

/// Checks that a decoded payload has the grid the caller expects.
pub fn expect_shape(payload_shape: &GridShape, expected: &GridShape) -> Result<()> {
    expected.ensure_same(payload_shape)
}

/// Writes measured values as a rank-2 complex array of dims `[n, 1]`.
pub fn write_measurement_values(path: impl AsRef<Path>, m: &KSpaceMeasurement) -> Result<()> {
    let mut out = header(DTYPE_COMPLEX, &[m.values().len(), 1]);
    for z in m.values() {
        push_f32(&mut out, z.re);
        push_f32(&mut out, z.im);
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads values written by [`write_measurement_values`] and pairs them with `mask`.
pub fn read_measurement(values_path: impl AsRef<Path>, mask: SamplingMask) -> Result<KSpaceMeasurement> {
    let bytes = fs::read(values_path)?;
    let raw = parse(&bytes)?;
    if raw.dtype != DTYPE_COMPLEX {
        return Err(Error::DtypeMismatch {
            expected: DTYPE_COMPLEX,
            found: raw.dtype,
        });
    }
    if raw.dims.len() != 2 || raw.dims[1] != 1 {
        return Err(Error::MalformedHeader(format!("value vector dims {:?}", raw.dims)));
    }
    let v: Vec<f64> = f32s(raw.body).collect();
    let values = v.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect();
    KSpaceMeasurement::new(mask, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complex_8x8() -> ComplexVolume {
        let s = GridShape::new(&[8, 8]).unwrap();
        let data = (0..64)
            .map(|i| {
                let a = ((i as f64) * 0.731).sin() as f32 as f64;
                let b = ((i as f64) * 1.37).cos() as f32 as f64;
                Complex64::new(a, b)
            })
            .collect();
        ComplexVolume::new(s, data).unwrap()
    }

    #[test]
    fn complex_round_trip_is_bitwise() {
        let x = complex_8x8();
        let bytes = encode(&Payload::Complex(x.clone()));
        assert_eq!(&bytes[0..8], &[0x44, 0x4D, 0x52, 0x49, 1, 2, 2, 0]);
        assert_eq!(bytes.len(), 8 + 16 + 64 * 8);
        let back = decode(&bytes).unwrap();
        assert_eq!(back, Payload::Complex(x));
        assert_eq!(encode(&back), bytes);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode(&Payload::Complex(complex_8x8()));
        bytes[0..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode(&bytes), Err(Error::BadMagic(m)) if &m == b"XXXX"));
    }

    #[test]
    fn version_and_dtype_errors() {
        let mut bytes = encode(&Payload::Complex(complex_8x8()));
        bytes[4] = 2;
        assert!(matches!(decode(&bytes), Err(Error::UnsupportedVersion(2))));
        bytes[4] = 1;
        bytes[5] = 9;
        assert!(matches!(decode(&bytes), Err(Error::UnknownDtype(9))));
    }

    #[test]
    fn truncated_payload() {
        // Header declares 10x10 = 100 voxels, only 50 present.
        let mut bytes = header(DTYPE_REAL, &[10, 10]);
        bytes.extend(std::iter::repeat_n(0u8, 50 * 4));
        assert!(matches!(
            decode(&bytes),
            Err(Error::Truncated { expected: 424, found: 224 })
        ));
    }

    #[test]
    fn typed_read_rejects_wrong_dtype() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.dmri");
        write(&p, &Payload::Complex(complex_8x8())).unwrap();
        assert!(matches!(
            read_real(&p, VolumeKind::Generic),
            Err(Error::DtypeMismatch { expected: 1, found: 2 })
        ));
        let s = GridShape::new(&[4, 4]).unwrap();
        let x = read_complex(&p).unwrap();
        assert!(matches!(
            expect_shape(x.shape(), &s),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn measurement_values_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let s = GridShape::new(&[4, 4]).unwrap();
        let mask = SamplingMask::from_indices(s, vec![0, 5, 7]).unwrap();
        let m = KSpaceMeasurement::new(
            mask.clone(),
            vec![Complex64::new(1.0, 2.0), Complex64::new(-0.5, 0.25), Complex64::new(0.0, 3.0)],
        )
        .unwrap();
        let p = dir.path().join("d.dmri");
        write_measurement_values(&p, &m).unwrap();
        assert_eq!(read_measurement(&p, mask).unwrap(), m);
    }
}
