//! Separable multi-level orthonormal Daubechies-4 (4-tap) wavelet transform
//! with periodic boundaries.
//!
//! Coefficients are stored in the usual Mallat layout: after each level the
//! approximation occupies the leading half of every axis of the current
//! sub-box, and the next level recurses into it.

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::par;
use crate::volume::{ComplexVolume, GridShape};

const S3: f64 = 1.732_050_807_568_877_2;

/// Low-pass analysis filter.
pub fn lowpass() -> [f64; 4] {
    let n = 4.0 * std::f64::consts::SQRT_2;
    [(1.0 + S3) / n, (3.0 + S3) / n, (3.0 - S3) / n, (1.0 - S3) / n]
}

/// High-pass analysis filter, `g_k = (-1)^k h_{3-k}`.
pub fn highpass() -> [f64; 4] {
    let h = lowpass();
    [h[3], -h[2], h[1], -h[0]]
}

/// Checks that every axis is divisible by `2^levels`.
pub fn check_levels(shape: &GridShape, levels: usize) -> Result<()> {
    let f = 1usize.checked_shl(levels as u32).unwrap_or(0);
    if f == 0 || shape.dims().iter().any(|&d| d % f != 0) {
        return Err(Error::InvalidArgument(format!(
            "grid {shape} is not divisible by 2^{levels} on every axis"
        )));
    }
    Ok(())
}

fn analyze(line: &[Complex64], out: &mut [Complex64]) {
    let (h, g) = (lowpass(), highpass());
    let n = line.len();
    let half = n / 2;
    for i in 0..half {
        let mut a = Complex64::new(0.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        for k in 0..4 {
            let x = line[(2 * i + k) % n];
            a += x * h[k];
            d += x * g[k];
        }
        out[i] = a;
        out[half + i] = d;
    }
}

fn synthesize(coef: &[Complex64], out: &mut [Complex64]) {
    let (h, g) = (lowpass(), highpass());
    let n = coef.len();
    let half = n / 2;
    out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
    for i in 0..half {
        let (a, d) = (coef[i], coef[half + i]);
        for k in 0..4 {
            out[(2 * i + k) % n] += a * h[k] + d * g[k];
        }
    }
}

/// Applies `f` to every line along `axis` inside the leading sub-box `sub`.
fn for_lines(
    data: &mut [Complex64],
    shape: &GridShape,
    sub: &[usize],
    axis: usize,
    f: fn(&[Complex64], &mut [Complex64]),
) {
    let strides = shape.strides();
    let len = sub[axis];
    let stride = strides[axis];
    // Enumerate line start offsets: all sub-box positions with index 0 on `axis`.
    let mut counts = sub.to_vec();
    counts[axis] = 1;
    let n_lines: usize = counts.iter().product();
    let starts: Vec<usize> = (0..n_lines)
        .map(|mut l| {
            let mut off = 0;
            for a in (0..sub.len()).rev() {
                off += (l % counts[a]) * strides[a];
                l /= counts[a];
            }
            off
        })
        .collect();
    let src: &[Complex64] = data;
    let lines = par::map_collect(n_lines, |l| {
        let line: Vec<Complex64> = (0..len).map(|k| src[starts[l] + k * stride]).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); len];
        f(&line, &mut out);
        out
    });
    for (start, line) in starts.iter().zip(lines) {
        for (k, z) in line.into_iter().enumerate() {
            data[start + k * stride] = z;
        }
    }
}

/// Forward transform, `levels` levels, applied to real and imaginary parts alike.
pub fn dwt_forward(x: &ComplexVolume, levels: usize) -> Result<ComplexVolume> {
    check_levels(x.shape(), levels)?;
    let shape = x.shape().clone();
    let mut data = x.data().to_vec();
    let mut sub = shape.dims().to_vec();
    for _ in 0..levels {
        for axis in 0..shape.rank() {
            for_lines(&mut data, &shape, &sub, axis, analyze);
        }
        sub.iter_mut().for_each(|d| *d /= 2);
    }
    Ok(ComplexVolume::from_parts_unchecked(shape, data))
}

/// Inverse of [`dwt_forward`] (and its adjoint, the transform being orthonormal).
pub fn dwt_inverse(c: &ComplexVolume, levels: usize) -> Result<ComplexVolume> {
    check_levels(c.shape(), levels)?;
    let shape = c.shape().clone();
    let mut data = c.data().to_vec();
    let f = 1usize << levels;
    for l in (0..levels).rev() {
        let sub: Vec<usize> = shape.dims().iter().map(|&d| d / f * (1 << (levels - l))).collect();
        for axis in (0..shape.rank()).rev() {
            for_lines(&mut data, &shape, &sub, axis, synthesize);
        }
    }
    Ok(ComplexVolume::from_parts_unchecked(shape, data))
}

/// True for coefficients that belong to the coarsest approximation band.
pub fn is_approximation(shape: &GridShape, levels: usize, index: usize) -> bool {
    let f = 1usize << levels;
    shape
        .unravel(index)
        .iter()
        .zip(shape.dims())
        .all(|(&i, &d)| i < d / f)
}
