//! Unitary multi-dimensional discrete Fourier transform.
//!
//! Both directions are scaled by `1/sqrt(N)`, so the forward transform is an
//! orthonormal operator and its adjoint equals its inverse.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::Result;
use crate::par;
use crate::volume::{ComplexVolume, GridShape};

/// Pre-planned transforms for one grid shape.
#[derive(Clone)]
pub struct DftPlan {
    shape: GridShape,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    scale: f64,
}

impl std::fmt::Debug for DftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DftPlan").field("shape", &self.shape).finish()
    }
}

impl DftPlan {
    pub fn new(shape: &GridShape) -> Self {
        let mut planner = FftPlanner::new();
        let forward = shape.dims().iter().map(|&n| planner.plan_fft_forward(n)).collect();
        let inverse = shape.dims().iter().map(|&n| planner.plan_fft_inverse(n)).collect();
        Self {
            shape: shape.clone(),
            forward,
            inverse,
            scale: 1.0 / (shape.len() as f64).sqrt(),
        }
    }

    pub fn shape(&self) -> &GridShape {
        &self.shape
    }

    pub fn forward(&self, x: &ComplexVolume) -> Result<ComplexVolume> {
        self.shape.ensure_same(x.shape())?;
        let mut out = x.clone();
        self.forward_in_place(out.data_mut());
        Ok(out)
    }

    pub fn inverse(&self, d: &ComplexVolume) -> Result<ComplexVolume> {
        self.shape.ensure_same(d.shape())?;
        let mut out = d.clone();
        self.inverse_in_place(out.data_mut());
        Ok(out)
    }

    /// Forward transform of a raw row-major buffer of this plan's shape.
    pub fn forward_in_place(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        assert_eq!(data.len(), self.shape.len());
        let dims = self.shape.dims();
        for (axis, plan) in plans.iter().enumerate() {
            transform_axis(data, dims, axis, plan.as_ref());
        }
        let s = self.scale;
        par::for_each_mut(data, |_, z| *z *= s);
    }
}

fn transform_axis(data: &mut [Complex64], dims: &[usize], axis: usize, plan: &dyn Fft<f64>) {
    let n = dims[axis];
    let inner: usize = dims[axis + 1..].iter().product();
    let zero = Complex64::new(0.0, 0.0);
    let scratch_len = plan.get_inplace_scratch_len();
    let init = || vec![zero; scratch_len];

    if inner == 1 {
        par::for_each_chunk_mut_init(data, n, init, |scratch, _, line| {
            plan.process_with_scratch(line, scratch);
        });
        return;
    }

    // Gather strided lines into a contiguous buffer, transform, scatter back.
    let block = n * inner;
    let mut lines = vec![zero; data.len()];
    {
        let src: &[Complex64] = data;
        par::for_each_chunk_mut_init(&mut lines, n, init, |scratch, l, line| {
            let (o, j) = (l / inner, l % inner);
            let base = o * block + j;
            for (k, z) in line.iter_mut().enumerate() {
                *z = src[base + k * inner];
            }
            plan.process_with_scratch(line, scratch);
        });
    }
    let lines = &lines;
    par::for_each_chunk_mut(data, block, |o, out| {
        for k in 0..n {
            for j in 0..inner {
                out[k * inner + j] = lines[(o * inner + j) * n + k];
            }
        }
    });
}

/// Unitary forward DFT.
pub fn dft_forward(x: &ComplexVolume) -> ComplexVolume {
    DftPlan::new(x.shape()).forward(x).expect("plan built for this shape")
}

/// Unitary inverse DFT.
pub fn dft_inverse(d: &ComplexVolume) -> ComplexVolume {
    DftPlan::new(d.shape()).inverse(d).expect("plan built for this shape")
}
