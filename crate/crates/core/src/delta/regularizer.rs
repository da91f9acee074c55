use serde::{Deserialize, Serialize};

use crate::par;
use crate::volume::VectorField;

/// Smoothness penalty on the displacement field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Regularizer {
    /// `||grad v||_2^2`: squared forward differences, Neumann boundary.
    SquaredGradient,
    /// `sqrt(||grad v||_2^2 + eps^2)`, a differentiable stand-in for the
    /// unsquared gradient norm.
    SmoothedNorm { eps: f64 },
}

impl Default for Regularizer {
    fn default() -> Self {
        Regularizer::SquaredGradient
    }
}

impl Regularizer {
    pub fn value(&self, v: &VectorField) -> f64 {
        self.finish(squared_gradient_value(v))
    }

    /// Value and gradient.
    pub fn eval(&self, v: &VectorField) -> (f64, VectorField) {
        let (sq, grad) = squared_gradient(v);
        match *self {
            Regularizer::SquaredGradient => (sq, grad),
            Regularizer::SmoothedNorm { eps } => {
                let val = (sq + eps * eps).sqrt();
                let scale = 0.5 / val;
                let mut grad = grad;
                grad.data_mut().iter_mut().for_each(|g| *g *= scale);
                (val, grad)
            }
        }
    }

    fn finish(&self, sq: f64) -> f64 {
        match *self {
            Regularizer::SquaredGradient => sq,
            Regularizer::SmoothedNorm { eps } => (sq + eps * eps).sqrt(),
        }
    }
}

/// Value of the default regularizer with its gradient.
pub fn regularizer(v: &VectorField) -> (f64, VectorField) {
    Regularizer::SquaredGradient.eval(v)
}

fn squared_gradient_value(v: &VectorField) -> f64 {
    let shape = v.shape();
    let dims = shape.dims().to_vec();
    let strides = shape.strides();
    let c = shape.rank();
    let data = v.data();
    par::sum_by(shape.len(), |i| {
        let idx = shape.unravel(i);
        let mut acc = 0.0;
        for a in 0..dims.len() {
            if idx[a] + 1 < dims[a] {
                let j = i + strides[a];
                for k in 0..c {
                    let d = data[j * c + k] - data[i * c + k];
                    acc += d * d;
                }
            }
        }
        acc
    })
}

fn squared_gradient(v: &VectorField) -> (f64, VectorField) {
    let shape = v.shape();
    let dims = shape.dims().to_vec();
    let strides = shape.strides();
    let c = shape.rank();
    let data = v.data();
    let mut grad = VectorField::zeros(shape.clone());
    par::for_each_chunk_mut(grad.data_mut(), c, |i, out| {
        let idx = shape.unravel(i);
        for a in 0..dims.len() {
            if idx[a] + 1 < dims[a] {
                let j = i + strides[a];
                for k in 0..c {
                    out[k] -= 2.0 * (data[j * c + k] - data[i * c + k]);
                }
            }
            if idx[a] > 0 {
                let j = i - strides[a];
                for k in 0..c {
                    out[k] += 2.0 * (data[i * c + k] - data[j * c + k]);
                }
            }
        }
    });
    (squared_gradient_value(v), grad)
}
