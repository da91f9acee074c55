//! Reference reconstructions the joint estimator is compared against.

pub mod dwt;
pub mod tcs;

pub use dwt::{dwt_forward, dwt_inverse};
pub use tcs::{
    default_tcs_lambdas, soft_threshold, SUPPORT_THRESHOLD, support_weights, tcs_solve, AdmmOptions, TcsProblem, TcsSolution,
};

use crate::fft::dft_inverse;
use crate::kspace::{zero_fill, KSpaceMeasurement};
use crate::volume::ScalarVolume;

/// Magnitude of the zero-filled inverse DFT.
pub fn z_idft(m: &KSpaceMeasurement) -> ScalarVolume {
    dft_inverse(&zero_fill(m)).magnitude()
}
