//! Direct estimation of longitudinal MRI change.
//!
//! Given a reference magnitude image and strongly sub-sampled k-space data of
//! a follow-up scan, [`delta::solve_delta`] estimates a rigid transform and a
//! local deformation field that warp the reference onto the follow-up,
//! without reconstructing the follow-up image first. Two baselines
//! ([`baselines::z_idft`] and [`baselines::tcs_solve`]) and a simulation
//! harness ([`sim`]) are included for comparison.
//!
//! Inner loops run data-parallel through rayon when the `parallel` feature
//! (on by default) is enabled; reductions are chunked deterministically so
//! results do not depend on the thread count.

pub mod baselines;
pub mod container;
pub mod delta;
pub mod error;
pub mod fft;
pub mod kspace;
pub mod par;
pub mod sim;
pub mod volume;
pub mod warp;

pub use error::{Error, Result};
pub use rustfft::num_complex::Complex64;
