//! The joint rigid + deformation estimator.
//!
//! The objective is
//!
//! ```text
//! || d2 - S F W(r1_hat, theta, t, v) exp(i phi2_hat) ||_2^2 + lambda R(v)
//! ```
//!
//! minimized by cyclic block coordinate descent: a box-constrained
//! quasi-Newton block for `(theta, t)` and a Barzilai-Borwein block for `v`.

pub mod bb;
pub mod cost;
pub mod lbfgsb;
pub mod regularizer;
pub mod solve;

pub use bb::{bb_minimize, BbOptions, BbResult, BbStop};
pub use cost::{default_lambda, CostGradient, DeltaProblem, LAMBDA_RATIO};
pub use lbfgsb::{rigid_minimize, LbfgsbOptions, LbfgsbResult, LbfgsbStop};
pub use regularizer::{regularizer, Regularizer};
pub use solve::{solve_delta, Block, BlockReport, DeltaSolution, SolveOptions};
