use std::io;

use thiserror::Error;

/// Errors raised by the estimator, its operators and the file container.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid shape {0:?}: need 2 or 3 axes, each of length >= 2")]
    InvalidShape(Vec<usize>),
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("data length {found} does not match shape (expected {expected})")]
    LengthMismatch { expected: usize, found: usize },
    #[error("negative magnitude {value} at voxel {index}")]
    NegativeMagnitude { index: usize, value: f64 },
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("map inversion diverged (last residual {residual:.3e} voxel)")]
    Divergence { residual: f64 },
    #[error("scenario construction residual {residual:.3e} exceeds {limit:.1e}")]
    ConstructionResidual { residual: f64, limit: f64 },
    #[error("normalized error undefined: reference equals ground truth")]
    ZeroDenominator,

    #[error("bad magic bytes {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown dtype code {0}")]
    UnknownDtype(u8),
    #[error("container dtype mismatch: expected {expected}, found {found}")]
    DtypeMismatch { expected: u8, found: u8 },
    #[error("truncated container: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("malformed container header: {0}")]
    MalformedHeader(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
