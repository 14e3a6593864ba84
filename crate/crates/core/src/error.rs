use alloc::boxed::Box;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unit index {index} out of range for {len} units")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("jacobian row for unit {unit} is degenerate: input coincides with its prototype")]
    DegenerateRow { unit: usize },

    #[error("radial direction undefined: input coincides with prototype {unit}")]
    UndefinedRadial { unit: usize },

    #[error("invalid amplitude scale {0}: must be >= 1, and exactly 1 in one dimension")]
    InvalidAmplitude(f64),

    #[error("index set is empty")]
    EmptySubset,

    #[error("anchor {0} is not part of the selected subset")]
    AnchorNotInSubset(usize),

    #[error("at least two units are needed to build an anchored system")]
    SubsetTooSmall,

    #[error("matrix is not symmetric positive definite")]
    NotPositiveDefinite,

    #[error("trust radius resolved to zero: input sits on its best-matching prototype")]
    ZeroTrustRadius,

    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),

    #[error("data set is empty")]
    EmptyData,

    #[error("non-finite value in row {row}")]
    NonFinite { row: usize },

    #[error("lattice {rows}x{cols} does not match {units} prototypes")]
    LatticeMismatch {
        rows: usize,
        cols: usize,
        units: usize,
    },

    #[error("labels ({labels}) do not align with data rows ({rows})")]
    LabelMismatch { labels: usize, rows: usize },

    #[error("step {step} failed: {source}")]
    Step { step: usize, source: Box<Error> },
}
