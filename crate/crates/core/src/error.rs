use thiserror::Error;

use crate::sdp::SdpError;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("entry count {got} does not match shape {rows}x{cols}")]
    Shape { rows: usize, cols: usize, got: usize },

    #[error("non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),

    #[error("not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),

    #[error("not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("trace is not 1 (got {0})")]
    InvalidTrace(f64),

    #[error("dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("no admissible index pair: fewer than two populated diagonal entries")]
    NoAdmissiblePair,

    #[error("subset budget exceeded: {needed} subsets > {budget}")]
    SubsetBudget { needed: u128, budget: u64 },

    #[error("clique violation: ({0}, {1}) share a component but are not an edge")]
    CliqueViolation(usize, usize),

    #[error("block {block} is not rank one (eigenvalue ratio {ratio:e})")]
    RankViolation { block: usize, ratio: f64 },

    #[error("completeness violated: max deviation of sum K^dag K from identity is {0:e}")]
    Completeness(f64),

    #[error("monomial structure violated at Kraus {0}")]
    NonMonomial(usize),

    #[error("Kraus {index} has shape {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    KrausShape {
        index: usize,
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },

    #[error("instrument has no outcome with positive probability")]
    DegenerateInstrument,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Sdp(#[from] SdpError),
}

pub type Result<T> = std::result::Result<T, Error>;
