use std::path::PathBuf;

use crate::complex::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid complex: {}", format_violations(.0))]
    InvalidComplex(Vec<Violation>),

    #[error("degree {degree} out of range for a complex of dimension {dimension}")]
    DegreeOutOfRange { degree: usize, dimension: usize },

    #[error("chain length {found} does not match the {expected} cells of degree {degree}")]
    ChainLength { degree: usize, expected: usize, found: usize },

    #[error("matrix is not symmetric: |a[{row},{col}] - a[{col},{row}]| = {gap:e}")]
    NotSymmetric { row: usize, col: usize, gap: f64 },

    #[error("matrix has a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("eigenvalue {value:e} is negative beyond tolerance {tolerance:e}")]
    NegativeEigenvalue { value: f64, tolerance: f64 },

    #[error(
        "dimension mismatch: Hodge-Laplacian dimensions must be equal ({left} vs {right}); \
         pass --pad to embed the smaller one"
    )]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("coupling violates the marginals by {0:e}")]
    MarginalViolation(f64),

    #[error("no bandwidth in {steps} halving steps from sigma0 = {sigma0} gives a PSD Gram matrix; increase max_steps")]
    BandwidthSearchExhausted { sigma0: f64, steps: usize },

    #[error("truncation rank {requested} exceeds the {available} strictly positive eigenvalues")]
    RankTooLarge { requested: usize, available: usize },

    #[error("matrix is not positive definite even after jitter")]
    NotPositiveDefinite,

    #[error("training diverged at epoch {epoch}: objective is {value}")]
    Diverged { epoch: usize, value: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for failures caused by bad input rather than numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidComplex(_)
                | Error::DegreeOutOfRange { .. }
                | Error::ChainLength { .. }
                | Error::NotSquare { .. }
                | Error::DimensionMismatch { .. }
                | Error::InvalidMeasure(_)
                | Error::InvalidArgument(_)
                | Error::Parse(_)
                | Error::Json { .. }
                | Error::MarginalViolation(_)
                | Error::RankTooLarge { .. }
        )
    }
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}
