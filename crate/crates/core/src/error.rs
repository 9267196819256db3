use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// `unit` is `None` for the pooled (within) design.
    #[error("rank-deficient design for {}", match .unit { Some(i) => format!("unit {i}"), None => "pooled within regression".to_string() })]
    RankDeficient { unit: Option<usize> },

    #[error("unit {0} has a degenerate (numerically zero) residual vector")]
    DegenerateUnit(usize),

    #[error("basis columns are not orthonormal (max deviation {0:.3e})")]
    InvalidBasis(f64),

    #[error("residuals were fitted without retaining per-unit bases")]
    MissingBases,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unbalanced panel: {0}")]
    Unbalanced(String),

    #[error("non-numeric value {value:?} in column {column} at line {line}")]
    NonNumeric { line: usize, column: String, value: String },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
