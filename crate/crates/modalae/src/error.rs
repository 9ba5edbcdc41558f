//! Crate-wide error type.

use crate::params::ParamSet;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    /// Matrix / parameter shape disagreement.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Malformed input file (bad magic, ragged rows, truncated payload, ...).
    #[error("format error: {0}")]
    Format(String),

    /// A label field that is not an integer within tolerance.
    #[error("label error: {0}")]
    Label(String),

    /// Image/label files disagree on sample count.
    #[error("mismatch error: {0}")]
    Mismatch(String),

    /// Split spec asks for more samples than the dataset has.
    #[error("size error: {0}")]
    Size(String),

    /// Inconsistent configuration (variant vs. hyperparameters, bad keys, ...).
    #[error("config error: {0}")]
    Config(String),

    /// Non-finite value where a finite one is required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Column-norm scaling requested on a zero column.
    #[error("degenerate-column error: {0}")]
    DegenerateColumn(String),

    /// Matrix does not have the full column rank an operation requires.
    #[error("rank error: {0}")]
    Rank(String),

    /// Training produced a non-finite loss or parameter value.
    /// Carries the last finite parameter snapshot.
    #[error("divergence at epoch {epoch}, batch {batch}")]
    Divergence {
        epoch: usize,
        batch: usize,
        last_params: Box<ParamSet>,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}
