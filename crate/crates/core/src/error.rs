//! Error type shared by all simulation and analysis routines.

use thiserror::Error;

/// Errors surfaced by the simulator.
#[derive(Debug, Error)]
pub enum Error {
    /// An input that must be finite was NaN or infinite.
    #[error("{name} must be finite (got {value})")]
    NonFinite { name: &'static str, value: f64 },

    /// A parameter violated its documented bound.
    #[error("{name} must satisfy {constraint} (got {value})")]
    OutOfRange {
        name: &'static str,
        constraint: &'static str,
        value: f64,
    },

    /// An input collection was empty where at least one element is required.
    #[error("{0} must not be empty")]
    EmptyInput(&'static str),

    /// Paired quadrature lists of different lengths.
    #[error("mismatched quadrature lengths: xa has {xa}, xb has {xb}")]
    LengthMismatch { xa: usize, xb: usize },

    /// The unperturbed modulator output is too close to zero for a gain
    /// factor to be meaningful.
    #[error("singular operating point: baseline intensity {baseline:.3e} below floor {floor:.3e}")]
    SingularOperatingPoint { baseline: f64, floor: f64 },

    /// All regressor samples are zero; the slope estimator is undefined.
    #[error("degenerate regressor: sum of squared Alice quadratures is zero")]
    DegenerateRegressor,

    /// The fitted slope is exactly zero, so no transmissivity can be inferred.
    #[error("zero transmissivity estimate (t_hat = 0)")]
    ZeroTransmissivity,

    /// The confidence interval swallowed the whole slope estimate.
    #[error("worst-case bound collapse: t_hat - delta_t = {0:.6e} is not positive")]
    BoundCollapse(f64),

    /// Covariance-matrix parameters outside the physical region.
    #[error("nonphysical covariance parameters: {0}")]
    NonphysicalCovariance(String),

    /// Malformed quadrature batch file.
    #[error("batch parse error at line {line}: {message}")]
    BatchParse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite { name, value })
    }
}
