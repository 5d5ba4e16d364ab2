use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the toolkit.
///
/// The variants map onto the CLI exit-code classes: validation, numerical
/// failure and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("invalid value for `{field}`: {reason}")]
    Validation { field: String, reason: String },

    #[error("integrator step size underflow at t = {time:.6e} s (h = {step:.3e} s)")]
    StepUnderflow { time: f64, step: f64 },

    #[error("trajectory ends at {end:.6e} s but {requested:.6e} s was requested")]
    TrajectoryTooShort { requested: f64, end: f64 },

    #[error("Rydberg population at end of write stage is {0:.3e}; storage efficiency undefined")]
    NoStoredPopulation(f64),

    #[error("quadrature did not reach tolerance {tolerance:.1e} (estimated error {estimate:.3e})")]
    QuadratureNonConvergence { tolerance: f64, estimate: f64 },

    #[error("Bessel series did not converge for argument {0}")]
    SeriesNonConvergence(num_complex::Complex64),

    #[error("least-squares fit did not converge after {0} iterations")]
    FitNonConvergence(usize),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("no coincidences in the normalization window: {0}")]
    ZeroCounts(String),

    #[error("visibility {value} is outside the attainable range [{min}, {max}]")]
    OutOfRange { value: f64, min: f64, max: f64 },

    #[error("malformed time-tag data: {0}")]
    TagFormat(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Coarse class used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parse { .. } | Error::Validation { .. } | Error::OutOfRange { .. } => {
                ErrorKind::Validation
            }
            Error::Io(_) | Error::Csv(_) | Error::TagFormat(_) => ErrorKind::Io,
            _ => ErrorKind::Numerical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

pub type Result<T> = std::result::Result<T, Error>;
