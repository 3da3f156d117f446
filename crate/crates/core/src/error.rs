use thiserror::Error;

use crate::observables::ObservableSeries;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which side of an epsilon grid failed to bracket the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanSide {
    /// Every grid point was irreversible.
    Upper,
    /// No grid point was irreversible.
    Lower,
}

impl std::fmt::Display for ScanSide {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScanSide::Upper => f.write_str("every grid point is irreversible (grid too high)"),
            ScanSide::Lower => f.write_str("no grid point is irreversible (grid too low)"),
        }
    }
}

/// Coarse error classes. The CLI maps them onto exit codes and the C ABI
/// onto status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Numerical,
    Inconclusive,
    Invalid,
    Io,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Numerical => 3,
            ErrorCategory::Inconclusive => 4,
            ErrorCategory::Invalid | ErrorCategory::Io => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Config => "config",
            ErrorCategory::Numerical => "numerical",
            ErrorCategory::Inconclusive => "inconclusive",
            ErrorCategory::Invalid => "invalid",
            ErrorCategory::Io => "io",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid initial state: {0}")]
    InvalidSpec(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("commensurate periods: T2/T1 = {num}/{den}")]
    Commensurate { num: u64, den: u64 },

    #[error("coincident kicks at event {index} (t = {time})")]
    CoincidentKicks { index: usize, time: f64 },

    #[error("basis leakage: edge mass {edge_mass:e} exceeds budget {budget:e} at kick {kick}")]
    Leakage { edge_mass: f64, budget: f64, kick: i64 },

    #[error("norm drift {drift:e} exceeds tolerance {tol:e} at kick {kick}")]
    NormDrift { drift: f64, tol: f64, kick: i64 },

    #[error("band built for K/hbar = {band} but step uses K/hbar = {step}")]
    BandMismatch { band: f64, step: f64 },

    #[error("spectral grid of {grid} points cannot hold {required} momentum levels")]
    GridTooSmall { grid: usize, required: usize },

    #[error("state mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no momentum component exceeds delta = {0:e}")]
    EmptyQualification(f64),

    #[error("lmax is zero, threshold estimate undefined")]
    ZeroLmax,

    #[error("series length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("inconclusive scan: {0}")]
    InconclusiveScan(ScanSide),

    #[error("{failed} of {total} oracle checks failed")]
    ValidationFailed { failed: usize, total: usize },

    #[error("no localization plateau detected within {horizon} kicks")]
    NoPlateau { horizon: u64 },

    #[error("run aborted after {} samples: {reason}", partial.len())]
    Aborted {
        reason: Box<Error>,
        partial: Box<ObservableSeries>,
    },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config { .. } | Error::Commensurate { .. } => ErrorCategory::Config,
            Error::Leakage { .. }
            | Error::NormDrift { .. }
            | Error::NoPlateau { .. }
            | Error::ValidationFailed { .. } => ErrorCategory::Numerical,
            Error::Aborted { reason, .. } => reason.category(),
            Error::InconclusiveScan(_) => ErrorCategory::Inconclusive,
            Error::Io(_) | Error::Csv(_) => ErrorCategory::Io,
            _ => ErrorCategory::Invalid,
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
