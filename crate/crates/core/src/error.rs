use thiserror::Error;

/// Errors raised by field, wavelet, and transform operations.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value at linear index {index}")]
    NonFinite { index: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("frequency-sign mismatch: expected {expected}, found {found}")]
    SignMismatch { expected: &'static str, found: &'static str },

    #[error("wavelet `{0}` has no position-space evaluator")]
    MissingPosition(String),

    #[error("wavelet `{0}` has no spectral evaluator")]
    MissingSpectrum(String),

    #[error("proxy wavelet has neither a time profile nor a spectrum")]
    MissingEvaluator,

    #[error("proxy wavelet is not progressive")]
    NotProgressive,

    #[error("wavelet is not admissible: {0}")]
    Inadmissible(String),

    #[error("normalisation constant is zero or not finite")]
    ZeroConstant,

    #[error("proxy pair inconsistent: max relative mismatch {0:e}")]
    InconsistentProxy(f64),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable category, used in JSON diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonFinite { .. } => "non_finite",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::GridMismatch => "grid_mismatch",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::SignMismatch { .. } => "sign_mismatch",
            Error::MissingPosition(_) => "missing_position",
            Error::MissingSpectrum(_) => "missing_spectrum",
            Error::MissingEvaluator => "missing_evaluator",
            Error::NotProgressive => "not_progressive",
            Error::Inadmissible(_) => "inadmissible",
            Error::ZeroConstant => "zero_constant",
            Error::InconsistentProxy(_) => "inconsistent_proxy",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
