use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("kernel family {0} has no closed-form spectral density")]
    UnsupportedFamily(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("degenerate spectrum: density {value:e} at frequency {frequency:?} is not usable")]
    DegenerateSpectrum { frequency: Vec<f64>, value: f64 },

    #[error("degenerate tail: nonpositive tail mass at rho = {rho}")]
    DegenerateTail { rho: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("stale cache: expected hash {expected}, found {found}")]
    StaleCache { expected: String, found: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures caused by floating-point breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NumericalFailure(_) | Error::DegenerateSpectrum { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
