use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("frequency must be strictly positive, got {0} Hz")]
    NonPositiveFrequency(f64),

    #[error("frequency grid must be non-empty and strictly increasing")]
    BadGrid,

    #[error("empty or inverted band [{lo}, {hi}] Hz")]
    EmptyBand { lo: f64, hi: f64 },

    #[error("{what} does not cover [{lo}, {hi}] Hz (data spans [{have_lo}, {have_hi}] Hz)")]
    Coverage {
        what: &'static str,
        lo: f64,
        hi: f64,
        have_lo: f64,
        have_hi: f64,
    },

    #[error("unit mismatch: expected {expected}, got {got}")]
    UnitMismatch { expected: String, got: String },

    #[error("grids differ between the two inputs")]
    GridMismatch,

    #[error("no -3 dB crossing found in [{lo}, {hi}] Hz")]
    NoCrossing { lo: f64, hi: f64 },

    #[error("singular nodal matrix at {freq} Hz (pivot {pivot:e} in row {row})")]
    SingularMatrix { freq: f64, row: usize, pivot: f64 },

    #[error("netlist: {0}")]
    Netlist(String),

    #[error("quadrature did not converge (estimate {estimate:e}, error {error:e})")]
    Quadrature { estimate: f64, error: f64 },

    #[error("unknown op amp `{0}`")]
    UnknownOpAmp(String),

    #[error("record too short: {0}")]
    TooShort(String),

    #[error("harmonic {harmonic} at {freq} Hz is at or above Nyquist ({nyquist} Hz)")]
    AboveNyquist { harmonic: usize, freq: f64, nyquist: f64 },

    #[error("fundamental at {0} Hz not found above the noise floor")]
    FundamentalNotFound(f64),

    #[error("degenerate fit: {0}")]
    Degenerate(String),

    #[error("sweep grid has {size} points, cap is {cap}")]
    GridTooLarge { size: usize, cap: usize },

    #[error("empty sweep axis `{0}`")]
    EmptyAxis(&'static str),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NoCrossing { .. } | Error::SingularMatrix { .. } | Error::Quadrature { .. }
        )
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub(crate) fn check_freq(f: f64) -> Result<f64> {
    if f > 0.0 && f.is_finite() {
        Ok(f)
    } else {
        Err(Error::NonPositiveFrequency(f))
    }
}
