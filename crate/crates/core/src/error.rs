use thiserror::Error;

/// Errors raised by the physics, simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("readout singular: split-mode transfer null (mode splitting equals cavity linewidth)")]
    ReadoutSingular,

    #[error("operation requires resonant probing (detuning = 0), got detuning {detuning} rad/s")]
    DetuningNotSupported { detuning: f64 },

    #[error("loop unstable (gain/delay mismatch): |u| = {amplitude:e} exceeded {limit:e} at t = {time}")]
    LoopUnstable {
        amplitude: f64,
        limit: f64,
        time: f64,
    },

    #[error("feedback delay {delay} s is shorter than one sample ({dt} s)")]
    DelayTooShort { delay: f64, dt: f64 },

    #[error("bandpass center {center_hz} Hz is not below the Nyquist frequency {nyquist_hz} Hz")]
    AboveNyquist { center_hz: f64, nyquist_hz: f64 },

    #[error("empty input")]
    EmptyInput,

    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },

    #[error("fit did not converge after {iterations} iterations (residual {residual:e}, last iterate {last:?})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("peak not resolvable above the floor")]
    PeakNotResolvable,

    #[error("incompatible spectrum units: {0}")]
    UnitMismatch(String),

    #[error("calibration tone not found above the floor in its window")]
    ToneNotFound,

    #[error("integration windows overlap")]
    OverlappingWindows,

    #[error("window [{lo}, {hi}] Hz contains no spectral bins")]
    EmptyWindow { lo: f64, hi: f64 },

    #[error("ambiguous detuning branch: transmission is not monotone over the data range")]
    AmbiguousBranch,

    #[error("transmission {value} is outside the model range [{min}, {max}]")]
    TransmissionOutOfRange { value: f64, min: f64, max: f64 },

    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("drive not shuttered / unstable: {0}")]
    EnvelopeNotDecaying(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Shorthand for building an [`Error::InvalidParameter`].
pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
