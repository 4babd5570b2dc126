use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the decoding pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("nyquist violation: {freq_hz} Hz requires fs > {} Hz, got {fs_hz} Hz", 2.0 * .freq_hz)]
    Nyquist { freq_hz: f64, fs_hz: f64 },

    #[error("filter design failed: {0}")]
    FilterDesign(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("too few extrema for envelope construction")]
    TooFewExtrema,

    #[error("harmonic collision: {0}")]
    HarmonicCollision(String),

    #[error("zero variance: {0}")]
    ZeroVariance(&'static str),

    #[error("rank-deficient covariance")]
    RankDeficient,

    #[error("missing template for class {0}")]
    MissingTemplate(usize),

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Net(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag, used by the CLI and the C ABI.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid_argument",
            Error::NonFinite(_) => "non_finite",
            Error::Nyquist { .. } => "nyquist",
            Error::FilterDesign(_) => "filter_design",
            Error::Dimension(_) => "dimension",
            Error::TooFewExtrema => "too_few_extrema",
            Error::HarmonicCollision(_) => "harmonic_collision",
            Error::ZeroVariance(_) => "zero_variance",
            Error::RankDeficient => "rank_deficient",
            Error::MissingTemplate(_) => "missing_template",
            Error::Diverged { .. } => "diverged",
            Error::Format { .. } => "format",
            Error::Protocol(_) => "protocol",
            Error::Io { .. } | Error::Net(_) => "io",
        }
    }
}
