use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its documented range or a cross-field rule.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An argument lies outside the domain where the model is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("empty cell set")]
    EmptyCellSet,

    #[error("zero variance: all {0} samples are equal")]
    ZeroVariance(usize),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("series truncation failed: {0}")]
    SeriesTruncation(String),

    #[error("unknown {kind} '{name}'; expected one of: {expected}")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        expected: String,
    },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than a failure at run time.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_) | Error::UnknownStrategy { .. } | Error::Domain(_)
        )
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidConfig(msg.into())
}
