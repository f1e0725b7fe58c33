use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter violates an operation's precondition.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// The dataset's domain does not match what the test family expects.
    #[error("domain mismatch: expected {expected} dataset, got {found}")]
    DomainMismatch {
        expected: &'static str,
        found: &'static str,
    },

    /// Every candidate has already been peeled off.
    #[error("no candidates left: all {0} values are removed")]
    EmptyCandidates(usize),

    #[error("calibration: {0}")]
    Calibration(String),

    #[error("degenerate covariance: {0}")]
    DegenerateCovariance(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("missing truth labels")]
    MissingLabels,

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    /// True for errors caused by bad user input rather than a numeric
    /// failure during computation.
    pub fn is_usage(&self) -> bool {
        !matches!(self, Error::Numeric(_))
    }
}
