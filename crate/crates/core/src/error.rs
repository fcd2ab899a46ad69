use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("estimation error: {0}")]
    Estimation(String),
    #[error("unsupported combination: {0}")]
    Unsupported(String),
    #[error("coverage shortfall: achieved fraction {achieved:.6} below target {target:.6}")]
    CoverageShortfall { achieved: f64, target: f64 },
    #[error("construction failed at node {node}, sublevel {sublevel}: {reason}")]
    Construction {
        node: usize,
        sublevel: usize,
        reason: String,
    },
    #[error("truncation: {0}")]
    Truncation(String),
    #[error("rejected gauge regime: {0}")]
    CaseRejected(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the CLI: 2 for bad input, 3 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_)
            | Error::Range(_)
            | Error::Argument(_)
            | Error::Unsupported(_)
            | Error::CaseRejected(_)
            | Error::Config(_)
            | Error::Json(_)
            | Error::Csv(_) => 2,
            Error::Numeric(_)
            | Error::Estimation(_)
            | Error::CoverageShortfall { .. }
            | Error::Construction { .. }
            | Error::Truncation(_)
            | Error::Io(_) => 3,
        }
    }
}

pub(crate) fn arg<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Argument(msg.into()))
}
