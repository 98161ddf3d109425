use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("negative power {0} kW")]
    NegativePower(f64),

    #[error("battery operation {b_kw} kW outside feasible range [{min_kw}, {max_kw}]")]
    BoundViolation { b_kw: f64, min_kw: f64, max_kw: f64 },

    #[error("calibration infeasible: {0}")]
    InfeasibleCalibration(String),

    #[error("step called on a finished episode")]
    EpisodeFinished,

    #[error("search space of {leaves} sequences exceeds the limit of {limit}")]
    SearchSpaceExceeded { leaves: f64, limit: f64 },

    #[error("training diverged in episode {episode}: {reason}")]
    Divergence { episode: usize, reason: String },

    #[error("network architecture mismatch: {0:?} vs {1:?}")]
    ArchitectureMismatch(Vec<usize>, Vec<usize>),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch(_)
                | Error::NonPositive { .. }
                | Error::InvalidConfig(_)
                | Error::InfeasibleCalibration(_)
                | Error::Unknown { .. }
                | Error::Parse(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}
