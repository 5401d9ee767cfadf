use thiserror::Error;

/// Every failure the pipeline can report. The CLI maps them to exit codes through [`Error::class`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("invalid kernel profile: {0}")]
    InvalidProfile(String),
    #[error("range error: {0}")]
    Range(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("construction error: {0}")]
    Construction(String),
    #[error("coercivity error: {0}")]
    Coercivity(String),
    #[error("barrier violation: {0}")]
    Barrier(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("continuity condition fails: {0}")]
    Continuity(String),
    #[error("wave direction error: {0}")]
    WaveDirection(String),
    #[error("front error: {0}")]
    Front(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("monotonicity violated: {0}")]
    Monotonicity(String),
    #[error("iteration cap reached: {0}")]
    IterationCap(String),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Construction,
    Convergence,
    Certification,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Construction => 3,
            ErrorClass::Convergence => 4,
            ErrorClass::Certification => 5,
        }
    }
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            Config(_)
            | InvalidProfile(_)
            | Range(_)
            | Resolution(_)
            | InvalidNonlinearity(_)
            | Domain(_)
            | Shape(_)
            | Io(_)
            | Json(_) => ErrorClass::Config,
            Construction(_) | Coercivity(_) | Barrier(_) | Parameter(_) | Continuity(_)
            | WaveDirection(_) | Front(_) => ErrorClass::Construction,
            NoConvergence(_) | Monotonicity(_) | IterationCap(_) => ErrorClass::Convergence,
            Certification(_) => ErrorClass::Certification,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
