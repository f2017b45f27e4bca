use thiserror::Error;

/// Library-wide error type. Variants map onto CLI exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config: {0}")]
    ConfigInvalid(String),

    #[error("infeasible schedule: {0}")]
    InfeasibleSchedule(String),

    #[error("malformed bit framing: {0}")]
    MalformedFraming(String),

    #[error("missing message for coefficient (j={j}, k={k})")]
    MissingMessage { j: u32, k: u64 },

    #[error("signal exceeds Besov radius: norm {norm} > L = {radius}")]
    NormViolation { norm: f64, radius: f64 },

    #[error("level {j} too deep for refinement depth {depth}")]
    LevelTooDeep { j: u32, depth: u32 },

    #[error("non-finite input to encoder: {0}")]
    NonFinite(f64),

    #[error("degenerate spread: {0}")]
    DegenerateSpread(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// CLI exit code for this error (0 is success, 1 generic).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ConfigInvalid(_) | Error::NormViolation { .. } => 2,
            Error::InfeasibleSchedule(_)
            | Error::MalformedFraming(_)
            | Error::MissingMessage { .. } => 3,
            Error::Io(_) => 4,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
