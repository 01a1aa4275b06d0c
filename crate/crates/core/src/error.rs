use thiserror::Error;

/// Errors raised anywhere in the engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    AxisOutOfRange { axis: usize, dim: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("component index out of range: {index} (order {order})")]
    ComponentOutOfRange { index: usize, order: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("ill-conditioned frame at t = {time}: condition number {condition:.3e} exceeds {bound:.3e}")]
    IllConditioned { time: f64, condition: f64, bound: f64 },

    #[error("time {time} outside span [{start}, {end}]")]
    OutsideSpan { time: f64, start: f64, end: f64 },

    #[error("operator is not translation invariant: {0}")]
    NotTranslationInvariant(String),

    #[error("defective matrix: {0}")]
    Defective(String),

    #[error("dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("missing input: {0}")]
    Missing(String),

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("io: {0}")]
    Io(String),

    #[error("format: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
