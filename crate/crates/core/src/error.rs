use thiserror::Error;

/// Errors produced by the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("malformed binary stream at byte {offset}: {msg}")]
    Binary { offset: u64, msg: String },

    #[error("event pixel ({x}, {y}) outside {width}x{height} sensor (line {line})")]
    Bounds {
        x: u32,
        y: u32,
        width: usize,
        height: usize,
        line: usize,
    },

    #[error("degenerate time span: t_start {t_start} >= t_end {t_end}")]
    DegenerateTimeSpan { t_start: f64, t_end: f64 },

    #[error("degenerate IWE: mean gradient magnitude below threshold")]
    DegenerateIwe,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("undersampled simulation: per-substep brightness change exceeds 4C")]
    UndersampledSimulation,

    #[error("empty evaluation mask")]
    EmptyMask,

    #[error("zero-variance baseline image")]
    ZeroVarianceBaseline,

    #[error("non-finite gradient produced by {term}")]
    NonFiniteGradient { term: String },

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("pair {index}: {source}")]
    Pair {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
