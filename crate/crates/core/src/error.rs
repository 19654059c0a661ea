use thiserror::Error;

/// Errors produced anywhere in the equalization pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("index {index} outside the valid range {lo}..{hi}")]
    IndexOutOfRange { index: usize, lo: usize, hi: usize },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("no eigenvalue of the Gram matrix lies below {gamma:e}; no minimizer certificate")]
    NoNullSpace { gamma: f64 },

    #[error("constant entry of the projected lifted vector vanished ({value:e})")]
    DivisionHazard { value: f64 },

    #[error("equalizer output power is not positive ({power:e})")]
    DegeneratePower { power: f64 },

    #[error("gradient descent diverged at iteration {iters} (cost {cost:e})")]
    Diverged {
        iters: usize,
        cost: f64,
        trace: Vec<f64>,
    },

    #[error("unknown preset `{name}`; available presets: {available}")]
    UnknownPreset { name: String, available: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("malformed problem file at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
