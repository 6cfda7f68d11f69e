use thiserror::Error;

/// Errors raised by the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CimError {
    #[error("{what} {value} out of range {range}")]
    Range {
        what: &'static str,
        value: i64,
        range: String,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("partial grid is missing plane pair ({j}, {k})")]
    IncompleteGrid { j: u32, k: u32 },

    #[error("integer overflow while accumulating {0}")]
    Overflow(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("CSNR undefined for a zero ideal signal")]
    UndefinedSignal,

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("weight {value} at layer {layer} (row {row}, col {col}) does not fit {bits}-bit {signedness}")]
    WeightRange {
        layer: usize,
        row: usize,
        col: usize,
        value: i64,
        bits: u32,
        signedness: &'static str,
    },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

pub type Result<T, E = CimError> = std::result::Result<T, E>;
