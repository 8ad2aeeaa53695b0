use thiserror::Error;

/// Errors raised by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes disagree, e.g. a record mixing action counts.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    /// Input violates a structural precondition (empty record, zero mass, bad ordering).
    #[error("structural error: {0}")]
    Structural(String),

    /// A constructor received an out-of-domain parameter.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A reward entry fell outside the declared `[lo, lo + width]` range.
    #[error("reward {value} at action {action} outside declared range [{lo}, {hi}]")]
    WidthViolation {
        action: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// An object was used outside its lifetime (act after the horizon, draw after exhaustion).
    #[error("lifecycle error: {0}")]
    Lifecycle(String),

    /// A derived configuration is not representable (e.g. horizon overflow).
    #[error("configuration error: {0}")]
    Configuration(String),

    /// An exact computation exceeds the supported size.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// Game-tree validation failure (perfect recall, disjoint actions, chance mass).
    #[error("invalid game tree: {0}")]
    Validation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
