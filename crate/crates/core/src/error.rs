use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid Butcher tableau: {0}")]
    InvalidTableau(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("method `{method}` is not supported here: {reason}")]
    UnsupportedMethod { method: String, reason: String },
    #[error("stability boundary not crossed along ray at angle {angle} within radius {radius}")]
    RayMiss { angle: f64, radius: f64 },
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("singular quasi-neutrality system for mode (m = {m}, n = {n})")]
    SingularMode { m: i64, n: i64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("config parse error at line {line}: {message}")]
    ConfigParse { line: usize, message: String },
    #[error("step rejected {0} times in a row, aborting")]
    RejectionCap(usize),
    #[error("numerical blow-up at t = {t}: {what}")]
    BlowUp { t: f64, what: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
