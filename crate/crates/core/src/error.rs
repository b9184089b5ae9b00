use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed program graph: {0}")]
    Structural(String),
    #[error("constant subgraph evaluates to a non-finite value ({0})")]
    DegenerateConstant(f64),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{x} is outside the domain of {target}")]
    Domain { target: &'static str, x: f64 },
    #[error("value out of range: {0}")]
    Range(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("selection underflow: {available} programs available, {required} required")]
    SelectionUnderflow { available: usize, required: usize },
    #[error("benchmark integrity: {0}")]
    BenchIntegrity(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
