use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty point list")]
    EmptySupport,
    #[error("weights must be non-negative with a positive sum")]
    InvalidWeights,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("beta must be a non-negative finite number, got {0}")]
    InvalidBeta(f64),
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("divergence undefined: {0}")]
    Undefined(String),
    #[error("value {value} outside the admissible range {range}")]
    OutOfRange { value: f64, range: &'static str },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in computation: {0}")]
    NonFinite(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("linear program is {0}")]
    Lp(&'static str),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
