use thiserror::Error;
use wpmec_core::benchmarks::SchemeId;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error(transparent)]
    Solver(#[from] wpmec_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("seed {seed}: {scheme} beats joint ({objective} < {joint})")]
    Dominance {
        seed: u64,
        scheme: SchemeId,
        objective: f64,
        joint: f64,
    },
}

pub type Result<T> = std::result::Result<T, HarnessError>;
