use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: need at least {needed} entries, found {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("operator is not coercive: slack-corrected lower bound {lower} <= 0")]
    NonCoercive { lower: f64 },

    #[error("assembled Galerkin matrix is not positive definite (|Λ| = {size})")]
    Indefinite { size: usize },

    #[error("iterative solve did not converge: relative residual {achieved:e} after {iterations} iterations")]
    NotConverged { achieved: f64, iterations: usize },

    #[error("no valid enrichment radius: {0}")]
    NoValidRadius(String),

    #[error("unknown fixture '{name}'; available: {available}")]
    UnknownFixture { name: String, available: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
