use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("division by zero")]
    DivisionByZero,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("triangle is not colorful: {0}")]
    NotColorful(String),
    #[error("framed map is not constrained: {0}")]
    NotConstrained(String),
    #[error("coordinates are not rational")]
    IrrationalCoordinates,
    #[error("invalid dissection: {}", .0.join("; "))]
    InvalidDissection(Vec<String>),
    #[error("illegal framed map: {}", .0.join("; "))]
    Illegal(Vec<String>),
    #[error("no legal point found after {restarts} restarts")]
    NoLegalPointFound { restarts: usize },
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error("no bracketing interval: {0}")]
    NoBracket(String),
    #[error("final ray parameter misses 1-2p by {deviation:e} (allowed {allowed:e})")]
    SnapFailure { deviation: f64, allowed: f64 },
    #[error("search needs {needed} candidates, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
