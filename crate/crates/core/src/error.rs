use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("polynomial must have degree at least {min}, got {got}")]
    DegreeTooSmall { min: usize, got: usize },
    #[error("leading coefficient must be positive")]
    NonPositiveLeading,
    #[error("p-adic lifting for p = {p} was inconclusive at depth {depth}")]
    PrecisionExhausted { p: u64, depth: u32 },
    #[error("auxiliary polynomial for ell = {ell} is not integral")]
    NonIntegral { ell: u64 },
    #[error("polynomial has no root in Z_{p}")]
    NoLocalRoot { p: u64 },
    #[error("grid of size {n} is too small, need at least {need}")]
    GridTooSmall { n: usize, need: usize },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("search limit exceeded: {0}")]
    Limit(String),
    #[error("inputs are not coprime: gcd({a}, {q}) != 1")]
    NotCoprime { a: i64, q: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
