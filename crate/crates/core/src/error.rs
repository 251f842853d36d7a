use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its documented constraints (e.g. exponents out of range).
    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    /// An evaluation was requested outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested object provably does not exist for the given parameters.
    #[error("no solution: {0}")]
    NoSolution(String),

    /// The requested solution branch does not exist in this parameter regime.
    #[error("branch unavailable: {0}")]
    BranchUnavailable(String),

    /// A numerical routine failed to reach its tolerance or a consistency check failed.
    #[error("numerical failure: {0}")]
    Numerics(String),

    /// An initial value problem trajectory left the admissible region before reaching r = 1.
    #[error("trajectory escaped at r = {r_escape}")]
    Escaped { r_escape: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
