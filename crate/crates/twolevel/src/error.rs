use thiserror::Error;

use crate::grammar::LoadError;
use crate::semiring::SemiringError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Semiring(#[from] SemiringError),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("invalid grammar: {0}")]
    Invalid(String),
    #[error("not in normal form:\n  {}", .0.join("\n  "))]
    NotNormalForm(Vec<String>),
    #[error("bad input: {0}")]
    Input(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("resource limit exceeded: {0}")]
    ResourceExceeded(String),
    #[error("fixed-point iteration did not converge: {0}")]
    Diverged(String),
}

pub type Result<T> = std::result::Result<T, Error>;
