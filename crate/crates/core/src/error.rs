use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("Lévy density is singular at the origin")]
    Singularity,

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),

    #[error("non-finite state at step {step}")]
    Divergence { step: usize },

    #[error("{diverged} of {replicas} replicas diverged")]
    DivergedReplicas { diverged: usize, replicas: usize },

    #[error("insufficient signal: {usable} usable points, need at least {needed}")]
    InsufficientSignal { usable: usize, needed: usize },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the dynamics blowing up rather than by
    /// bad input.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Divergence { .. } | Error::DivergedReplicas { .. })
    }
}

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Precondition(msg()))
    }
}
