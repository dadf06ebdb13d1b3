use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the fitting pipeline.
#[derive(Debug, Error)]
pub enum SsmError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("rate constants k1={k1} and k2={k2} coincide; the closed-form solution is singular")]
    EqualRateConstants { k1: f64, k2: f64 },

    #[error("integration produced a non-finite state at t={t}")]
    NonFiniteState { t: f64 },

    #[error("underdetermined system: {equations} equations for {unknowns} unknowns")]
    UnderdeterminedSystem { equations: usize, unknowns: usize },

    #[error("damped normal equations admit no descent step (damping exhausted at iteration {iteration})")]
    SingularNormalEquations { iteration: usize },

    #[error("inner coefficient system is rank deficient (rank {rank} < {required}) at k={rates:?}")]
    RankDeficientInnerSystem {
        rank: usize,
        required: usize,
        rates: Vec<f64>,
    },

    #[error("mechanism is not linear in the state; projection over rate constants is not applicable")]
    NonlinearMechanism,

    #[error("malformed data: {0}")]
    MalformedData(String),

    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SsmError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SsmError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, SsmError>;
