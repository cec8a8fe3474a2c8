use thiserror::Error;

use crate::solvers::{EstimateReport, RunTrace};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("weights sum to {sum}, which is not within tolerance of 1")]
    NotNormalized { sum: f64 },

    #[error("weight {index} is {value}; weights must be finite and nonnegative")]
    NegativeWeight { index: usize, value: f64 },

    #[error("weight {index} is zero; KL projection needs strictly positive input")]
    ZeroWeight { index: usize },

    #[error("all weights were removed")]
    Collapsed,

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("largest quasi-gradient {g_max:e} is numerically zero while the objective is above threshold")]
    StalledGradient { g_max: f64 },

    #[error("trace is missing `{0}`")]
    MissingTraceField(&'static str),

    #[error("no termination after {iterations} iterations")]
    NonTermination {
        iterations: usize,
        last: Box<EstimateReport>,
        trace: Box<RunTrace>,
    },

    #[error("{0} is not supported for this task")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}
