use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the solver, the problem catalog and the benchmark harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("householder reflector is degenerate (d and u coincide)")]
    DegenerateReflection,

    #[error("evaluation budget exhausted")]
    BudgetExhausted,

    #[error("linear system is singular to working precision")]
    SingularSystem,

    #[error("sample set is not poised")]
    NotPoised,

    #[error("scaling matrix is undefined (step is zero or orthogonal to the gradient)")]
    DegenerateTheta,

    #[error("starting point lies outside the box")]
    InfeasibleStart,

    #[error("budget {budget} is too small, at least {required} evaluations are needed")]
    InfeasibleBudget { budget: usize, required: usize },

    #[error("invalid box: {0}")]
    InvalidBox(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("problem `{problem}` does not support n = {dim}: {reason}")]
    IncompatibleDimension {
        problem: String,
        dim: usize,
        reason: &'static str,
    },

    #[error("no record for solver `{solver}` on instance {instance}")]
    MissingCell { solver: String, instance: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
