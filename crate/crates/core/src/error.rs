use thiserror::Error;

/// Errors raised while constructing domain objects.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("parameter vector has q-norm {norm} > 1 (q = {q})")]
    OutsideParameterBall { norm: f64, q: f64 },
    #[error("manifold index {index} out of range ({count} manifolds)")]
    ManifoldIndex { index: usize, count: usize },
    #[error("duplicate working-set entry for manifold {manifold}")]
    DuplicateEntry { manifold: usize },
}

/// Failures of the inner quadratic programs.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpError {
    #[error("working set is not linearly separable")]
    Infeasible,
    #[error("center constraints admit no separating hyperplane")]
    CentersInfeasible,
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("problem has the wrong mode for this solver")]
    WrongMode,
    #[error("active-set iteration cap ({0}) reached")]
    IterationLimit(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

/// Oracle failures.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("manifold has no samples")]
    EmptyManifold,
    #[error("restarts must be at least 1")]
    NoRestarts,
    #[error("weight vector has dimension {found}, manifold lives in {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Errors from the cutting-plane drivers that are not reported as a run status.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("initial working set has no sample from manifold {0}")]
    UncoveredManifold(usize),
    #[error("configuration: {0}")]
    Config(String),
    #[error("tolerance must lie in (0, 1) for this bracket, got {0}")]
    Tolerance(f64),
}
