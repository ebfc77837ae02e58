use thiserror::Error;

/// Errors produced by the numerical pipeline and its I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("expected {expected} values, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("operation requires a periodic grid")]
    NonPeriodicGrid,

    #[error("right-hand side has mean {mean:.3e} (relative); {hint}")]
    NonzeroMean { mean: f64, hint: String },

    #[error("kind mismatch: expected {expected}, found {found}")]
    KindMismatch { expected: String, found: String },

    #[error("field is not real: max imaginary part {max_imag:.3e}")]
    NotReal { max_imag: f64 },

    #[error("dispersion relation violated: |lambda*mu + p^2| = {defect:.3e}")]
    BadDispersion { defect: f64 },

    #[error("invalid family: {0}")]
    InvalidFamily(String),

    #[error("invalid seed: {0}")]
    InvalidSeed(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("solution does not solve the system with the given potential (residual {residual:.3e})")]
    PotentialMismatch { residual: f64 },

    #[error("ambient dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty stacking plan")]
    EmptyPlan,

    #[error("degenerate metric: {0}")]
    DegenerateMetric(String),

    #[error("every grid point is degenerate")]
    AllDegenerate,

    #[error("solutions are linearly dependent (certificate {certificate:.3e})")]
    Dependent { certificate: f64 },

    #[error("flow produced an imaginary part of relative size {ratio:.3e}")]
    ImaginaryDrift { ratio: f64 },

    #[error("time step {dt:.3e} exceeds stability limit {limit:.3e}")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
