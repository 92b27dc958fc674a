use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("grid too coarse for window: {0}")]
    GridTooCoarse(String),

    #[error("grid cannot resolve mollifier: delta = {delta} < 4 h = {min}")]
    MollifierUnresolved { delta: f64, min: f64 },

    #[error("oscillatory ratio; the singularity ratio is a liminf, running minimum = {running_min}")]
    OscillatoryRatio { running_min: f64 },

    #[error("not a critical point; integration by parts invalid (|F'(x)| = {slope:e}, tolerance {tol:e})")]
    NotCritical { slope: f64, tol: f64 },

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("no jump; ladder undefined")]
    NoJump,

    #[error("grid cannot resolve ladder; refine f (failed condition: {0})")]
    LadderUnresolved(String),

    #[error("density is not potential-constant: EL residual {residual:e} exceeds {tol:e}")]
    NotPotentialConstant { residual: f64, tol: f64 },

    #[error("solver diverged: {0}")]
    Diverged(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
