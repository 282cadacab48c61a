use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("too close to a primary (r1 = {r1:e}, r2 = {r2:e})")]
    Singularity { r1: f64, r2: f64 },

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("no section crossing within {horizon} time units")]
    NoCrossing { horizon: f64 },

    #[error("tangential section crossing at t = {t} (|rate| = {rate:e})")]
    TangentialCrossing { t: f64, rate: f64 },

    #[error("{what}: no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("family continuation broke down at x* = {x_star}: {reason}")]
    ContinuationBreakdown { x_star: f64, reason: String },

    #[error("monodromy spectrum is not of the form (l, 1/l, 1, 1): {0}")]
    EigenPattern(String),

    #[error("no sign change of the symmetric residual in the fiber bracket")]
    NoSignChange,

    #[error("fiber offset outside its validity range: {0}")]
    FiberOffset(String),

    #[error("finite-difference estimate unreliable: error {error:e} vs value {value:e}")]
    FiniteDifference { value: f64, error: f64 },

    #[error("homoclinic gap did not fall below {delta:e} within {u_max} time units")]
    TailNotReached { delta: f64, u_max: f64 },

    #[error("quadrature tolerance not met (estimate {estimate:e})")]
    Quadrature { estimate: f64 },

    #[error("angle {theta} outside the channel domain")]
    OutsideChannel { theta: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("stale cache {path}: expected config hash {expected}, found {found}")]
    StaleCache {
        path: String,
        expected: String,
        found: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
