use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("quadrature did not reach tolerance {tol:e} (best error bound {achieved:e})")]
    QuadratureFailure { tol: f64, achieved: f64 },
    #[error("step size underflow at t={t} (h={h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("step budget of {steps} exhausted at t={t}")]
    StepBudget { t: f64, steps: usize },
    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("least-squares system ill-conditioned (estimate {0:e})")]
    IllConditioned(f64),
    #[error("polynomial has degree zero")]
    DegreeZero,
    #[error("argument outside domain: {0}")]
    DomainError(String),
    #[error("integer overflow: {0}")]
    Overflow(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("a decay rate reached the floor at tau={0}")]
    WFloorHit(f64),
    #[error("no non-degenerate stationary point found after {0} starts")]
    NoNondegeneratePointFound(usize),
    #[error("anchor is not critical (gradient residual {0:e})")]
    AnchorNotCritical(f64),
    #[error("target does not decay fast enough: {0}")]
    DecayViolation(String),
    #[error("width cap exceeded (best error {best:e} at m={m})")]
    CapExceeded { m: usize, best: f64 },
    #[error("training diverged at step {0}")]
    Diverged(usize),
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
