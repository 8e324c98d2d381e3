use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("value {value} lies outside the potential domain {domain}")]
    DomainViolation { value: f64, domain: &'static str },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    ConvergenceFailure {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("mobility value {value} outside [{lower}, {upper}]")]
    BoundsViolation { value: f64, lower: f64, upper: f64 },

    #[error("right-hand side has mean {mean:e}, expected zero within {tol:e}")]
    MeanNotZero { mean: f64, tol: f64 },

    #[error("spatial mean {mean} exceeds the admissible bound m = {bound}")]
    MeanBoundViolation { mean: f64, bound: f64 },

    #[error("Newton iteration diverged at step {step} (residual {residual:e} after {iterations} iterations); try halving dt")]
    NewtonDivergence {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("step {step} failed: {source}")]
    AtStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("time {time} is not a snapshot time of the trajectory")]
    TimesNotInTrajectory { time: f64 },

    #[error("no dissipativity pair (kappa, C0) fits the series")]
    NoValidFit,

    #[error("entropy estimate requires a polynomial potential with p in (2, 6): {reason}")]
    WrongPotentialClass { reason: String },

    #[error("radius {radius} cannot contain any admissible initial datum")]
    RadiusInfeasible { radius: f64 },

    #[error("trajectories are not sampled at the ensemble sample times ({reason})")]
    MismatchedSampling { reason: String },

    #[error("ensemble member {index} (seed {seed}, stream {index}) failed: {source}")]
    EnsembleMember {
        index: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("grid functions live on incompatible grids")]
    GridMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
