use thiserror::Error;

/// Reasons a [`SystemConfig`](crate::model::SystemConfig) is rejected.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("at least one user is required")]
    NoUsers,
    #[error("need at least as many antennas as users (n_antennas = {n_antennas}, n_users = {n_users})")]
    TooFewAntennas { n_antennas: usize, n_users: usize },
    #[error("distance of user {index} must be positive, got {value}")]
    NonPositiveDistance { index: usize, value: f64 },
    #[error("qos_lambda must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("slot duration must be positive, got {0}")]
    NonPositiveSlot(f64),
    #[error("blocklength of {stream} stream must be at least 1")]
    ZeroBlocklength { stream: String },
    #[error("multicast_fraction must lie in [0, 1], got {0}")]
    MulticastFraction(f64),
    #[error("{field} has {got} entries but n_users = {expected}")]
    LengthMismatch { field: &'static str, got: usize, expected: usize },
    #[error("{field} must be finite and positive, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("velocity must be non-negative, got {0}")]
    NegativeVelocity(f64),
    #[error("n_trials and batch_slots must be at least 1")]
    NoTrials,
    #[error("failed to parse configuration: {0}")]
    Parse(String),
}

/// Failures of the embedded interior-point solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("subproblem infeasible: phase-one optimum {min_violation:.3e} > 0 (worst constraint `{worst}`)")]
    Infeasible { min_violation: f64, worst: String },
    #[error("subproblem unbounded: iterate norm exceeded {0:.1e}")]
    Unbounded(f64),
    #[error("solver stalled after {iterations} iterations (KKT residual {residual:.3e})")]
    Stalled { iterations: usize, residual: f64 },
    #[error("starting point outside the objective domain")]
    Domain,
    #[error("singular KKT system")]
    Singular,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("CSIT is near-singular (condition number {condition:.3e})")]
    SingularCsit { condition: f64 },
    #[error("age of information diverges for error probability {0}")]
    DivergentAge(f64),
    #[error("surrogate construction needs a positive expansion value for `{0}`")]
    ZeroExpansion(String),
    #[error("optimizer start {start} failed: {reason}")]
    StartFailed { start: usize, reason: String },
    #[error("all optimizer starts failed: {}", .0.join("; "))]
    AllStartsFailed(Vec<String>),
    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
