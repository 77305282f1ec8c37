use thiserror::Error;

/// Errors raised by the game model, certificates, solvers and the reference oracle.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {actual}")]
    Dimension {
        what: String,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value from {callback} (player {player}) at {context}")]
    NonFinite {
        callback: &'static str,
        player: usize,
        context: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("the separable bound requires per-player independent constraints")]
    NotSeparable,

    #[error(
        "no sample size up to {limit} reaches delta <= {target:e} (delta({limit}) = {achieved:e})"
    )]
    CertificateUnreachable {
        target: f64,
        limit: u64,
        achieved: f64,
    },

    #[error(transparent)]
    Inner(#[from] InnerSolveError),

    #[error("inner solve failed for scenario {scenario} at outer iteration {iteration}: {source}")]
    InnerFailure {
        scenario: usize,
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite iterate at outer iteration {iteration}")]
    NonFiniteIterate { iteration: usize },

    #[error(
        "instance too large for the centralized solver: {rows} constraint rows exceed {limit}"
    )]
    InstanceTooLarge { rows: usize, limit: usize },

    #[error("the stacked scenario constraints have no common feasible point")]
    EmptyFeasibleSet,

    #[error("extragradient diverged at iteration {iteration} (|x| = {norm:e})")]
    Diverged { iteration: usize, norm: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Failure modes of the per-scenario interior-point solve.
#[derive(Debug, Clone, Error)]
pub enum InnerSolveError {
    #[error(
        "interior point hit max_iter={iterations}: stationarity {stationarity:e}, \
         feasibility {feasibility:e}, complementarity {complementarity:e}"
    )]
    MaxIter {
        iterations: usize,
        best_w: Vec<f64>,
        stationarity: f64,
        feasibility: f64,
        complementarity: f64,
    },

    #[error("subproblem infeasible: no strictly feasible point found (violation {violation:e})")]
    Infeasible { violation: f64 },

    #[error("KKT matrix could not be factorized even after regularization")]
    Singular,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
