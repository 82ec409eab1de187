use thiserror::Error;

use crate::model::CaseClass;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("malformed model: {0}")]
    Malformed(String),

    #[error("bad parameter {name}: {detail}")]
    BadParameter { name: &'static str, detail: String },

    #[error("state {state} has an empty feasible action set")]
    EmptyFeasibleSet { state: usize },

    #[error("transition row (state {state}, action {action}) is not stochastic: sum = {sum}")]
    NonStochasticRow {
        state: usize,
        action: usize,
        sum: f64,
    },

    #[error(
        "transition row (state {state}, action {action}) has negative entry {value} at {next}"
    )]
    NegativeTransition {
        state: usize,
        action: usize,
        next: usize,
        value: f64,
    },

    #[error("utility at (state {state}, action {action}) is negative")]
    NegativeUtility { state: usize, action: usize },

    #[error(
        "utility at (state {state}, action {action}) is zero but 1 - rho < 0 requires strictly positive utility"
    )]
    ZeroUtilityInNegativeExponentCase { state: usize, action: usize },

    #[error("action {action} is not feasible in state {state}")]
    InfeasibleAction { state: usize, action: usize },

    #[error("unsupported parameter regime rho = {rho}, gamma = {gamma} ({case:?}): cannot be analysed by a contraction argument")]
    UnsupportedCase {
        rho: f64,
        gamma: f64,
        case: CaseClass,
    },

    #[error("operator is not a contraction: delta = {delta} >= 1")]
    NotAContraction { delta: f64 },

    #[error("domain error in {what}: {detail}")]
    Domain { what: &'static str, detail: String },

    #[error("no convergence after {iterations} iterations (last error bound {last_bound})")]
    MaxIterationsExceeded { iterations: usize, last_bound: f64 },

    #[error("Du boundary condition fails: {0}")]
    BoundaryConditionFails(String),

    #[error("optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("optimality audit failed: plan {plan} at state {state}, margin {margin}")]
    AuditFailed {
        plan: usize,
        state: usize,
        margin: f64,
    },
}

impl Error {
    /// Process exit code associated with this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::UnsupportedCase { .. } => 3,
            Error::NotAContraction { .. } | Error::MaxIterationsExceeded { .. } => 4,
            Error::BoundaryConditionFails(_) | Error::OptimizationFailed(_) => 5,
            Error::AuditFailed { .. } => 6,
            _ => 2,
        }
    }
}
