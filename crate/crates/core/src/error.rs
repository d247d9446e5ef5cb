use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("promise {u} is outside the feasible interval [{lo}, {hi}] of type {index}")]
    InfeasiblePromise { index: usize, u: f64, lo: f64, hi: f64 },

    #[error("report {report} exceeds the true type {true_type}; technologies cannot be falsified")]
    IllegalReport { true_type: usize, report: usize },

    #[error("utility grid has no admissible level for type {index}")]
    InfeasibleGrid { index: usize },

    #[error("enumeration needs {required} sequences, budget is {budget}")]
    BudgetExceeded { required: u128, budget: u128 },

    #[error("promise is neither on the curve nor constant on types {from}..={to}: {reason}")]
    StructureViolation { from: usize, to: usize, reason: String },

    #[error("invalid projection: {0}")]
    InvalidProjection(String),

    #[error("not a candidate promise: {0}")]
    NotACandidate(String),

    #[error("invalid expansion: {0}")]
    InvalidExpansion(String),

    #[error("alternative weights do not first-order dominate the base: {0}")]
    NotDominant(String),

    #[error("default region is not an expansion of the base default: {0}")]
    NotAnExpansion(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
