use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid distribution `{what}`: {detail}")]
    InvalidDistribution { what: String, detail: String },

    #[error("reward r({state},{action}) = {value} outside [0, {r_max}]")]
    RewardOutOfRange {
        state: usize,
        action: usize,
        value: f64,
        r_max: f64,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("construction needs {entries} transition entries, budget is {budget}")]
    BudgetExceeded { entries: u128, budget: usize },

    #[error(
        "value iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("induced chain is multichain with {} recurrent classes: {classes:?}", classes.len())]
    Multichain { classes: Vec<Vec<usize>> },

    #[error("p is not absolutely continuous w.r.t. q at index {index}")]
    AbsoluteContinuity { index: usize },

    #[error("exponential Renyi divergence is infinite: {0}")]
    DivergenceInfinite(String),

    #[error("state embedding missing")]
    MissingEmbedding,

    #[error("support of {points} points exceeds the exact transport limit of {limit}")]
    SupportTooLarge { points: usize, limit: usize },

    #[error(
        "kernel pair does not compose to the base transition (max deviation {max_deviation:e})"
    )]
    KernelMismatch { max_deviation: f64 },

    #[error("expected {expected} kernels, got {got}")]
    KernelCount { expected: usize, got: usize },

    #[error("policy class has {count} members, cap is {cap}; restrict to reachable or decision-relevant states")]
    CapExceeded { count: f64, cap: f64 },

    #[error("MDP is not communicating")]
    NotCommunicating,

    #[error("history window too short: need more than {needed} samples, have {have}")]
    WindowTooShort { needed: usize, have: usize },

    #[error("degenerate hyper-policy: {0}")]
    DegenerateHyperPolicy(String),

    #[error("grid too coarse: {0}")]
    GridTooCoarse(String),

    #[error("infeasible fixture target: {0}")]
    InfeasibleTarget(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("environment fault at step {step}: {msg}")]
    Env { step: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, Error>;
