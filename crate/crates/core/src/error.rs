use thiserror::Error;

/// Errors raised by the library. Validation-style checks (generator
/// reports, verification discrepancies) return structured results instead.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("time {0} is not a grid node")]
    NotANode(f64),

    #[error("adaptedness violation: evaluator requested node {requested} but history ends at node {available}")]
    Adaptedness { requested: usize, available: usize },

    #[error("intensity model produced an invalid generator: {0}")]
    Model(String),

    #[error("states must differ (got {0} -> {0})")]
    SameState(usize),

    #[error("state {state} out of range for {states} states")]
    StateOutOfRange { state: usize, states: usize },

    #[error("Peano-Baker series did not converge by order {order} (last term norm {last_term_norm:e})")]
    NotConverged { order: usize, last_term_norm: f64 },

    #[error("discrete scenario too large: {0}")]
    TooLarge(String),

    #[error("absolute continuity violated: atom with positive target probability has zero reference probability")]
    AbsoluteContinuity,

    #[error("ensemble does not match scenario: {0}")]
    Mismatch(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
