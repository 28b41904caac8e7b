use thiserror::Error;

/// Errors raised by estimation, resampling and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("label at position {index} is {value}, expected 0 or 1")]
    NonBinaryLabel { index: usize, value: f64 },

    #[error("design recipes disagree in length: g(0,.) has {zero} columns, g(1,.) has {one}")]
    RecipeLength { zero: usize, one: usize },

    #[error("design refers to covariate column {index} but Z has {width} columns")]
    ColumnOutOfRange { index: usize, width: usize },

    #[error("too few observations: n = {n} with k = {k} design columns")]
    TooFewObservations { n: usize, k: usize },

    #[error(
        "singular design (reciprocal condition number {rcond:.3e}); offending columns {columns:?}"
    )]
    SingularDesign { rcond: f64, columns: Vec<usize> },

    #[error("invalid misclassification rates: {0}")]
    InvalidRates(String),

    #[error("validation sample is empty")]
    EmptySample,

    #[error("share of imputed positives is {0}; resampling needs 0 < pi_hat < 1")]
    DegenerateLabelShare(f64),

    #[error(
        "{sampler} sampler: branch {branch} has probability {value:.6e}; \
         valid rates need F+ + F-/pi_hat <= 1 and F+/(1-pi_hat) + F- <= 1"
    )]
    InvalidBranch {
        sampler: &'static str,
        branch: &'static str,
        value: f64,
    },

    #[error("invalid bootstrap plan: {0}")]
    InvalidPlan(String),

    #[error("need at least {needed} bootstrap draws, found {found}")]
    InsufficientDraws { needed: usize, found: usize },

    #[error(
        "replication {replication}: no usable draw after {attempts} attempts \
         ({singular} singular designs, {invalid_rates} invalid rate draws)"
    )]
    RetriesExhausted {
        replication: usize,
        attempts: usize,
        singular: usize,
        invalid_rates: usize,
    },

    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(f64),

    #[error("variance entry {index} is negative ({value})")]
    NegativeVariance { index: usize, value: f64 },

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),

    #[error("cell aborted: {failed} of {reps} replications failed; first error: {first}")]
    CellAborted {
        failed: usize,
        reps: usize,
        first: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
