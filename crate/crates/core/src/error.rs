use thiserror::Error;

/// Errors shared by every module in the crate.
#[derive(Error, Debug)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature failed to converge: {0}")]
    NonConvergence(String),

    #[error("pole {pole} is not interior to the support ({a}, {b})")]
    PoleOnBoundary { pole: String, a: String, b: String },

    #[error("differentiation step underflowed the working precision")]
    StepUnderflow,

    #[error("moment integral diverges (t = 0 and j + lambda <= -1)")]
    Divergent,

    #[error("moment certification failed at j = {j}: {detail}")]
    CertificationFailure { j: usize, detail: String },

    #[error("working precision exhausted: {0}")]
    PrecisionExhausted(String),

    #[error("computed normalization h[{n}] is not positive")]
    NonPositive { n: usize },

    #[error("index {n} out of range (limit {limit})")]
    Index { n: usize, limit: usize },

    #[error("degenerate arguments: {0}")]
    DegenerateArguments(String),

    #[error("denominator 2 r_n - lambda vanishes at n = {n}")]
    DenominatorVanishes { n: usize },

    #[error("ladder coefficient A_n vanishes at x = {x}")]
    CoefficientPole { x: String },
}

pub type Result<T> = std::result::Result<T, Error>;
