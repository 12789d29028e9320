use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("edge {edge_index}: endpoint {unit} out of range (n = {n})")]
    EndpointOutOfRange {
        edge_index: usize,
        unit: usize,
        n: usize,
    },

    #[error("edge {edge_index}: self-loop at unit {unit}")]
    SelfLoop { edge_index: usize, unit: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("exposure level {level} out of range for unit {unit} (levels = {levels})")]
    LevelOutOfRange {
        unit: usize,
        level: u32,
        levels: u32,
    },

    #[error(
        "unit {unit}: general exposure refused, degree {degree} exceeds the pattern cap of {cap}"
    )]
    PatternBlowup {
        unit: usize,
        degree: usize,
        cap: usize,
    },

    #[error("design support has {size} points, above the cap of {cap}; use Monte Carlo instead")]
    SupportTooLarge { size: u128, cap: u128 },

    #[error("no closed-form propensity for this design/exposure pair: {0}")]
    NoAnalyticFormula(String),

    #[error("unit {unit}: propensity for cell (z={z}, e={e}) is {pi}, outside (0,1); unbiased weighting impossible")]
    PositivityViolation { unit: usize, z: u8, e: u32, pi: f64 },

    #[error("unit {unit}: estimand needs exposure level {level} which the table does not carry")]
    MissingLevel { unit: usize, level: u32 },

    #[error("unit {unit}: conditioning arm z={z} has probability 0 under the policy")]
    UndefinedConditional { unit: usize, z: u8 },

    #[error(
        "re-randomization gave up after {tries} draws (acceptance rate ≈ {acceptance_rate:.3e})"
    )]
    RerandomizationExhausted { tries: u64, acceptance_rate: f64 },

    #[error("weight system infeasible for unit {unit}: {reason}")]
    InfeasibleWeights { unit: usize, reason: String },

    #[error("estimator precondition failed: {0}")]
    EstimatorPrecondition(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
