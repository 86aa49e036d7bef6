use thiserror::Error;

/// Errors raised by parameter validation, solvers and simulators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("negative rate: {name} = {value}")]
    NegativeRate { name: &'static str, value: f64 },

    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },

    #[error("{name} must be finite, got {value}")]
    NonFinite { name: &'static str, value: f64 },

    #[error("channel area exceeds boundary area ({channel_area} > {boundary_area})")]
    ChannelAreaExceedsBoundary {
        channel_area: f64,
        boundary_area: f64,
    },

    #[error(
        "channel area {channel_area} != channel count {count} x per-channel area {per_channel}"
    )]
    ChannelAreaMismatch {
        channel_area: f64,
        count: u32,
        per_channel: f64,
    },

    #[error("grid needs at least 2 cells, got {0}")]
    TooFewCells(usize),

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("{what} out of range: {value} not in [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid parameter: {0}")]
    Invalid(String),

    #[error("stability violation: {0}")]
    Stability(String),

    #[error("negative density {value:e} at cell {cell}, level {level}: time step too coarse")]
    NegativeDensity {
        cell: usize,
        level: usize,
        value: f64,
    },

    #[error("probability leak {leak:e} exceeds tolerance")]
    ProbabilityLeak { leak: f64 },

    #[error("time step too coarse: estimated error {estimate:e} > tolerance {tolerance:e}")]
    StepTooCoarse { estimate: f64, tolerance: f64 },

    #[error("no root in bracket [{lo}, {hi}]")]
    NoRootInBracket { lo: f64, hi: f64 },

    #[error("too few survivors for slope fit: {0}")]
    TooFewSurvivors(String),

    #[error("state space too large: {0} states")]
    StateSpaceTooLarge(usize),

    #[error("truncation tail mass {tail:e} exceeds 1e-8")]
    TruncationTail { tail: f64 },

    #[error("singular linear system: {0}")]
    Singular(String),
}

pub type Result<T> = std::result::Result<T, Error>;
