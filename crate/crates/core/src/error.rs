use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("{name} must be finite (got {value})")]
    NonFinite { name: &'static str, value: f64 },

    #[error("cover at level {level} has {size} elements, above the cap of {cap}")]
    Capacity { level: u32, size: u128, cap: usize },

    #[error("reward {value} is outside [0, {range}]")]
    RewardOutOfRange { value: f64, range: f64 },

    #[error("update called without a matching step")]
    UnmatchedUpdate,

    #[error("learner horizon {horizon} exhausted")]
    HorizonExhausted { horizon: usize },

    #[error("policy expects {policy} feedback but the run provides {run}")]
    FeedbackMismatch {
        policy: &'static str,
        run: &'static str,
    },

    #[error("candidate set is empty")]
    EmptyCandidates,

    #[error("no feasible mixture of the candidates")]
    Infeasible,

    #[error("probe of size {size} exceeds the cap of {cap}")]
    SizeCap { size: u128, cap: u128 },

    #[error("index {index} outside 0..{len}")]
    InvalidIndex { index: usize, len: usize },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("unsupported environment: {0}")]
    UnsupportedEnv(String),

    #[error("invariant violated: {0}")]
    InvariantViolation(String),
}

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<f64> {
    if !value.is_finite() {
        return Err(Error::NonFinite { name, value });
    }
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::OutOfRange {
            name,
            value,
            range: "[0, 1]",
        });
    }
    Ok(value)
}

pub(crate) fn check_nonneg(name: &'static str, value: f64) -> Result<f64> {
    if !value.is_finite() {
        return Err(Error::NonFinite { name, value });
    }
    if value < 0.0 {
        return Err(Error::OutOfRange {
            name,
            value,
            range: "[0, inf)",
        });
    }
    Ok(value)
}

pub(crate) fn check_positive(name: &'static str, value: f64) -> Result<f64> {
    if !value.is_finite() {
        return Err(Error::NonFinite { name, value });
    }
    if value <= 0.0 {
        return Err(Error::OutOfRange {
            name,
            value,
            range: "(0, inf)",
        });
    }
    Ok(value)
}
