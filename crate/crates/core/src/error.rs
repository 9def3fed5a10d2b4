use alloc::string::String;

/// Errors raised by the simulation kernels.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(
        "invalid window: edge probability {p} is outside (0, 1) for n = {n}, lambda = {lambda}, epsilon = {epsilon:?}"
    )]
    InvalidWindow {
        n: u64,
        lambda: f64,
        epsilon: Option<f64>,
        p: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("state space too large: n = {n} exceeds the exact-computation limit {max}; use Monte Carlo instead")]
    StateSpace { n: u64, max: u64 },

    #[error("insufficient sample: only {got} usable paths, need at least {needed}")]
    InsufficientSample { got: usize, needed: usize },

    #[error("series mismatch: {series} cannot be rescaled as {expected}")]
    SeriesMismatch {
        series: &'static str,
        expected: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
