use alloc::string::String;
use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input broke a documented precondition (non-Hermitian matrix,
    /// non-unit state, non-finite entry, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid control profile: {0}")]
    InvalidProfile(String),

    #[error("invalid perturbation spec: {0}")]
    InvalidSpec(String),

    #[error("gap condition violated: gap {gap:.6e} <= floor {floor:.6e} at tau = {tau:.6}")]
    GapViolation { tau: f64, gap: f64, floor: f64 },

    #[error(
        "uniform gap condition violated: gap {gap:.6e} <= floor {floor:.6e} at delta = {delta:.6}, tau = {tau:.6}"
    )]
    UniformGapViolation { delta: f64, tau: f64, gap: f64, floor: f64 },

    #[error("resource cap exceeded: {what} = {needed} > cap {cap} ({context})")]
    ResourceCap {
        what: &'static str,
        needed: u64,
        cap: u64,
        context: String,
    },

    /// Fewer than three usable points for a log-log fit.
    #[error("not enough usable points for a fit: {usable} < 3")]
    InsufficientData { usable: usize },
}
