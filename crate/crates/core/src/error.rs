use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("frequency must be positive, got {0} rad/s")]
    NonPositiveFrequency(f64),

    #[error("operating point undefined: zero voltage magnitude")]
    ZeroVoltage,

    #[error("generator resonance singularity at {omega} rad/s (zero damping)")]
    Resonance { omega: f64 },

    #[error("infeasible dispatch: |P·X'd/(E'·Vt)| = {ratio} exceeds 1")]
    InfeasibleDispatch { ratio: f64 },

    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("series too short: {0} samples, need at least 3")]
    SeriesTooShort(usize),

    #[error("channel length mismatch: expected {expected}, got {got} for {channel}")]
    LengthMismatch {
        channel: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-uniform sampling at index {index}: step deviates by {deviation:e} s")]
    NonUniformSampling { index: usize, deviation: f64 },

    #[error("voltage collapse: |V| = {magnitude} pu at t = {t} s")]
    VoltageCollapse { t: f64, magnitude: f64 },

    #[error("non-finite generator state at t = {t} s")]
    NonFiniteState { t: f64 },
}

impl Error {
    /// True for failures that arise during numerical evaluation rather than
    /// from bad inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Resonance { .. }
                | Error::VoltageCollapse { .. }
                | Error::NonFiniteState { .. }
                | Error::NotHermitian(_)
        )
    }
}
