use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("squared envelope is negative (min {min:.4e} at t = {at:.4e} s)")]
    NegativeSquaredEnvelope { min: f64, at: f64 },

    #[error("time {t:.4e} s outside the waveform window [0, {end:.4e}] s")]
    OutsideWindow { t: f64, end: f64 },

    #[error("integrator step size underflow at t = {t:.4e} s (h = {h:.3e} s)")]
    StepUnderflow { t: f64, h: f64 },

    #[error("propagator lost unitarity: max|U^dag U - I| = {0:.3e}")]
    NonUnitary(f64),

    #[error("density matrix trace drifted by {0:.3e}")]
    TraceDrift(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("gate too far from target (computational-subspace fidelity {0:.4})")]
    TooFarFromTarget(f64),

    #[error("fit failed: {0}")]
    FitFailed(String),

    #[error("missing amplification phases: found {found}, expected {expected}")]
    MissingPhases { found: usize, expected: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }
}
