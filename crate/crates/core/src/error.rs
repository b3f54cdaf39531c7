use thiserror::Error;

/// Errors surfaced by the exact kernels.
#[derive(Debug, Clone, Error)]
pub enum CoreError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("jet validity exhausted: {0}")]
    JetExhausted(String),

    #[error("insufficient jet order: need {need}, have {have} ({what})")]
    InsufficientJets {
        need: i64,
        have: i64,
        what: String,
    },

    #[error("cap too small: {0}")]
    CapTooSmall(String),

    #[error("operand lacks vector slot")]
    MissingVectorSlot,

    #[error("operand is not a phase function: {0}")]
    NotPhaseFunction(String),

    #[error("operand is not momentum-polynomial with the expected shape: {0}")]
    BadOperand(String),

    #[error("{what} requires sigma(a) = 0, got nonzero projection")]
    NonzeroSigma { what: String },

    #[error("Jacobi identity violated at triple ({0}, {1}, {2})")]
    JacobiViolation(usize, usize, usize),

    #[error("one-form alpha is not closed (structure-constant trace is not a cocycle)")]
    AlphaNotClosed,

    #[error("d(alpha) + tr R0 != 0 on jets")]
    AlphaMismatch,

    #[error("connection is not in normal form at the origin: {0}")]
    NotNormalForm(String),

    #[error("verification failed: {0}")]
    VerificationFailed(String),

    #[error("{0}")]
    Invalid(String),
}
