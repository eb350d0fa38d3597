use thiserror::Error;

/// Errors raised by model construction, solving, and simulation.
#[derive(Debug, Error)]
pub enum ModelError {
    /// A primitive parameter violates its domain (nonpositive variance,
    /// interior-mass bound, belief ordering, matrix shape or definiteness).
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    /// The equilibrium system has no usable solution at these parameters.
    #[error("degenerate equilibrium: {0}")]
    Degenerate(String),

    /// A matrix inverse required by the solver is unreliable
    /// (condition number estimate above 1e12).
    #[error("singular or near-singular matrix in {0}")]
    SingularMatrix(&'static str),

    /// A matrix handed to an eigenvalue classifier is asymmetric beyond
    /// the caller's tolerance.
    #[error("matrix not symmetric: max asymmetry {asym:.3e} exceeds tolerance {tol:.3e}")]
    NotSymmetric { asym: f64, tol: f64 },

    /// A conditional variance needed for a demand underflowed to zero.
    #[error("conditional variance underflow in {0}")]
    ZeroVariance(&'static str),

    /// A lead-lag experiment muted no asset or every asset.
    #[error("invalid mute set: {0}")]
    InvalidMute(String),

    /// A dimension mismatch between a parameter block and `n`.
    #[error("wrong dimension: expected {expected}, got {got}")]
    WrongDimension { expected: usize, got: usize },

    /// A finite-difference probe stepped outside the valid parameter domain.
    #[error("invalid perturbation: {0}")]
    InvalidPerturbation(String),
}

impl ModelError {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        ModelError::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}
