//! Error type shared by the library modules.

use thiserror::Error;

/// Errors surfaced by construction, initialization, and integration routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Spin quantum numbers must be non-negative half-integers (2j ∈ ℕ).
    #[error("spin quantum number {0} is not a non-negative half-integer")]
    InvalidSpin(f64),

    /// Matrix/operator dimensions disagree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Doubly stochastic normalization failed to reach tolerance; the random
    /// sample was degenerate and should be redrawn with another seed.
    #[error(
        "doubly-stochastic normalization did not converge after {iterations} \
         iterations (residual {residual:.3e}); resample with a different seed"
    )]
    SinkhornNonConvergence { iterations: usize, residual: f64 },

    /// The adaptive integrator could not take a step above the underflow
    /// floor: the problem is too stiff for the requested accuracy window.
    #[error(
        "step size underflow at t = {t:.6e}: integration is stiffness-limited \
         here; adjust rtol (current {rtol:.1e}) or shorten the time span"
    )]
    StepSizeUnderflow { t: f64, rtol: f64 },

    /// A state or derivative stopped being finite.
    #[error("non-finite state encountered at t = {t:.6e}")]
    NonFiniteState { t: f64 },

    /// Configuration rejected before any numerics ran.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
