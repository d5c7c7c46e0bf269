//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by decomposition, evaluation and verification routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GmoiError {
    /// Two operands (or an operand and a declared size) disagree in dimension.
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A matrix could not be inverted at the working tolerance.
    #[error("matrix is singular at working tolerance (pivot modulus {pivot:.3e}, condition indicator {condition:.3e})")]
    Singular { pivot: f64, condition: f64 },

    /// Two eigenvalue clusters are too close to be separated reliably.
    #[error("ambiguous eigenvalue clustering: clusters at {a} and {b} are {distance:.3e} apart (separation band {band:.3e})")]
    AmbiguousClustering {
        a: String,
        b: String,
        distance: f64,
        band: f64,
    },

    /// A decomposition (or another constructed object) failed an invariant check.
    #[error("validation failure: {what} residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    ValidationFailure {
        what: String,
        residual: f64,
        tol: f64,
    },

    /// A partial derivative was requested beyond the order a function supports.
    #[error("derivative order {requested} exceeds supported maximum {max}")]
    DerivativeOrder { requested: usize, max: usize },

    /// A rational function was evaluated at (or numerically at) a pole.
    #[error("pole encountered: {0}")]
    Pole(String),

    /// The number of enumerated terms exceeds the configured budget.
    #[error("term budget exceeded: {terms} terms requested, budget is {budget}")]
    BudgetExceeded { terms: u128, budget: u64 },

    /// Malformed input (JSON, function specification, fixture description, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The Jordan structure of a matrix family changed along a parameter path.
    #[error("Jordan structure changed along the family at t = {t}: {detail}")]
    StructureInstability { t: String, detail: String },

    /// The requested operation is outside the supported configuration.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A quantity cannot be represented in the exact rational mode.
    #[error("not exactly representable: {0}")]
    NotExact(String),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, GmoiError>;
