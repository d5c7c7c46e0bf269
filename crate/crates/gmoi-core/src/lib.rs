//! Generalized multiple operator integrals (GMOIs) for finite-dimensional
//! matrices.

pub mod analysis;
pub mod calculus;
pub mod derivative;
pub mod error;
pub mod fixtures;
pub mod gmoi;
pub mod jordan;
pub mod matrix;
pub mod scalar;
pub mod spectral_map;

pub use calculus::{divided_difference, FunctionKind, MultiFunction};
pub use error::{GmoiError, Result};
pub use gmoi::{eval_classical_moi, eval_gmoi, GmoiProblem, NilpotentPattern, Parameter, SlotMode};
pub use jordan::{DecomposeMode, JordanDecomposition, SpectralBlock, ValidationReport};
pub use matrix::Matrix;
pub use scalar::{Scalar, C64, CQ, DEFAULT_TOL};
