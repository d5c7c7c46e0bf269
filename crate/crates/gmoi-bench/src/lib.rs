//! Shared inputs for the engine benchmarks.

use std::sync::Arc;

use gmoi_core::derivative::StructuredFamily;
use gmoi_core::fixtures::FixtureGenerator;
use gmoi_core::{GmoiError, GmoiProblem, JordanDecomposition, MultiFunction, Scalar};

/// A GMOI problem of order `zeta` on `n × n` random Jordan fixtures.
pub fn gmoi_problem<S: Scalar>(seed: u64, n: usize, zeta: usize, tol: f64) -> Result<GmoiProblem<S>, GmoiError> {
    let mut g = FixtureGenerator::new(seed);
    let params: Vec<Arc<JordanDecomposition<S>>> =
        (0..=zeta).map(|_| g.random_fixture::<S>(n, 3, false, tol).map(|f| Arc::new(f.decomposition))).collect::<Result<_, _>>()?;
    let args = (0..zeta).map(|_| g.int_matrix::<S>(n, -2, 2)).collect();
    let beta = MultiFunction::polynomial_i64(&[1, -1, 0, 2, 1]).lift(zeta)?;
    GmoiProblem::new(beta, params, args)
}

/// A single `n × n` random Jordan fixture.
pub fn decomposition<S: Scalar>(seed: u64, n: usize, tol: f64) -> Result<JordanDecomposition<S>, GmoiError> {
    Ok(FixtureGenerator::new(seed).random_fixture::<S>(n, 3, false, tol)?.decomposition)
}

/// A diagonalizable family X + tY on `n × n` matrices.
pub fn family<S: Scalar>(seed: u64, n: usize, tol: f64) -> Result<StructuredFamily<S>, GmoiError> {
    FixtureGenerator::new(seed).structured_family::<S>(n, 1, true, tol)
}
