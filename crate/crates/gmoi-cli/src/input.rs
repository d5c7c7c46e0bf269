//! Loading matrices, functions and decompositions from JSON files.

use std::path::Path;
use std::sync::Arc;

use anyhow::{Context, Result};
use gmoi_core::{GmoiError, JordanDecomposition, Matrix, MultiFunction, Scalar};
use serde_json::Value;

pub fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| gmoi_core::GmoiError::InvalidInput(format!("{}: malformed JSON: {e}", path.display())))
        .map_err(Into::into)
}

/// A matrix JSON, or the `matrix` field of a fixture.
pub fn matrix<S: Scalar>(path: &Path) -> Result<Matrix<S>> {
    let v = read_json(path)?;
    let m = v.get("matrix").unwrap_or(&v);
    Matrix::from_json(m).with_context(|| format!("{}: field \"entries\"", path.display()))
}

pub fn matrices<S: Scalar>(paths: &[impl AsRef<Path>]) -> Result<Vec<Matrix<S>>> {
    paths.iter().map(|p| matrix(p.as_ref())).collect()
}

pub fn function<S: Scalar>(path: &Path) -> Result<MultiFunction<S>> {
    let v = read_json(path)?;
    MultiFunction::from_json(&v).with_context(|| format!("{}: function specification", path.display()))
}

/// Decomposition from a file that holds either a plain matrix (structure is
/// inferred) or `transform` + `blocks` (a fixture or a decomposition report;
/// the structure is taken as given and checked against `matrix` if present).
pub fn decomposition<S: Scalar>(path: &Path, tol: f64) -> Result<JordanDecomposition<S>> {
    let v = read_json(path)?;
    let ctx = || format!("{}: decomposition", path.display());
    if v.get("transform").is_some() && v.get("blocks").is_some() {
        let j = JordanDecomposition::<S>::from_json(&v, tol).with_context(ctx)?;
        if let Some(m) = v.get("matrix") {
            let x = Matrix::from_json(m).with_context(|| format!("{}: field \"matrix\"", path.display()))?;
            let residual = (&j.reconstruct() - &x).frobenius_norm();
            let bound = if S::EXACT { 0.0 } else { tol * x.frobenius_norm().max(1.0) };
            if residual > bound {
                return Err(GmoiError::ValidationFailure { what: "stored matrix vs V J V⁻¹".into(), residual, tol: bound }).with_context(ctx);
            }
        }
        return Ok(j);
    }
    let x = Matrix::from_json(v.get("matrix").unwrap_or(&v)).with_context(|| format!("{}: field \"entries\"", path.display()))?;
    JordanDecomposition::auto(&x, tol).with_context(ctx)
}

pub fn decompositions<S: Scalar>(paths: &[impl AsRef<Path>], tol: f64) -> Result<Vec<Arc<JordanDecomposition<S>>>> {
    paths.iter().map(|p| decomposition(p.as_ref(), tol).map(Arc::new)).collect()
}
