//! Multivariate matrix functions `f(X₁, …, X_r)` from Jordan data.
//!
//! The value is the three-part sum over block tuples: the pure projector
//! term `f(λ) P₁⋯P_r`, the mixed terms in which a selection
//! `{ι₁ < … < ι_κ}` (`1 ≤ κ ≤ r−1`) of slots carries nilpotent powers
//! `N^{q}` (`1 ≤ q ≤ m−1`) weighted by `f^{(q)}/Π q!`, and the
//! all-nilpotent term. Summation order is fixed: block tuples
//! (lexicographic in canonical block order), then `κ`, then selections in
//! lexicographic order, then exponent vectors.

use itertools::Itertools;

use crate::calculus::MultiFunction;
use crate::error::{GmoiError, Result};
use crate::gmoi::check_budget;
use crate::jordan::JordanDecomposition;
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// All `κ`-subsets of `{1, …, r}` in lexicographic order (one-based indices).
pub fn enumerate_selections(r: usize, kappa: usize) -> Result<Vec<Vec<usize>>> {
    if kappa == 0 || kappa > r {
        return Err(GmoiError::InvalidInput(format!("selection size κ = {kappa} out of range 1..={r}")));
    }
    Ok((1..=r).combinations(kappa).collect())
}

/// `f(X) = Σ_{k,i} [f(λ_k) P_{k,i} + Σ_{q=1}^{m−1} f^{(q)}(λ_k)/q! N_{k,i}^q]`.
pub fn eval_univariate<S: Scalar>(f: &MultiFunction<S>, j: &JordanDecomposition<S>) -> Result<Matrix<S>> {
    if f.arity() != 1 {
        return Err(GmoiError::DimensionMismatch { expected: 1, found: f.arity() });
    }
    let mut acc = Matrix::zeros(j.dim);
    for b in &j.blocks {
        let taylor = f.taylor(&b.eigenvalue, b.order - 1)?;
        for (q, factor) in b.factors().iter().enumerate() {
            acc.add_scaled(&taylor[q], factor);
        }
    }
    Ok(acc)
}

/// Evaluates `f(X₁, …, X_r)` for `r = js.len()` decomposed matrices.
pub fn eval_multivariate<S: Scalar>(f: &MultiFunction<S>, js: &[&JordanDecomposition<S>]) -> Result<Matrix<S>> {
    let r = js.len();
    if r == 0 {
        return Err(GmoiError::InvalidInput("at least one matrix argument is required".into()));
    }
    if f.arity() != r {
        return Err(GmoiError::DimensionMismatch { expected: f.arity(), found: r });
    }
    let n = js[0].dim;
    for j in js {
        if j.dim != n {
            return Err(GmoiError::DimensionMismatch { expected: n, found: j.dim });
        }
    }
    let terms: u128 = js
        .iter()
        .map(|j| j.blocks.iter().map(|b| b.order as u128).sum::<u128>())
        .product();
    check_budget(terms, None)?;

    // factors[s][b] = [P, N, …, N^{m−1}] of block b of argument s.
    let factors: Vec<Vec<Vec<Matrix<S>>>> = js.iter().map(|j| j.blocks.iter().map(|b| b.factors()).collect()).collect();
    let mut acc = Matrix::zeros(n);
    let tuples = js.iter().map(|j| 0..j.blocks.len()).multi_cartesian_product();
    for tuple in tuples {
        let lambdas: Vec<S> = tuple.iter().zip(js).map(|(&b, j)| j.blocks[b].eigenvalue.clone()).collect();
        let orders: Vec<usize> = tuple.iter().zip(js).map(|(&b, j)| j.blocks[b].order).collect();
        let term = |q: &[usize]| -> Result<(S, Matrix<S>)> {
            let mut coeff = f.partial(q, &lambdas)?;
            let mut prod = factors[0][tuple[0]][q[0]].clone();
            coeff = coeff / S::factorial(q[0]);
            for s in 1..r {
                prod = &prod * &factors[s][tuple[s]][q[s]];
                coeff = coeff / S::factorial(q[s]);
            }
            Ok((coeff, prod))
        };
        // Pure projector term.
        let (c, m) = term(&vec![0; r])?;
        acc.add_scaled(&c, &m);
        // Mixed terms, 1 ≤ κ ≤ r − 1.
        for kappa in 1..r {
            for sel in (0..r).combinations(kappa) {
                if sel.iter().any(|&s| orders[s] < 2) {
                    continue;
                }
                for qs in sel.iter().map(|&s| 1..orders[s]).multi_cartesian_product() {
                    let mut q = vec![0; r];
                    for (&s, &qs_) in sel.iter().zip(&qs) {
                        q[s] = qs_;
                    }
                    let (c, m) = term(&q)?;
                    acc.add_scaled(&c, &m);
                }
            }
        }
        // All-nilpotent term.
        if orders.iter().all(|&m| m >= 2) {
            for q in orders.iter().map(|&m| 1..m).multi_cartesian_product() {
                let (c, m) = term(&q)?;
                acc.add_scaled(&c, &m);
            }
        }
    }
    Ok(acc)
}

/// Classical-MOI cross-check through the multivariate spectral map:
/// `f(X₁, Y₁, X₂, …, Y_ζ, X_{ζ+1})` with `f = β(z_odd)·Π z_even`.
pub fn moi_as_spectral_map<S: Scalar>(
    beta: &MultiFunction<S>,
    params: &[&JordanDecomposition<S>],
    args: &[&JordanDecomposition<S>],
) -> Result<Matrix<S>> {
    let zeta = args.len();
    if params.len() != zeta + 1 {
        return Err(GmoiError::DimensionMismatch { expected: zeta + 1, found: params.len() });
    }
    let f = MultiFunction::product_moi(beta.clone(), zeta)?;
    let mut interleaved: Vec<&JordanDecomposition<S>> = Vec::with_capacity(2 * zeta + 1);
    for p in 0..zeta {
        interleaved.push(params[p]);
        interleaved.push(args[p]);
    }
    interleaved.push(params[zeta]);
    eval_multivariate(&f, &interleaved)
}

/// Horner evaluation `Σ c_i X^i` (validation oracle for [`eval_univariate`]).
pub fn horner<S: Scalar>(coeffs: &[S], x: &Matrix<S>) -> Matrix<S> {
    let n = x.dim();
    let mut acc = Matrix::zeros(n);
    for c in coeffs.iter().rev() {
        acc = &acc * x;
        let mut shifted = acc.clone();
        shifted.add_scaled(c, &Matrix::identity(n));
        acc = shifted;
    }
    acc
}
