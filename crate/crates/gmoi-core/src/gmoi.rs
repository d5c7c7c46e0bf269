//! Generalized multiple operator integrals.
//!
//! `T_β^{X₁,…,X_{ζ+1}}(Y₁,…,Y_ζ)` sums, over every tuple of geometric
//! blocks and every exponent vector `q` with `0 ≤ q_j ≤ m_j − 1`,
//!
//! ```text
//!   β^{(q₁,…,q_{ζ+1})}(λ_{k₁},…,λ_{k_{ζ+1}}) / (q₁!⋯q_{ζ+1}!) · F₁ Y₁ F₂ Y₂ ⋯ Y_ζ F_{ζ+1}
//! ```
//!
//! where `F_j = P_{k_j,i_j}` for `q_j = 0` and `F_j = N_{k_j,i_j}^{q_j}`
//! otherwise. This is the projector term, the mixed selection terms and the
//! all-nilpotent term of the definition, enumerated depth-first in a fixed
//! order (slots left to right, blocks in canonical order, exponents
//! ascending).
//!
//! A slot may be restricted to its projector part (`q = 0`, the `X_P`
//! parameter) or its nilpotent part (`q ≥ 1`, the `X_N` parameter); the
//! eigenvalues `λ_k` entering `β` are always those of the original matrix.

use std::sync::Arc;

use serde_json::{json, Value};

use crate::calculus::MultiFunction;
use crate::error::{GmoiError, Result};
use crate::jordan::JordanDecomposition;
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Default enumerated-term budget.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

/// Environment variable overriding [`DEFAULT_BUDGET`].
pub const BUDGET_ENV: &str = "GMOI_BUDGET";

/// The effective default budget (environment override or [`DEFAULT_BUDGET`]).
pub fn default_budget() -> u64 {
    std::env::var(BUDGET_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<u64>().ok())
        .filter(|&b| b >= 1)
        .unwrap_or(DEFAULT_BUDGET)
}

/// Fails with [`GmoiError::BudgetExceeded`] when `terms` exceeds the budget.
pub fn check_budget(terms: u128, budget: Option<u64>) -> Result<()> {
    let budget = budget.unwrap_or_else(default_budget);
    if terms > budget as u128 {
        Err(GmoiError::BudgetExceeded { terms, budget })
    } else {
        Ok(())
    }
}

/// Which part of a parameter matrix a slot uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SlotMode {
    /// The whole matrix `X` (all exponents `0 ≤ q ≤ m − 1`).
    Full,
    /// The semisimple part `X_P` (`q = 0` only).
    Projector,
    /// The nilpotent part `X_N` (`1 ≤ q ≤ m − 1` only).
    Nilpotent,
}

impl SlotMode {
    /// Intersection of two restrictions (`None` when empty).
    pub fn meet(self, other: SlotMode) -> Option<SlotMode> {
        use SlotMode::*;
        match (self, other) {
            (Full, m) | (m, Full) => Some(m),
            (a, b) if a == b => Some(a),
            _ => None,
        }
    }

    fn admits(self, q: usize) -> bool {
        match self {
            SlotMode::Full => true,
            SlotMode::Projector => q == 0,
            SlotMode::Nilpotent => q >= 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SlotMode::Full => "X",
            SlotMode::Projector => "X_P",
            SlotMode::Nilpotent => "X_N",
        }
    }
}

/// A decomposed parameter matrix together with its slot restriction.
#[derive(Clone, Debug)]
pub struct Parameter<S> {
    pub decomposition: Arc<JordanDecomposition<S>>,
    pub mode: SlotMode,
}

impl<S: Scalar> Parameter<S> {
    pub fn full(j: Arc<JordanDecomposition<S>>) -> Self {
        Self { decomposition: j, mode: SlotMode::Full }
    }

    pub fn with_mode(&self, mode: SlotMode) -> Self {
        Self { decomposition: self.decomposition.clone(), mode }
    }
}

/// `β`, the `ζ + 1` parameters and the `ζ` arguments of a GMOI.
#[derive(Clone, Debug)]
pub struct GmoiProblem<S> {
    pub beta: MultiFunction<S>,
    pub params: Vec<Parameter<S>>,
    pub args: Vec<Matrix<S>>,
    /// Term budget (`None`: [`default_budget`]).
    pub budget: Option<u64>,
}

impl<S: Scalar> GmoiProblem<S> {
    /// Checks arities and dimensions; all slots use the full parameter.
    pub fn new(beta: MultiFunction<S>, params: Vec<Arc<JordanDecomposition<S>>>, args: Vec<Matrix<S>>) -> Result<Self> {
        Self::with_parameters(beta, params.into_iter().map(Parameter::full).collect(), args)
    }

    /// Like [`GmoiProblem::new`] with explicit slot restrictions.
    pub fn with_parameters(beta: MultiFunction<S>, params: Vec<Parameter<S>>, args: Vec<Matrix<S>>) -> Result<Self> {
        if params.is_empty() {
            return Err(GmoiError::InvalidInput("a GMOI needs at least one parameter matrix".into()));
        }
        if args.len() + 1 != params.len() {
            return Err(GmoiError::DimensionMismatch { expected: params.len() - 1, found: args.len() });
        }
        if beta.arity() != params.len() {
            return Err(GmoiError::DimensionMismatch { expected: params.len(), found: beta.arity() });
        }
        let n = params[0].decomposition.dim;
        for p in &params {
            if p.decomposition.dim != n {
                return Err(GmoiError::DimensionMismatch { expected: n, found: p.decomposition.dim });
            }
        }
        for a in &args {
            if a.dim() != n {
                return Err(GmoiError::DimensionMismatch { expected: n, found: a.dim() });
            }
        }
        Ok(Self { beta, params, args, budget: None })
    }

    /// Convenience constructor from owned decompositions.
    pub fn from_decompositions(beta: MultiFunction<S>, params: &[JordanDecomposition<S>], args: &[Matrix<S>]) -> Result<Self> {
        Self::new(beta, params.iter().cloned().map(Arc::new).collect(), args.to_vec())
    }

    pub fn with_budget(mut self, budget: Option<u64>) -> Self {
        self.budget = budget;
        self
    }

    /// `ζ`, the number of arguments.
    pub fn zeta(&self) -> usize {
        self.args.len()
    }

    pub fn dim(&self) -> usize {
        self.params[0].decomposition.dim
    }

    /// Same problem with different arguments.
    pub fn with_args(&self, args: Vec<Matrix<S>>) -> Result<Self> {
        Ok(Self::with_parameters(self.beta.clone(), self.params.clone(), args)?.with_budget(self.budget))
    }

    /// Same problem with slot modes replaced (`None` entries keep the current mode).
    pub fn with_modes(&self, modes: &[SlotMode]) -> Self {
        let mut out = self.clone();
        for (p, &m) in out.params.iter_mut().zip(modes) {
            p.mode = m;
        }
        out
    }
}

/// One admissible choice for a slot: spectral factor, eigenvalue, derivative
/// order of `β` in that slot and scalar weight.
#[derive(Clone, Debug)]
pub struct SlotOption<S> {
    pub lambda: S,
    pub order: usize,
    pub weight: S,
    pub factor: Matrix<S>,
    /// `(block position, exponent)` for reporting.
    pub block: usize,
    pub exponent: usize,
}

/// Standard options of a parameter: `(λ, q, 1/q!, P or N^q)` for admissible `q`.
pub fn slot_options<S: Scalar>(j: &JordanDecomposition<S>, mode: SlotMode) -> Vec<SlotOption<S>> {
    let mut out = Vec::new();
    for (bi, b) in j.blocks.iter().enumerate() {
        for (q, factor) in b.factors().into_iter().enumerate() {
            if mode.admits(q) {
                out.push(SlotOption {
                    lambda: b.eigenvalue.clone(),
                    order: q,
                    weight: S::one() / S::factorial(q),
                    factor,
                    block: bi,
                    exponent: q,
                });
            }
        }
    }
    out
}

/// `Σ_{options} β^{(orders)}(λ's) · Π weights · F₁ A₁ F₂ ⋯ A_ζ F_{ζ+1}`.
///
/// This is the common enumerator behind GMOIs, their pattern terms and the
/// perturbation correction terms.
pub fn contract<S: Scalar>(
    beta: &MultiFunction<S>,
    options: &[Vec<SlotOption<S>>],
    args: &[Matrix<S>],
    budget: Option<u64>,
) -> Result<Matrix<S>> {
    if options.len() != args.len() + 1 {
        return Err(GmoiError::DimensionMismatch { expected: args.len() + 1, found: options.len() });
    }
    if beta.arity() != options.len() {
        return Err(GmoiError::DimensionMismatch { expected: options.len(), found: beta.arity() });
    }
    let n = args
        .first()
        .map(|a| a.dim())
        .or_else(|| options.iter().flat_map(|o| o.first()).map(|o| o.factor.dim()).next())
        .unwrap_or(0);
    let terms: u128 = options.iter().map(|o| o.len() as u128).product();
    check_budget(terms, budget)?;
    let mut acc = Matrix::zeros(n);
    if terms == 0 {
        return Ok(acc);
    }
    let mut lambdas = Vec::with_capacity(options.len());
    let mut orders = Vec::with_capacity(options.len());
    descend(beta, options, args, 0, &Matrix::identity(n), S::one(), &mut lambdas, &mut orders, &mut acc)?;
    Ok(acc)
}

#[allow(clippy::too_many_arguments)]
fn descend<S: Scalar>(
    beta: &MultiFunction<S>,
    options: &[Vec<SlotOption<S>>],
    args: &[Matrix<S>],
    slot: usize,
    left: &Matrix<S>,
    weight: S,
    lambdas: &mut Vec<S>,
    orders: &mut Vec<usize>,
    acc: &mut Matrix<S>,
) -> Result<()> {
    let last = slot + 1 == options.len();
    for opt in &options[slot] {
        let mut prod = if slot == 0 { opt.factor.clone() } else { left * &opt.factor };
        if S::EXACT && prod.is_zero() {
            continue;
        }
        if !last {
            prod = &prod * &args[slot];
        }
        lambdas.push(opt.lambda.clone());
        orders.push(opt.order);
        let w = weight.clone() * opt.weight.clone();
        if last {
            let coeff = beta.partial(orders, lambdas)? * w;
            acc.add_scaled(&coeff, &prod);
        } else {
            descend(beta, options, args, slot + 1, &prod, w, lambdas, orders, acc)?;
        }
        lambdas.pop();
        orders.pop();
    }
    Ok(())
}

/// Options of every slot of a problem, after intersecting with `extra` modes.
fn problem_options<S: Scalar>(problem: &GmoiProblem<S>, extra: Option<&[SlotMode]>) -> Option<Vec<Vec<SlotOption<S>>>> {
    let mut out = Vec::with_capacity(problem.params.len());
    for (j, p) in problem.params.iter().enumerate() {
        let mode = match extra {
            Some(e) => p.mode.meet(e[j])?,
            None => p.mode,
        };
        out.push(slot_options(&p.decomposition, mode));
    }
    Some(out)
}

/// Number of enumerated terms of a problem.
pub fn term_count<S: Scalar>(problem: &GmoiProblem<S>) -> u128 {
    problem
        .params
        .iter()
        .map(|p| slot_options(&p.decomposition, p.mode).len() as u128)
        .product()
}

/// Evaluates the GMOI.
pub fn eval_gmoi<S: Scalar>(problem: &GmoiProblem<S>) -> Result<Matrix<S>> {
    let options = problem_options(problem, None).expect("no extra restriction");
    contract(&problem.beta, &options, &problem.args, problem.budget)
}

/// Classical MOI `Σ β(λ) P Y P ⋯ Y P`; every parameter must be diagonalizable.
pub fn eval_classical_moi<S: Scalar>(problem: &GmoiProblem<S>) -> Result<Matrix<S>> {
    for (j, p) in problem.params.iter().enumerate() {
        if let Some(b) = p.decomposition.blocks.iter().find(|b| b.order > 1) {
            return Err(GmoiError::InvalidInput(format!(
                "classical MOI requires diagonalizable parameters; parameter {} has a Jordan block of order {}",
                j + 1,
                b.order
            )));
        }
        if p.mode == SlotMode::Nilpotent {
            return Ok(Matrix::zeros(problem.dim()));
        }
    }
    eval_gmoi(problem)
}

/// Binary selector `B(i′, width)`: position 1 is the leftmost (most
/// significant) bit; a set bit marks a slot contributing nilpotent powers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NilpotentPattern {
    pub index: usize,
    pub width: usize,
    /// `bits[j − 1]` is the bit at position `j`.
    pub bits: Vec<bool>,
}

impl NilpotentPattern {
    /// One-based positions of set bits (`Ind(Ψ̃)`).
    pub fn selected_positions(&self) -> Vec<usize> {
        self.bits.iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j + 1).collect()
    }

    /// Slot modes induced by the pattern.
    pub fn modes(&self) -> Vec<SlotMode> {
        self.bits
            .iter()
            .map(|&b| if b { SlotMode::Nilpotent } else { SlotMode::Projector })
            .collect()
    }

    /// Exponent slots as in `(q₁, 0, q₃)`.
    pub fn exponent_label(&self) -> String {
        let parts: Vec<String> = self
            .bits
            .iter()
            .enumerate()
            .map(|(j, &b)| if b { format!("q{}", j + 1) } else { "0".into() })
            .collect();
        format!("({})", parts.join(","))
    }

    pub fn bit_string(&self) -> String {
        self.bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

/// `B(i′, width)` with range check.
pub fn binary_selector(index: usize, width: usize) -> Result<NilpotentPattern> {
    if width == 0 || width >= usize::BITS as usize || index >= (1usize << width) {
        return Err(GmoiError::InvalidInput(format!("pattern index {index} out of range for width {width}")));
    }
    let bits = (0..width).map(|j| (index >> (width - 1 - j)) & 1 == 1).collect();
    Ok(NilpotentPattern { index, width, bits })
}

/// The `2^{ζ+1}` pattern terms `A_{i′}`; `A_0` is the pure projector term.
pub fn pattern_terms<S: Scalar>(problem: &GmoiProblem<S>) -> Result<Vec<(NilpotentPattern, Matrix<S>)>> {
    let width = problem.params.len();
    check_budget(term_count(problem), problem.budget)?;
    (0..1usize << width)
        .map(|i| {
            let pat = binary_selector(i, width)?;
            let m = match problem_options(problem, Some(&pat.modes())) {
                Some(opts) => contract(&problem.beta, &opts, &problem.args, problem.budget)?,
                None => Matrix::zeros(problem.dim()),
            };
            Ok((pat, m))
        })
        .collect()
}

/// One summand of the parameter decomposition: pattern `i` (one-based) uses
/// `X_{j,N}` in slot `j` iff `⌊(i−1)/2^{j−1}⌋` is odd.
#[derive(Clone, Debug)]
pub struct ParameterSplitTerm<S> {
    pub index: usize,
    pub modes: Vec<SlotMode>,
    pub value: Matrix<S>,
}

/// Modes of parameter-decomposition pattern `i` (one-based) over `width` slots.
pub fn parameter_split_modes(i: usize, width: usize) -> Vec<SlotMode> {
    (1..=width)
        .map(|j| {
            if ((i - 1) >> (j - 1)) & 1 == 1 {
                SlotMode::Nilpotent
            } else {
                SlotMode::Projector
            }
        })
        .collect()
}

/// All `2^{ζ+1}` sub-GMOIs obtained by replacing each `X_j` by `X_{j,P}` or `X_{j,N}`.
pub fn decompose_by_parameters<S: Scalar>(problem: &GmoiProblem<S>) -> Result<Vec<ParameterSplitTerm<S>>> {
    let width = problem.params.len();
    check_budget(term_count(problem), problem.budget)?;
    (1..=1usize << width)
        .map(|i| {
            let modes = parameter_split_modes(i, width);
            let value = match problem_options(problem, Some(&modes)) {
                Some(opts) => contract(&problem.beta, &opts, &problem.args, problem.budget)?,
                None => Matrix::zeros(problem.dim()),
            };
            Ok(ParameterSplitTerm { index: i, modes, value })
        })
        .collect()
}

/// Both sides of the composition identity.
#[derive(Clone, Debug)]
pub struct CompositionReport<S> {
    /// The `(ζ+1)²`-parameter GMOI with symbol `f · Π β_i`.
    pub lhs: Matrix<S>,
    /// `T_f(T_{β₁}(Y), …, T_{β_ζ}(Y))`.
    pub rhs: Matrix<S>,
    pub residual: f64,
}

/// Evaluates both sides of the composition identity for `f` (arity `ζ+1`)
/// and `β₁ … β_ζ` (each of arity `ζ+1`) on the same parameters and arguments.
///
/// The left side uses the parameters `X₁, [X], X₂, [X], …, [X], X_{ζ+1}`
/// (with `[X] = X₁, …, X_{ζ+1}`) and the arguments `I, [Y], I` repeated
/// `ζ` times.
pub fn compose_check<S: Scalar>(
    f: &MultiFunction<S>,
    betas: &[MultiFunction<S>],
    params: &[Arc<JordanDecomposition<S>>],
    args: &[Matrix<S>],
    budget: Option<u64>,
) -> Result<CompositionReport<S>> {
    let zeta = args.len();
    if zeta == 0 {
        return Err(GmoiError::InvalidInput("composition needs ζ ≥ 1".into()));
    }
    if betas.len() != zeta {
        return Err(GmoiError::DimensionMismatch { expected: zeta, found: betas.len() });
    }
    let n = params
        .first()
        .map(|p| p.dim)
        .ok_or_else(|| GmoiError::InvalidInput("composition needs parameters".into()))?;
    // Right side.
    let inner = betas
        .iter()
        .map(|b| eval_gmoi(&GmoiProblem::new(b.clone(), params.to_vec(), args.to_vec())?.with_budget(budget)))
        .collect::<Result<Vec<_>>>()?;
    let rhs = eval_gmoi(&GmoiProblem::new(f.clone(), params.to_vec(), inner)?.with_budget(budget))?;

    // Left side.
    let stride = zeta + 2;
    let arity = (zeta + 1) * (zeta + 1);
    let mut lhs_params = Vec::with_capacity(arity);
    let mut lhs_args = Vec::with_capacity(arity - 1);
    let mut factors = vec![(f.clone(), (0..=zeta).map(|p| p * stride).collect::<Vec<_>>())];
    for p in 0..=zeta {
        lhs_params.push(params[p].clone());
        if p == zeta {
            break;
        }
        lhs_args.push(Matrix::identity(n));
        let start = p * stride + 1;
        for (q, x) in params.iter().enumerate() {
            lhs_params.push(x.clone());
            if q < zeta {
                lhs_args.push(args[q].clone());
            }
        }
        lhs_args.push(Matrix::identity(n));
        factors.push((betas[p].clone(), (start..start + zeta + 1).collect()));
    }
    let symbol = MultiFunction::separable_product(arity, factors)?;
    let lhs = eval_gmoi(&GmoiProblem::new(symbol, lhs_params, lhs_args)?.with_budget(budget))?;
    let residual = (&lhs - &rhs).frobenius_norm();
    Ok(CompositionReport { lhs, rhs, residual })
}

/// JSON view of pattern terms.
pub fn pattern_terms_json<S: Scalar>(terms: &[(NilpotentPattern, Matrix<S>)], include_matrices: bool) -> Value {
    Value::Array(
        terms
            .iter()
            .map(|(p, m)| {
                let mut v = json!({
                    "index": p.index,
                    "bits": p.bit_string(),
                    "exponents": p.exponent_label(),
                    "frobenius_norm": m.frobenius_norm(),
                });
                if include_matrices {
                    v["matrix"] = m.to_json();
                }
                v
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::CQ;

    type Q = Matrix<CQ>;

    fn q(rows: &[&[i64]]) -> Q {
        Q::from_i64_rows(rows).unwrap()
    }

    fn dec(rows: &[&[i64]]) -> Arc<JordanDecomposition<CQ>> {
        Arc::new(JordanDecomposition::auto(&q(rows), 1e-9).unwrap())
    }

    #[test]
    fn selector_matches_positional_convention() {
        let p = binary_selector(0, 3).unwrap();
        assert_eq!(p.bits, vec![false, false, false]);
        let p = binary_selector(5, 3).unwrap();
        assert_eq!(p.bits, vec![true, false, true]);
        assert_eq!(p.selected_positions(), vec![1, 3]);
        assert_eq!(p.exponent_label(), "(q1,0,q3)");
        assert_eq!(binary_selector(3, 2).unwrap().exponent_label(), "(q1,q2)");
        assert!(binary_selector(8, 3).is_err());
    }

    #[test]
    fn daleckii_krein_on_diagonal_parameter() {
        let x = dec(&[&[1, 0], &[0, 2]]);
        let y = q(&[&[5, 7], &[11, 13]]);
        let beta = MultiFunction::polynomial_i64(&[0, 0, 1]).lift(1).unwrap();
        let p = GmoiProblem::new(beta, vec![x.clone(), x], vec![y]).unwrap();
        let t = eval_classical_moi(&p).unwrap();
        assert_eq!(t, q(&[&[10, 21], &[33, 52]]));
    }

    #[test]
    fn first_derivative_of_square_on_jordan_block() {
        let x = dec(&[&[2, 1], &[0, 2]]);
        let xm = x.reconstruct();
        let y = q(&[&[1, -2], &[3, 5]]);
        let beta = MultiFunction::polynomial_i64(&[0, 0, 1]).lift(1).unwrap();
        let p = GmoiProblem::new(beta, vec![x.clone(), x], vec![y.clone()]).unwrap();
        assert_eq!(eval_gmoi(&p).unwrap(), &(&xm * &y) + &(&y * &xm));
        assert!(eval_classical_moi(&p).is_err());
    }

    #[test]
    fn sums_of_patterns_and_parameter_splits() {
        let x1 = dec(&[&[2, 1, 0], &[0, 2, 1], &[0, 0, 2]]);
        let x2 = dec(&[&[1, 1, 0], &[0, 1, 0], &[0, 0, 3]]);
        let x3 = dec(&[&[0, 0, 1], &[0, 0, 0], &[0, 0, 0]]);
        let y1 = q(&[&[1, 2, 0], &[0, 1, -1], &[3, 0, 1]]);
        let y2 = q(&[&[0, 1, 1], &[1, 0, 2], &[-1, 1, 0]]);
        let beta = MultiFunction::polynomial_i64(&[1, 0, 2, 1]).lift(2).unwrap();
        let p = GmoiProblem::new(beta, vec![x1, x2, x3], vec![y1, y2]).unwrap();
        let t = eval_gmoi(&p).unwrap();
        let sum_a = pattern_terms(&p).unwrap().iter().fold(Q::zeros(3), |acc, (_, m)| &acc + m);
        assert_eq!(sum_a, t);
        let sum_split = decompose_by_parameters(&p).unwrap().iter().fold(Q::zeros(3), |acc, s| &acc + &s.value);
        assert_eq!(sum_split, t);
    }

    #[test]
    fn projector_restriction_equals_semisimple_parameter() {
        let x = dec(&[&[2, 1, 0], &[0, 2, 0], &[0, 0, -1]]);
        let xp = Arc::new(x.semisimple_decomposition().unwrap());
        let y = q(&[&[1, 2, 0], &[0, 1, -1], &[3, 0, 1]]);
        let beta = MultiFunction::polynomial_i64(&[0, 1, 0, 1]).lift(1).unwrap();
        let restricted = GmoiProblem::new(beta.clone(), vec![x.clone(), x.clone()], vec![y.clone()])
            .unwrap()
            .with_modes(&[SlotMode::Projector, SlotMode::Full]);
        let explicit = GmoiProblem::new(beta, vec![xp, x], vec![y]).unwrap();
        assert_eq!(eval_gmoi(&restricted).unwrap(), eval_gmoi(&explicit).unwrap());
    }

    #[test]
    fn composition_identity_holds_exactly() {
        let x1 = dec(&[&[2, 1], &[0, 2]]);
        let x2 = dec(&[&[1, 0], &[0, -1]]);
        let x3 = dec(&[&[0, 1], &[0, 0]]);
        let y = vec![q(&[&[1, 2], &[3, 4]]), q(&[&[0, 1], &[-1, 2]])];
        let f = MultiFunction::polynomial_i64(&[0, 1, 1]).lift(2).unwrap();
        let b1 = MultiFunction::polynomial_i64(&[1, 0, 0, 1]).lift(2).unwrap();
        let b2 = MultiFunction::sum_of_variables(3);
        let r = compose_check(&f, &[b1, b2], &[x1, x2, x3], &y, None).unwrap();
        assert_eq!(r.lhs, r.rhs);
    }

    #[test]
    fn budget_is_enforced() {
        let x = dec(&[&[2, 1], &[0, 2]]);
        let p = GmoiProblem::new(MultiFunction::sum_of_variables(2), vec![x.clone(), x], vec![Q::identity(2)])
            .unwrap()
            .with_budget(Some(3));
        assert!(matches!(eval_gmoi(&p), Err(GmoiError::BudgetExceeded { terms: 4, budget: 3 })));
    }
}
