//! Norm bounds, Lipschitz estimates, the perturbation formula and the
//! continuity experiment.
//!
//! # Norm bounds
//!
//! `T = Σ_{i′} A_{i′}` over the `2^{ζ+1}` nilpotent patterns. The upper bound
//! of a pattern is
//!
//! ```text
//!   ‖A_{i′}‖_up = Σ_{selected blocks, 1 ≤ q ≤ m−1} max_{λ tuples} |β^{(q)}(λ)/q!| · Π_ς Z_ς
//! ```
//!
//! with `Z_ς = ‖N^{q_ς}‖‖Y_ς‖` for selected slots, `Z_ς = ‖Y_ς‖` otherwise
//! and `‖Y_{ζ+1}‖ := 1`. The maximum runs over all tuples of distinct
//! eigenvalues of the parameters. The bound folds `Σ P = I` in unselected
//! slots, which is only norm-preserving for orthogonal spectral projectors;
//! for oblique projectors it can fail (see the crate tests).
//!
//! # Perturbation formula
//!
//! For a univariate `β` with divided-difference lifts `β^{[ζ]}`, `β^{[ζ+1]}`
//! and `C, D` inserted before `X_j`,
//!
//! ```text
//!   T_{β^{[ζ+1]}}^{…,X_{j−1},C,D,X_j,…}(…,Y_{j−1},C−D,Y_j,…)
//!     = T_{β^{[ζ]}}^{…,C,…}(Y) − T_{β^{[ζ]}}^{…,D,…}(Y) + 𝔛̄ + Σ_flanks T_{β^{[ζ+1]}}^{…,C_N,D_N,…}(…,C−D,…)
//! ```
//!
//! where `𝔛̄` sums one correction per flank-mode combination and per
//! `C_P,D_P` / `C_N,D_N` pairing. With `g = β^{[ζ+1]}` (flank and outer
//! slots enumerated as in a GMOI) the corrections are
//!
//! ```text
//!   𝔛^{…,C_P,D_P,…} = Σ g(λ_c,λ_d) (N_c P_d − P_c N_d)
//!   𝔛^{…,C_N,D_N,…} = Σ [ g(λ_c,λ_d) (P_c N_d − N_c P_d)
//!                         − Σ_{a≥1} g^{(a,0)}/a! N_c^a N_d + Σ_{b≥1} g^{(0,b)}/b! N_c N_d^b ]
//! ```
//!
//! ([`CorrectionForm::Derived`]). They are exactly what the pairings
//! `T(C_P,D_P)(C−D) = T(C_P) − T(D_P) + 𝔛^{PP}` and
//! `T(C_N,D_P)(C−D) + T(C_P,D_N)(C−D) = T(C_N) − T(D_N) + 𝔛^{NN}` require.
//! [`CorrectionForm::Displayed`] transcribes the published closed forms
//! literally (exponent sums `1 ≤ q ≤ m − 1`); they agree with the derived
//! forms only when all nilpotent parts vanish.

use std::sync::Arc;

use itertools::Itertools;
use serde_json::{json, Value};

use crate::calculus::MultiFunction;
use crate::error::{GmoiError, Result};
use crate::gmoi::{
    check_budget, contract, eval_gmoi, pattern_terms, slot_options, GmoiProblem, Parameter, SlotMode, SlotOption,
};
use crate::jordan::JordanDecomposition;
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// `max[0, n₁ − Σ_{i≥2} n_i]` after sorting in decreasing order.
pub fn reverse_triangle_lower(norms: &[f64]) -> f64 {
    let mut sorted = norms.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    match sorted.split_first() {
        Some((first, rest)) => (first - rest.iter().sum::<f64>()).max(0.0),
        None => 0.0,
    }
}

/// Upper and lower Frobenius-norm estimates of a GMOI.
#[derive(Clone, Debug, PartialEq)]
pub struct NormBoundReport {
    /// `‖A_{i′}‖_F` for `i′ = 0, …, 2^{ζ+1} − 1`.
    pub per_pattern_norms: Vec<f64>,
    /// `‖A_{i′}‖_up` in the same order.
    pub per_pattern_upper: Vec<f64>,
    pub upper_bound: f64,
    pub sorted_lower: f64,
    /// `min|β|·‖ΠY‖ − Σ_{i′≥1} ‖A_{i′}‖`, present only when the dominance
    /// condition holds.
    pub min_beta_lower: Option<f64>,
    pub condition_holds: bool,
    /// `‖T‖_F` itself.
    pub norm: f64,
}

impl NormBoundReport {
    pub fn to_json(&self) -> Value {
        json!({
            "perPatternNorms": self.per_pattern_norms,
            "perPatternUpper": self.per_pattern_upper,
            "upperBound": self.upper_bound,
            "sortedLower": self.sorted_lower,
            "minBetaLower": self.min_beta_lower,
            "conditionHolds": self.condition_holds,
            "norm": self.norm,
        })
    }
}

/// Distinct eigenvalues of a decomposition (canonical order).
fn distinct_eigenvalues<S: Scalar>(j: &JordanDecomposition<S>) -> Vec<S> {
    let mut out: Vec<S> = Vec::new();
    for b in &j.blocks {
        if !out.contains(&b.eigenvalue) {
            out.push(b.eigenvalue.clone());
        }
    }
    out
}

/// `max` (or `min`) of `|β^{(orders)}(λ)| / Π orders!` over all eigenvalue tuples.
fn extremal_partial<S: Scalar>(
    beta: &MultiFunction<S>,
    spectra: &[Vec<S>],
    orders: &[usize],
    budget: Option<u64>,
    take_max: bool,
) -> Result<f64> {
    check_budget(spectra.iter().map(|s| s.len() as u128).product(), budget)?;
    let scale: S = orders.iter().fold(S::one(), |acc, &q| acc * S::factorial(q));
    let mut best: Option<f64> = None;
    for tuple in spectra.iter().map(|s| s.iter().cloned()).multi_cartesian_product() {
        let v = (beta.partial(orders, &tuple)? / scale.clone()).modulus();
        best = Some(match best {
            None => v,
            Some(b) if take_max => b.max(v),
            Some(b) => b.min(v),
        });
    }
    Ok(best.unwrap_or(0.0))
}

/// Pattern upper bounds `‖A_{i′}‖_up` in pattern order.
fn pattern_upper_bounds<S: Scalar>(problem: &GmoiProblem<S>) -> Result<Vec<f64>> {
    let width = problem.params.len();
    let spectra: Vec<Vec<S>> = problem.params.iter().map(|p| distinct_eigenvalues(&p.decomposition)).collect();
    let y_norms: Vec<f64> = (0..width)
        .map(|s| problem.args.get(s).map_or(1.0, |y| y.frobenius_norm()))
        .collect();
    let mut out = Vec::with_capacity(1 << width);
    for i in 0..1usize << width {
        let pattern = crate::gmoi::binary_selector(i, width)?;
        let modes = pattern.modes();
        if problem.params.iter().zip(&modes).any(|(p, &m)| p.mode.meet(m).is_none()) {
            out.push(0.0);
            continue;
        }
        // Per selected slot: list of (q, ‖N^q‖) over blocks and exponents.
        let choices: Vec<Vec<(usize, f64)>> = problem
            .params
            .iter()
            .zip(&pattern.bits)
            .map(|(p, &sel)| {
                if sel {
                    p.decomposition
                        .blocks
                        .iter()
                        .flat_map(|b| (1..b.order).map(move |q| (q, b.factor(q).map_or(0.0, |m| m.frobenius_norm()))))
                        .collect()
                } else {
                    vec![(0, 1.0)]
                }
            })
            .collect();
        let mut total = 0.0;
        for combo in choices.iter().map(|c| c.iter().copied()).multi_cartesian_product() {
            let orders: Vec<usize> = combo.iter().map(|&(q, _)| q).collect();
            let factor: f64 = combo.iter().map(|&(_, n)| n).product::<f64>() * y_norms.iter().product::<f64>();
            if factor == 0.0 {
                continue;
            }
            total += extremal_partial(&problem.beta, &spectra, &orders, problem.budget, true)? * factor;
        }
        out.push(total);
    }
    Ok(out)
}

/// Upper bound, sorted lower bound and (when applicable) the `min|β|` lower bound.
pub fn norm_bounds<S: Scalar>(problem: &GmoiProblem<S>) -> Result<NormBoundReport> {
    let terms = pattern_terms(problem)?;
    let n = problem.dim();
    let mut total = Matrix::<S>::zeros(n);
    for (_, m) in &terms {
        total = &total + m;
    }
    let per_pattern_norms: Vec<f64> = terms.iter().map(|(_, m)| m.frobenius_norm()).collect();
    let per_pattern_upper = pattern_upper_bounds(problem)?;
    let upper_bound = per_pattern_upper.iter().sum();
    let sorted_lower = reverse_triangle_lower(&per_pattern_norms);

    let spectra: Vec<Vec<S>> = problem.params.iter().map(|p| distinct_eigenvalues(&p.decomposition)).collect();
    let min_beta = extremal_partial(&problem.beta, &spectra, &vec![0; spectra.len()], problem.budget, false)?;
    let prod_y = crate::matrix::product(n, problem.args.iter()).frobenius_norm();
    let rest: f64 = per_pattern_norms.iter().skip(1).sum();
    let condition_holds = min_beta * prod_y >= rest;
    Ok(NormBoundReport {
        per_pattern_norms,
        per_pattern_upper,
        upper_bound,
        sorted_lower,
        min_beta_lower: condition_holds.then_some(min_beta * prod_y - rest),
        condition_holds,
        norm: total.frobenius_norm(),
    })
}

/// Norm report focused on the upper bound (same content as [`norm_bounds`]).
pub fn upper_bound<S: Scalar>(problem: &GmoiProblem<S>) -> Result<NormBoundReport> {
    norm_bounds(problem)
}

/// Norm report focused on the lower bounds (same content as [`norm_bounds`]).
pub fn lower_bound<S: Scalar>(problem: &GmoiProblem<S>) -> Result<NormBoundReport> {
    norm_bounds(problem)
}

/// Result of a Lipschitz check.
#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzReport {
    /// `‖T(Y) − T(Y′)‖_F`.
    pub actual: f64,
    /// `Σ_i Υ_i Π_{j<i}‖Y′_j‖ ‖Y_i − Y′_i‖ Π_{j>i}‖Y_j‖`.
    pub bound: f64,
    /// The telescoped summands of the bound.
    pub terms: Vec<f64>,
    /// `Υ_i` (absent when the norm product vanishes).
    pub upsilon: Vec<Option<f64>>,
}

impl LipschitzReport {
    pub fn to_json(&self) -> Value {
        json!({ "actual": self.actual, "bound": self.bound, "terms": self.terms, "upsilon": self.upsilon })
    }
}

/// Compares `‖T(Y) − T(Y′)‖` with the telescoped upper bound.
pub fn lipschitz_check<S: Scalar>(problem: &GmoiProblem<S>, args: &[Matrix<S>], args_prime: &[Matrix<S>]) -> Result<LipschitzReport> {
    let zeta = problem.zeta();
    for a in [args, args_prime] {
        if a.len() != zeta {
            return Err(GmoiError::DimensionMismatch { expected: zeta, found: a.len() });
        }
    }
    let t = eval_gmoi(&problem.with_args(args.to_vec())?)?;
    let t_prime = eval_gmoi(&problem.with_args(args_prime.to_vec())?)?;
    let actual = (&t - &t_prime).frobenius_norm();
    let mut terms = Vec::with_capacity(zeta);
    let mut upsilon = Vec::with_capacity(zeta);
    for i in 0..zeta {
        let mut mixed: Vec<Matrix<S>> = args_prime[..i].to_vec();
        mixed.push(&args[i] - &args_prime[i]);
        mixed.extend_from_slice(&args[i + 1..]);
        let scale: f64 = mixed.iter().map(|m| m.frobenius_norm()).product();
        let up: f64 = pattern_upper_bounds(&problem.with_args(mixed)?)?.iter().sum();
        terms.push(up);
        upsilon.push((scale > 0.0).then(|| up / scale));
    }
    Ok(LipschitzReport { actual, bound: terms.iter().sum(), terms, upsilon })
}

/// Which closed form to use for the correction terms `𝔛`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CorrectionForm {
    /// Forms that make every pairing hold identically.
    #[default]
    Derived,
    /// Literal transcription of the published closed forms.
    Displayed,
}

impl CorrectionForm {
    pub fn label(self) -> &'static str {
        match self {
            CorrectionForm::Derived => "derived",
            CorrectionForm::Displayed => "displayed",
        }
    }
}

/// Both sides of the perturbation formula and its ingredients.
#[derive(Clone, Debug)]
pub struct PerturbationReport<S> {
    pub lhs: Matrix<S>,
    /// `T_{β^{[ζ]}}(…C…) − T_{β^{[ζ]}}(…D…)`.
    pub rhs_main: Matrix<S>,
    /// Named correction terms `𝔛`.
    pub corrections: Vec<(String, Matrix<S>)>,
    /// Named trailing `β^{[ζ+1]}` GMOIs with `C_N, D_N`.
    pub trailing: Vec<(String, Matrix<S>)>,
    pub rhs: Matrix<S>,
    pub residual: f64,
    /// `‖𝔛 − (value required by its pairing)‖` per correction term.
    pub pairing_residuals: Vec<(String, f64)>,
    pub form: CorrectionForm,
}

impl<S: Scalar> PerturbationReport<S> {
    /// Sum of all correction terms (`𝔛̄`).
    pub fn correction_total(&self) -> Matrix<S> {
        let n = self.lhs.dim();
        self.corrections.iter().fold(Matrix::zeros(n), |acc, (_, m)| &acc + m)
    }

    pub fn max_pairing_residual(&self) -> f64 {
        self.pairing_residuals.iter().map(|(_, r)| *r).fold(0.0, f64::max)
    }

    pub fn to_json(&self, include_matrices: bool) -> Value {
        let named = |items: &[(String, Matrix<S>)]| -> Value {
            Value::Array(
                items
                    .iter()
                    .map(|(name, m)| {
                        let mut v = json!({ "name": name, "frobenius_norm": m.frobenius_norm() });
                        if include_matrices {
                            v["matrix"] = m.to_json();
                        }
                        v
                    })
                    .collect(),
            )
        };
        let mut v = json!({
            "form": self.form.label(),
            "residual": self.residual,
            "corrections": named(&self.corrections),
            "trailing": named(&self.trailing),
            "pairingResiduals": self.pairing_residuals.iter().map(|(n, r)| json!({"name": n, "residual": r})).collect::<Vec<_>>(),
            "lhsNorm": self.lhs.frobenius_norm(),
            "rhsNorm": self.rhs.frobenius_norm(),
        });
        if include_matrices {
            v["lhs"] = self.lhs.to_json();
            v["rhsMain"] = self.rhs_main.to_json();
            v["rhs"] = self.rhs.to_json();
        }
        v
    }
}

/// GDOI case: `T_{β^{[2]}}^{C,D,X₁}(C−D, Y)` against its expansion.
pub fn perturbation_check_gdoi<S: Scalar>(
    beta: &MultiFunction<S>,
    c: Arc<JordanDecomposition<S>>,
    d: Arc<JordanDecomposition<S>>,
    x1: Arc<JordanDecomposition<S>>,
    y: &Matrix<S>,
    form: CorrectionForm,
    budget: Option<u64>,
) -> Result<PerturbationReport<S>> {
    perturbation_check(beta, 1, &[x1], c, d, std::slice::from_ref(y), form, budget)
}

/// General case with both flanks present: `ζ ≥ 2`, `2 ≤ j ≤ ζ`.
#[allow(clippy::too_many_arguments)]
pub fn perturbation_check_general<S: Scalar>(
    beta: &MultiFunction<S>,
    j: usize,
    params: &[Arc<JordanDecomposition<S>>],
    c: Arc<JordanDecomposition<S>>,
    d: Arc<JordanDecomposition<S>>,
    args: &[Matrix<S>],
    form: CorrectionForm,
    budget: Option<u64>,
) -> Result<PerturbationReport<S>> {
    let zeta = args.len();
    if zeta < 2 || j < 2 || j > zeta {
        return Err(GmoiError::Unsupported(format!(
            "the general perturbation check needs ζ ≥ 2 and 2 ≤ j ≤ ζ (got ζ = {zeta}, j = {j})"
        )));
    }
    perturbation_check(beta, j, params, c, d, args, form, budget)
}

/// Generic assembler: `C, D` inserted before `X_j` (`1 ≤ j ≤ ζ + 1`), with
/// `params = X₁ … X_ζ` and `args = Y₁ … Y_ζ`.
#[allow(clippy::too_many_arguments)]
pub fn perturbation_check<S: Scalar>(
    beta: &MultiFunction<S>,
    j: usize,
    params: &[Arc<JordanDecomposition<S>>],
    c: Arc<JordanDecomposition<S>>,
    d: Arc<JordanDecomposition<S>>,
    args: &[Matrix<S>],
    form: CorrectionForm,
    budget: Option<u64>,
) -> Result<PerturbationReport<S>> {
    let params: Vec<Parameter<S>> = params.iter().cloned().map(Parameter::full).collect();
    Layout::new(beta, j, &params, c, d, args, budget)?.run(form)
}

/// Perturbation check whose outer parameters carry their own slot modes
/// (`X`, `X_P` or `X_N`); a flank mode is intersected with the slot's own mode.
#[allow(clippy::too_many_arguments)]
pub fn perturbation_check_modes<S: Scalar>(
    beta: &MultiFunction<S>,
    j: usize,
    params: &[Parameter<S>],
    c: Arc<JordanDecomposition<S>>,
    d: Arc<JordanDecomposition<S>>,
    args: &[Matrix<S>],
    form: CorrectionForm,
    budget: Option<u64>,
) -> Result<PerturbationReport<S>> {
    Layout::new(beta, j, params, c, d, args, budget)?.run(form)
}

/// Sum of all correction terms `𝔛` of the perturbation formula for the given
/// layout, without evaluating the remaining sides of the identity.
#[allow(clippy::too_many_arguments)]
pub fn correction_sum<S: Scalar>(
    beta: &MultiFunction<S>,
    j: usize,
    params: &[Parameter<S>],
    c: Arc<JordanDecomposition<S>>,
    d: Arc<JordanDecomposition<S>>,
    args: &[Matrix<S>],
    form: CorrectionForm,
    budget: Option<u64>,
) -> Result<Matrix<S>> {
    let layout = Layout::new(beta, j, params, c, d, args, budget)?;
    let mut acc = Matrix::zeros(layout.n);
    for flanks in layout.flank_combos() {
        for nilpotent in [false, true] {
            acc = &acc + &layout.correction(flanks, nilpotent, form)?;
        }
    }
    Ok(acc)
}

/// Slot layout of the perturbation formula.
struct Layout<S> {
    lift: MultiFunction<S>,
    lift_next: MultiFunction<S>,
    /// One-based insertion slot.
    j: usize,
    params: Vec<Parameter<S>>,
    c: Arc<JordanDecomposition<S>>,
    d: Arc<JordanDecomposition<S>>,
    args: Vec<Matrix<S>>,
    diff: Matrix<S>,
    n: usize,
    budget: Option<u64>,
}

/// Flank modes `(X_{j−1}, X_j)`; `None` when that flank does not exist.
type Flanks = (Option<SlotMode>, Option<SlotMode>);

impl<S: Scalar> Layout<S> {
    fn new(
        beta: &MultiFunction<S>,
        j: usize,
        params: &[Parameter<S>],
        c: Arc<JordanDecomposition<S>>,
        d: Arc<JordanDecomposition<S>>,
        args: &[Matrix<S>],
        budget: Option<u64>,
    ) -> Result<Self> {
        if beta.arity() != 1 {
            return Err(GmoiError::InvalidInput(format!(
                "the perturbation formula needs a univariate β (got arity {})",
                beta.arity()
            )));
        }
        let zeta = args.len();
        if zeta == 0 {
            return Err(GmoiError::InvalidInput("the perturbation formula needs ζ ≥ 1".into()));
        }
        if params.len() != zeta {
            return Err(GmoiError::DimensionMismatch { expected: zeta, found: params.len() });
        }
        if j == 0 || j > zeta + 1 {
            return Err(GmoiError::Unsupported(format!("insertion slot j = {j} outside 1..={}", zeta + 1)));
        }
        let n = c.dim;
        for dim in params.iter().map(|p| p.decomposition.dim).chain(args.iter().map(|a| a.dim())).chain([d.dim]) {
            if dim != n {
                return Err(GmoiError::DimensionMismatch { expected: n, found: dim });
            }
        }
        let diff = &c.reconstruct() - &d.reconstruct();
        Ok(Self {
            lift: beta.lift(zeta)?,
            lift_next: beta.lift(zeta + 1)?,
            j,
            params: params.to_vec(),
            c,
            d,
            args: args.to_vec(),
            diff,
            n,
            budget,
        })
    }

    fn zeta(&self) -> usize {
        self.args.len()
    }

    fn flank_combos(&self) -> Vec<Flanks> {
        let both = [SlotMode::Projector, SlotMode::Nilpotent];
        let left: Vec<Option<SlotMode>> = if self.j >= 2 { both.iter().map(|&m| Some(m)).collect() } else { vec![None] };
        let right: Vec<Option<SlotMode>> = if self.j <= self.zeta() { both.iter().map(|&m| Some(m)).collect() } else { vec![None] };
        left.into_iter().cartesian_product(right).collect()
    }

    /// Mode of `X_{index+1}` under the given flanks; `None` when the flank
    /// mode and the slot's own mode select nothing in common.
    fn mode_of(&self, index: usize, flanks: Flanks) -> Option<SlotMode> {
        let own = self.params[index].mode;
        let flank = if self.j >= 2 && index == self.j - 2 {
            flanks.0
        } else if index + 1 == self.j {
            flanks.1
        } else {
            None
        };
        match flank {
            Some(m) => own.meet(m),
            None => Some(own),
        }
    }

    /// Options for `X₁ … X_{j−1}, [middle…], X_j … X_ζ`.
    fn options(&self, flanks: Flanks, middle: Vec<Vec<SlotOption<S>>>) -> Option<Vec<Vec<SlotOption<S>>>> {
        let outer = |p: usize| Some(slot_options(&self.params[p].decomposition, self.mode_of(p, flanks)?));
        let mut out = Vec::with_capacity(self.zeta() + middle.len());
        for p in 0..self.j - 1 {
            out.push(outer(p)?);
        }
        out.extend(middle);
        for p in self.j - 1..self.zeta() {
            out.push(outer(p)?);
        }
        Some(out)
    }

    /// `Y₁ … Y_{j−1}, [middle], Y_j … Y_ζ`.
    fn long_args(&self, middle: &Matrix<S>) -> Vec<Matrix<S>> {
        let mut out = self.args[..self.j - 1].to_vec();
        out.push(middle.clone());
        out.extend_from_slice(&self.args[self.j - 1..]);
        out
    }

    fn long_contract(&self, flanks: Flanks, c_opts: Vec<SlotOption<S>>, d_opts: Vec<SlotOption<S>>) -> Result<Matrix<S>> {
        let Some(opts) = self.options(flanks, vec![c_opts, d_opts]) else {
            return Ok(Matrix::zeros(self.n));
        };
        contract(&self.lift_next, &opts, &self.long_args(&Matrix::identity(self.n)), self.budget)
    }

    fn short_contract(&self, flanks: Flanks, merged: Vec<SlotOption<S>>) -> Result<Matrix<S>> {
        let Some(opts) = self.options(flanks, vec![merged]) else {
            return Ok(Matrix::zeros(self.n));
        };
        contract(&self.lift, &opts, &self.args, self.budget)
    }

    fn params_with(&self, flanks: Flanks, middle: &[(Arc<JordanDecomposition<S>>, SlotMode)]) -> Option<Vec<Parameter<S>>> {
        let wrap = |p: usize| Some(self.params[p].with_mode(self.mode_of(p, flanks)?));
        let mut out: Vec<Parameter<S>> = (0..self.j - 1).map(wrap).collect::<Option<_>>()?;
        out.extend(middle.iter().map(|(dec, mode)| Parameter { decomposition: dec.clone(), mode: *mode }));
        for p in self.j - 1..self.zeta() {
            out.push(wrap(p)?);
        }
        Some(out)
    }

    /// `T_{β^{[ζ+1]}}(…, C_{mc}, D_{md}, …)(…, C − D, …)`.
    fn long_gmoi(&self, flanks: Flanks, mc: SlotMode, md: SlotMode) -> Result<Matrix<S>> {
        let Some(params) = self.params_with(flanks, &[(self.c.clone(), mc), (self.d.clone(), md)]) else {
            return Ok(Matrix::zeros(self.n));
        };
        let problem = GmoiProblem::with_parameters(self.lift_next.clone(), params, self.long_args(&self.diff))?;
        eval_gmoi(&problem.with_budget(self.budget))
    }

    /// `T_{β^{[ζ]}}(…, Z_m, …)(Y)`.
    fn short_gmoi(&self, flanks: Flanks, z: &Arc<JordanDecomposition<S>>, m: SlotMode) -> Result<Matrix<S>> {
        let Some(params) = self.params_with(flanks, &[(z.clone(), m)]) else {
            return Ok(Matrix::zeros(self.n));
        };
        let problem = GmoiProblem::with_parameters(self.lift.clone(), params, self.args.clone())?;
        eval_gmoi(&problem.with_budget(self.budget))
    }

    fn label(&self, flanks: Flanks, cd: &str) -> String {
        let mut parts = Vec::new();
        if let Some(m) = flanks.0 {
            parts.push(format!("X{}_{}", self.j - 1, mode_letter(m)));
        }
        parts.push(format!("C_{cd}"));
        parts.push(format!("D_{cd}"));
        if let Some(m) = flanks.1 {
            parts.push(format!("X{}_{}", self.j, mode_letter(m)));
        }
        format!("𝔛^{{{}}}", parts.join(","))
    }

    fn correction(&self, flanks: Flanks, nilpotent: bool, form: CorrectionForm) -> Result<Matrix<S>> {
        let (c, d) = (&*self.c, &*self.d);
        let mut acc = Matrix::zeros(self.n);
        let mut add = |m: Matrix<S>| acc = &acc + &m;
        match (form, nilpotent) {
            (CorrectionForm::Derived, false) => {
                add(self.long_contract(flanks, nil_opts(c, one_to(1), fixed(1)), proj_opts(d, |_| S::one()))?);
                add(self.long_contract(flanks, proj_opts(c, |_| -S::one()), nil_opts(d, one_to(1), fixed(1)))?);
            }
            (CorrectionForm::Derived, true) => {
                add(self.long_contract(flanks, proj_opts(c, |_| S::one()), nil_opts(d, one_to(1), fixed(1)))?);
                add(self.long_contract(flanks, nil_opts(c, one_to(1), fixed(-1)), proj_opts(d, |_| S::one()))?);
                add(self.long_contract(flanks, nil_opts(c, all_q, taylor(-1)), nil_opts(d, one_to(1), fixed(1)))?);
                add(self.long_contract(flanks, nil_opts(c, one_to(1), fixed(1)), nil_opts(d, all_q, taylor(1)))?);
            }
            (CorrectionForm::Displayed, false) => {
                let count = |m: usize| S::from_i64(m as i64 - 1);
                add(self.long_contract(flanks, nil_opts(c, all_q, fixed(1)), proj_opts(d, count))?);
                add(self.long_contract(flanks, proj_opts(c, |m| -count(m)), nil_opts(d, all_q, fixed(1)))?);
            }
            (CorrectionForm::Displayed, true) => {
                let count = |m: usize| S::from_i64(m as i64 - 1);
                // P_c (N_c^{q_c} − N_d^{q_d}) N_d^{q_d} with g^{(0,q_d)}/q_d!.
                add(self.long_contract(flanks, nil_opts(c, all_q, fixed(1)), nil_opts(d, all_q, taylor(1)))?);
                add(self.long_contract(flanks, proj_opts(c, |m| -count(m)), squared_opts(d, taylor(1)))?);
                // N_c^{q_c} (N_c^{q_c} − N_d^{q_d}) P_d with g^{(q_c,0)}/q_c!.
                add(self.long_contract(flanks, squared_opts(c, taylor(1)), proj_opts(d, count))?);
                add(self.long_contract(flanks, nil_opts(c, all_q, taylor(-1)), nil_opts(d, all_q, fixed(1)))?);
                // ± β^{[ζ]} terms with the merged slot.
                add(self.short_contract(flanks, merged_opts(c, d, false))?);
                add(self.short_contract(flanks, merged_opts(c, d, true))?);
            }
        }
        Ok(acc)
    }

    /// The value a correction must take for its pairing to hold.
    fn pairing_target(&self, flanks: Flanks, nilpotent: bool) -> Result<Matrix<S>> {
        use SlotMode::{Nilpotent as N, Projector as P};
        let (paired, m) = if nilpotent {
            (&self.long_gmoi(flanks, N, P)? + &self.long_gmoi(flanks, P, N)?, N)
        } else {
            (self.long_gmoi(flanks, P, P)?, P)
        };
        let main = &self.short_gmoi(flanks, &self.c, m)? - &self.short_gmoi(flanks, &self.d, m)?;
        Ok(&paired - &main)
    }

    fn run(&self, form: CorrectionForm) -> Result<PerturbationReport<S>> {
        let full = (None, None);
        let lhs = self.long_gmoi(full, SlotMode::Full, SlotMode::Full)?;
        let rhs_main = &self.short_gmoi(full, &self.c, SlotMode::Full)? - &self.short_gmoi(full, &self.d, SlotMode::Full)?;
        let mut corrections = Vec::new();
        let mut pairing_residuals = Vec::new();
        let mut trailing = Vec::new();
        for flanks in self.flank_combos() {
            for nilpotent in [false, true] {
                let name = self.label(flanks, if nilpotent { "N" } else { "P" });
                let value = self.correction(flanks, nilpotent, form)?;
                let target = self.pairing_target(flanks, nilpotent)?;
                pairing_residuals.push((name.clone(), (&value - &target).frobenius_norm()));
                corrections.push((name, value));
            }
            let name = self.label(flanks, "N").replacen("𝔛", "T", 1);
            trailing.push((name, self.long_gmoi(flanks, SlotMode::Nilpotent, SlotMode::Nilpotent)?));
        }
        let mut rhs = rhs_main.clone();
        for (_, m) in corrections.iter().chain(&trailing) {
            rhs = &rhs + m;
        }
        let residual = (&lhs - &rhs).frobenius_norm();
        Ok(PerturbationReport { lhs, rhs_main, corrections, trailing, rhs, residual, pairing_residuals, form })
    }
}

fn mode_letter(m: SlotMode) -> &'static str {
    match m {
        SlotMode::Projector => "P",
        SlotMode::Nilpotent => "N",
        SlotMode::Full => "X",
    }
}

/// Exponent range selector: `(block order) -> exponents`.
type QRange = fn(usize) -> Vec<usize>;

fn all_q(m: usize) -> Vec<usize> {
    (1..m).collect()
}

fn one_to(_q: usize) -> QRange {
    |m| if m >= 2 { vec![1] } else { Vec::new() }
}

/// Weight rule `(q) -> (β derivative order, weight)`.
type WeightRule<S> = Box<dyn Fn(usize) -> (usize, S)>;

/// Order 0, constant weight `s`.
fn fixed<S: Scalar>(s: i64) -> WeightRule<S> {
    Box::new(move |_| (0, S::from_i64(s)))
}

/// Order `q`, weight `s / q!`.
fn taylor<S: Scalar>(s: i64) -> WeightRule<S> {
    Box::new(move |q| (q, S::from_i64(s) / S::factorial(q)))
}

/// Options `N^q` for each block and each `q` in `range(m)`.
fn nil_opts<S: Scalar>(j: &JordanDecomposition<S>, range: QRange, rule: WeightRule<S>) -> Vec<SlotOption<S>> {
    let mut out = Vec::new();
    for (bi, b) in j.blocks.iter().enumerate() {
        for q in range(b.order) {
            let (order, weight) = rule(q);
            if let Some(factor) = b.factor(q) {
                out.push(SlotOption { lambda: b.eigenvalue.clone(), order, weight, factor, block: bi, exponent: q });
            }
        }
    }
    out
}

/// Options `N^{2q}` (possibly zero) for `1 ≤ q ≤ m − 1`.
fn squared_opts<S: Scalar>(j: &JordanDecomposition<S>, rule: WeightRule<S>) -> Vec<SlotOption<S>> {
    let mut out = Vec::new();
    for (bi, b) in j.blocks.iter().enumerate() {
        for q in 1..b.order {
            let (order, weight) = rule(q);
            let factor = b.factor(2 * q).unwrap_or_else(|| Matrix::zeros(j.dim));
            out.push(SlotOption { lambda: b.eigenvalue.clone(), order, weight, factor, block: bi, exponent: 2 * q });
        }
    }
    out
}

/// Options `P` (order 0) with a weight depending on the block order.
fn proj_opts<S: Scalar>(j: &JordanDecomposition<S>, weight: impl Fn(usize) -> S) -> Vec<SlotOption<S>> {
    j.blocks
        .iter()
        .enumerate()
        .map(|(bi, b)| SlotOption {
            lambda: b.eigenvalue.clone(),
            order: 0,
            weight: weight(b.order),
            factor: b.projector.clone(),
            block: bi,
            exponent: 0,
        })
        .collect()
}

/// Merged-slot options of the displayed `C_N, D_N` correction:
/// `+h^{(q_d)}(λ_c)/q_d! P_c N_d^{q_d}` or `−h^{(q_c)}(λ_d)/q_c! N_c^{q_c} P_d`.
fn merged_opts<S: Scalar>(c: &JordanDecomposition<S>, d: &JordanDecomposition<S>, nil_on_c: bool) -> Vec<SlotOption<S>> {
    let mut out = Vec::new();
    for (ci, bc) in c.blocks.iter().enumerate() {
        for bd in &d.blocks {
            if nil_on_c {
                for q in 1..bc.order {
                    let factor = &bc.factor(q).expect("q < order") * &bd.projector;
                    let weight = -(S::one() / S::factorial(q));
                    out.push(SlotOption { lambda: bd.eigenvalue.clone(), order: q, weight, factor, block: ci, exponent: q });
                }
            } else {
                for q in 1..bd.order {
                    let factor = &bc.projector * &bd.factor(q).expect("q < order");
                    let weight = S::one() / S::factorial(q);
                    out.push(SlotOption { lambda: bc.eigenvalue.clone(), order: q, weight, factor, block: ci, exponent: q });
                }
            }
        }
    }
    out
}

/// Residual sequence of the continuity experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ContinuityReport {
    pub steps: Vec<f64>,
    /// `r_ℓ = ‖T(X + t_ℓ E) − T(X)‖_F`.
    pub residuals: Vec<f64>,
    /// Least-squares slope of `log r` against `log t` (absent with fewer
    /// than two positive residuals).
    pub slope: Option<f64>,
}

impl ContinuityReport {
    pub fn to_json(&self) -> Value {
        json!({ "steps": self.steps, "residuals": self.residuals, "slope": self.slope })
    }

    /// Whether `r_ℓ` strictly decreases from the (one-based) index `from` on.
    pub fn decreasing_from(&self, from: usize) -> bool {
        self.residuals.iter().skip(from.saturating_sub(1)).tuple_windows().all(|(a, b)| b < a)
    }
}

/// Evaluates `T` along `X_j + t_ℓ E_j` and reports `‖T(t_ℓ) − T(0)‖`.
///
/// Each perturbed parameter is decomposed afresh (automatic mode, the
/// tolerance of the unperturbed decomposition); a change of Jordan
/// signature is reported as [`GmoiError::StructureInstability`].
pub fn continuity_experiment<S: Scalar>(problem: &GmoiProblem<S>, directions: &[Matrix<S>], steps: &[f64]) -> Result<ContinuityReport> {
    let width = problem.params.len();
    if directions.len() != width {
        return Err(GmoiError::DimensionMismatch { expected: width, found: directions.len() });
    }
    let base = eval_gmoi(problem)?;
    let originals: Vec<Matrix<S>> = problem.params.iter().map(|p| p.decomposition.reconstruct()).collect();
    let mut residuals = Vec::with_capacity(steps.len());
    for &t in steps {
        let ts = S::from_c64(crate::scalar::C64::new(t, 0.0))?;
        let mut params = Vec::with_capacity(width);
        for ((p, x), e) in problem.params.iter().zip(&originals).zip(directions) {
            if e.is_zero() {
                params.push(p.clone());
                continue;
            }
            let mut moved = x.clone();
            moved.add_scaled(&ts, e);
            let dec = JordanDecomposition::auto(&moved, p.decomposition.tol).map_err(|err| GmoiError::StructureInstability {
                t: format!("{t}"),
                detail: format!("decomposition failed: {err}"),
            })?;
            if dec.signature() != p.decomposition.signature() {
                return Err(GmoiError::StructureInstability {
                    t: format!("{t}"),
                    detail: format!("Jordan signature changed from {:?} to {:?}", p.decomposition.signature(), dec.signature()),
                });
            }
            params.push(Parameter { decomposition: Arc::new(dec), mode: p.mode });
        }
        let moved = GmoiProblem::with_parameters(problem.beta.clone(), params, problem.args.clone())?.with_budget(problem.budget);
        residuals.push((&eval_gmoi(&moved)? - &base).frobenius_norm());
    }
    let points: Vec<(f64, f64)> = steps
        .iter()
        .zip(&residuals)
        .filter(|(&t, &r)| t > 0.0 && r > 0.0)
        .map(|(t, r)| (t.ln(), r.ln()))
        .collect();
    let slope = (points.len() >= 2).then(|| {
        let k = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
        let my = points.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    Ok(ContinuityReport { steps: steps.to_vec(), residuals, slope })
}

/// The dyadic step sequence `t_ℓ = 2^{−ℓ}`, `ℓ = 1, …, count`.
pub fn dyadic_steps(count: usize) -> Vec<f64> {
    (1..=count).map(|l| 0.5f64.powi(l as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{C64, CQ};

    type Q = Matrix<CQ>;

    fn q(rows: &[&[i64]]) -> Q {
        Q::from_i64_rows(rows).unwrap()
    }

    fn dec(rows: &[&[i64]]) -> Arc<JordanDecomposition<CQ>> {
        Arc::new(JordanDecomposition::auto(&q(rows), 1e-9).unwrap())
    }

    fn cubic() -> MultiFunction<CQ> {
        MultiFunction::polynomial_i64(&[1, -2, 0, 1, 1])
    }

    #[test]
    fn reverse_triangle_examples() {
        assert_eq!(reverse_triangle_lower(&[5.0, 1.0, 1.0]), 3.0);
        assert_eq!(reverse_triangle_lower(&[1.0, 5.0]), 4.0);
        assert_eq!(reverse_triangle_lower(&[1.0, 1.0, 1.0]), 0.0);
        assert_eq!(reverse_triangle_lower(&[]), 0.0);
    }

    #[test]
    fn constant_beta_saturates_bounds() {
        let x = dec(&[&[1, 0], &[0, 3]]);
        let y = q(&[&[1, 2], &[3, 4]]);
        let p = GmoiProblem::new(MultiFunction::constant(2, CQ::one()), vec![x.clone(), x], vec![y.clone()]).unwrap();
        let r = norm_bounds(&p).unwrap();
        let ny = y.frobenius_norm();
        assert!((r.norm - ny).abs() < 1e-12);
        assert!((r.upper_bound - ny).abs() < 1e-12);
        assert!((r.sorted_lower - ny).abs() < 1e-12);
        assert!(r.condition_holds);
        assert!((r.min_beta_lower.unwrap() - ny).abs() < 1e-12);
    }

    #[test]
    fn jordan_fixture_bounds_hold_and_scale() {
        let x1 = dec(&[&[2, 1, 0], &[0, 2, 0], &[0, 0, -1]]);
        let x2 = dec(&[&[3, 1, 0], &[0, 3, 0], &[0, 0, 3]]);
        let y = q(&[&[1, 0, 2], &[0, 1, 1], &[1, 1, 0]]);
        let beta = MultiFunction::multi_polynomial(2, vec![(CQ::from_i64(1), vec![2, 1]), (CQ::from_i64(3), vec![0, 2])]).unwrap();
        let p = GmoiProblem::new(beta, vec![x1, x2], vec![y.clone()]).unwrap();
        let r = norm_bounds(&p).unwrap();
        assert!(r.sorted_lower <= r.norm + 1e-12);
        assert!(r.norm <= r.upper_bound + 1e-12);
        let p2 = p.with_args(vec![y.scale(&CQ::from_i64(2))]).unwrap();
        let r2 = norm_bounds(&p2).unwrap();
        assert!((r2.norm - 2.0 * r.norm).abs() < 1e-9);
        assert!((r2.upper_bound - 2.0 * r.upper_bound).abs() < 1e-9);
    }

    /// The dominance premise of the `min|β|` bound can hold while the bound
    /// itself fails: here `T = 0` but `min|β|·‖Y₁Y₂‖ − Σ_{i′≥1}‖A_{i′}‖ = 2`.
    #[test]
    fn min_beta_lower_counterexample() {
        let i = dec(&[&[1, 0], &[0, 1]]);
        let x2 = dec(&[&[1, 0], &[0, 2]]);
        let beta = MultiFunction::multi_polynomial(3, vec![(CQ::from_i64(3), vec![0, 0, 0]), (CQ::from_i64(-2), vec![0, 1, 0])]).unwrap();
        let y1 = q(&[&[1, 1], &[0, 0]]);
        let y2 = q(&[&[1, 0], &[1, 0]]);
        let p = GmoiProblem::new(beta, vec![i.clone(), x2, i], vec![y1, y2]).unwrap();
        let r = norm_bounds(&p).unwrap();
        assert_eq!(r.norm, 0.0);
        assert!(r.condition_holds);
        assert!((r.min_beta_lower.unwrap() - 2.0).abs() < 1e-12);
        assert!(r.sorted_lower <= r.norm);
    }

    #[test]
    fn lipschitz_zero_and_bound() {
        let x1 = dec(&[&[2, 1], &[0, 2]]);
        let x2 = dec(&[&[1, 0], &[0, -1]]);
        let beta = MultiFunction::multi_polynomial(3, vec![(CQ::from_i64(1), vec![1, 1, 1]), (CQ::from_i64(2), vec![2, 0, 0])]).unwrap();
        let p = GmoiProblem::new(beta, vec![x1.clone(), x2, x1], vec![q(&[&[1, 0], &[0, 1]]), q(&[&[0, 1], &[1, 0]])]).unwrap();
        let ys = vec![q(&[&[1, 2], &[0, 1]]), q(&[&[0, 1], &[3, 1]])];
        let zero = lipschitz_check(&p, &ys, &ys).unwrap();
        assert_eq!((zero.actual, zero.bound), (0.0, 0.0));
        let yp = vec![q(&[&[2, 2], &[1, 1]]), q(&[&[0, -1], &[3, 2]])];
        let r = lipschitz_check(&p, &ys, &yp).unwrap();
        assert!(r.actual <= r.bound + 1e-12, "{r:?}");
        assert!(r.upsilon.iter().all(|u| u.is_some()));
    }

    fn gdoi(c: &[&[i64]], d: &[&[i64]], x: &[&[i64]], form: CorrectionForm) -> PerturbationReport<CQ> {
        let y = q(&[&[1, 2, 0], &[0, 1, -1], &[3, 0, 1]]);
        perturbation_check_gdoi(&cubic(), dec(c), dec(d), dec(x), &y, form, None).unwrap()
    }

    const JC: &[&[i64]] = &[&[2, 1, 0], &[0, 2, 0], &[0, 0, 1]];
    const JD: &[&[i64]] = &[&[1, 1, 0], &[0, 1, 1], &[0, 0, 1]];
    const JX: &[&[i64]] = &[&[0, 1, 0], &[0, 0, 0], &[1, 0, 3]];

    #[test]
    fn gdoi_perturbation_exact_with_derived_corrections() {
        let r = gdoi(JC, JD, JX, CorrectionForm::Derived);
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.max_pairing_residual(), 0.0);
        assert_eq!(r.corrections.len(), 4);
        assert_eq!(r.trailing.len(), 2);
        assert!(!r.lhs.is_zero());
    }

    #[test]
    fn perturbation_c_equals_d_is_zero() {
        let r = gdoi(JC, JC, JX, CorrectionForm::Derived);
        assert!(r.lhs.is_zero() && r.rhs.is_zero() && r.correction_total().is_zero());
        assert!(r.trailing.iter().all(|(_, m)| m.is_zero()));
    }

    #[test]
    fn diagonalizable_corrections_vanish_in_both_forms() {
        let c: &[&[i64]] = &[&[1, 2, 0], &[0, 3, 0], &[0, 0, -1]];
        let d: &[&[i64]] = &[&[2, 0, 0], &[1, 0, 0], &[0, 0, 5]];
        let x: &[&[i64]] = &[&[1, 0, 0], &[0, 2, 0], &[0, 0, 4]];
        for form in [CorrectionForm::Derived, CorrectionForm::Displayed] {
            let r = gdoi(c, d, x, form);
            assert_eq!(r.residual, 0.0);
            assert!(r.correction_total().is_zero());
        }
    }

    /// The published closed forms do not satisfy their own pairings once a
    /// parameter has a Jordan block.
    #[test]
    fn displayed_corrections_fail_on_jordan_fixtures() {
        let r = gdoi(JC, JD, JX, CorrectionForm::Displayed);
        assert!(r.residual > 1e-3);
        assert!(r.max_pairing_residual() > 1e-3);
    }

    #[test]
    fn general_perturbation_exact_for_zeta_two() {
        let x1 = dec(&[&[1, 1], &[0, 1]]);
        let x2 = dec(&[&[2, 0], &[1, 3]]);
        let c = dec(&[&[0, 1], &[0, 0]]);
        let d = dec(&[&[1, 0], &[2, -1]]);
        let args = vec![q(&[&[1, 2], &[3, 4]]), q(&[&[0, 1], &[-1, 2]])];
        let r = perturbation_check_general(&cubic(), 2, &[x1.clone(), x2.clone()], c.clone(), d.clone(), &args, CorrectionForm::Derived, None).unwrap();
        assert_eq!(r.residual, 0.0);
        assert_eq!(r.corrections.len(), 8);
        assert_eq!(r.trailing.len(), 4);
        assert!(matches!(
            perturbation_check_general(&cubic(), 1, &[x1, x2], c, d, &args, CorrectionForm::Derived, None),
            Err(GmoiError::Unsupported(_))
        ));
    }

    #[test]
    fn continuity_decays_linearly() {
        let x = Arc::new(JordanDecomposition::auto(&Matrix::<C64>::diag(&[C64::new(1.0, 0.0), C64::new(3.0, 0.0)]), 1e-9).unwrap());
        let beta = MultiFunction::<C64>::dd_lift(MultiFunction::exp(), 1).unwrap();
        let y = Matrix::<C64>::from_fn(2, |i, j| C64::new((i + 2 * j) as f64 + 1.0, 0.0));
        let p = GmoiProblem::new(beta, vec![x.clone(), x], vec![y]).unwrap();
        let e = Matrix::<C64>::from_fn(2, |i, j| C64::new(if i == j { 0.5 } else { 0.25 }, 0.0));
        let r = continuity_experiment(&p, &[e.clone(), e], &dyadic_steps(12)).unwrap();
        assert!(r.decreasing_from(3));
        assert!(r.residuals[11] <= 1e-3 * r.residuals[0]);
        assert!((r.slope.unwrap() - 1.0).abs() < 0.1);
        let zero = continuity_experiment(&p, &[Matrix::zeros(2), Matrix::zeros(2)], &dyadic_steps(3)).unwrap();
        assert!(zero.residuals.iter().all(|&r| r == 0.0));
    }
}
