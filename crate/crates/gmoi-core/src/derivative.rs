//! Higher derivatives of `t ↦ f(X + tY)` expressed through GMOIs.
//!
//! [`build_expansion`] produces the symbolic bookkeeping: integer-weighted
//! GMOI terms over parameter patterns in `{X, X_N}` and correction terms
//! `𝔛^{(i)}` over patterns that also contain the moving matrix
//! `X̃ = X + sY`. [`evaluate_expansion`] turns those terms into matrices,
//! differentiating the exactly assembled correction function numerically
//! with a central stencil and one Richardson level.
//!
//! [`fd_oracle`] and [`polynomial_oracle`] are the independent references.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde_json::{json, Value};

use crate::analysis::{correction_sum, CorrectionForm};
use crate::calculus::{central_offsets, fd_weights, FunctionKind, MultiFunction};
use crate::error::{GmoiError, Result};
use crate::gmoi::{eval_gmoi, GmoiProblem, Parameter, SlotMode};
use crate::jordan::JordanDecomposition;
use crate::matrix::Matrix;
use crate::scalar::{Scalar, C64};
use crate::spectral_map::{eval_univariate, horner};

/// Largest order accepted by [`build_expansion`].
pub const MAX_EXPANSION_ORDER: usize = 8;

/// Default step of the numerical differentiation of correction terms.
pub const DEFAULT_XSTEP: f64 = 1e-3;

/// One slot of a parameter pattern.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    /// `X`.
    X,
    /// The nilpotent part `X_N`.
    XN,
    /// The moving matrix `X̃ = X + sY`.
    XT,
    /// The nilpotent part of `X̃`.
    XTN,
}

impl Slot {
    pub fn label(self) -> &'static str {
        match self {
            Slot::X => "X",
            Slot::XN => "X_N",
            Slot::XT => "X̃",
            Slot::XTN => "X̃_N",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "X" => Ok(Slot::X),
            "X_N" | "XN" => Ok(Slot::XN),
            "X̃" | "XT" => Ok(Slot::XT),
            "X̃_N" | "XTN" => Ok(Slot::XTN),
            other => Err(GmoiError::InvalidInput(format!("unknown pattern slot '{other}'"))),
        }
    }

    pub fn is_moving(self) -> bool {
        matches!(self, Slot::XT | Slot::XTN)
    }

    pub fn mode(self) -> SlotMode {
        match self {
            Slot::X | Slot::XT => SlotMode::Full,
            Slot::XN | Slot::XTN => SlotMode::Nilpotent,
        }
    }

    /// `X → X̃`, `X_N → X̃_N`.
    fn moved(self) -> Self {
        match self {
            Slot::X | Slot::XT => Slot::XT,
            Slot::XN | Slot::XTN => Slot::XTN,
        }
    }
}

/// An ordered list of parameter slots (length `ρ ≥ 2`).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParameterPattern {
    pub slots: Vec<Slot>,
}

impl ParameterPattern {
    pub fn new(slots: Vec<Slot>) -> Result<Self> {
        if slots.len() < 2 {
            return Err(GmoiError::InvalidInput("a parameter pattern needs at least two slots".into()));
        }
        Ok(Self { slots })
    }

    /// Parses a comma-separated list such as `"X,X_N,X_N"`.
    pub fn parse(s: &str) -> Result<Self> {
        Self::new(s.split(',').map(Slot::parse).collect::<Result<_>>()?)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Number of full `X` slots.
    pub fn count_x(&self) -> usize {
        self.slots.iter().filter(|&&s| s == Slot::X).count()
    }

    /// Zero-based positions of the full `X` slots (increasing).
    pub fn positions(&self) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.slots[k] == Slot::X).collect()
    }

    /// Whether the pattern contains a nilpotent slot.
    pub fn has_nilpotent(&self) -> bool {
        self.slots.iter().any(|s| s.mode() == SlotMode::Nilpotent)
    }

    /// Whether the pattern mixes full and nilpotent slots.
    pub fn is_mixed(&self) -> bool {
        self.has_nilpotent() && self.slots.iter().any(|s| s.mode() == SlotMode::Full)
    }

    /// Position of the moving matrix `C` of a correction pattern (the first
    /// moving slot, which must be `X̃` followed by `X`).
    pub fn correction_split(&self) -> Result<usize> {
        let c = self
            .slots
            .iter()
            .position(|s| s.is_moving())
            .ok_or_else(|| GmoiError::InvalidInput(format!("correction pattern {self} has no moving slot")))?;
        let ok = self.slots[c] == Slot::XT
            && self.slots.get(c + 1) == Some(&Slot::X)
            && self.slots[c + 2..].iter().all(|s| s.is_moving());
        if !ok {
            return Err(GmoiError::InvalidInput(format!(
                "correction pattern {self} is not of the form (X|X_N)…, X̃, X, (X̃|X̃_N)…"
            )));
        }
        Ok(c)
    }
}

impl fmt::Display for ParameterPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<&str> = self.slots.iter().map(|s| s.label()).collect();
        write!(f, "{}", labels.join(","))
    }
}

/// What an expansion term evaluates.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TermKind {
    /// `T_{f^{[ρ−1]}}^{pattern}(Y, …, Y)`.
    Gmoi(ParameterPattern),
    /// `d^order/ds^order 𝔛(pattern at s)|_{s=0}`.
    Correction { pattern: ParameterPattern, order: usize },
    /// `∂_t^order ∂_s T^{pattern}` with the full slots at `X(t)` and the
    /// nilpotent slots at `X(t + s)`: the motion of nilpotent slots that the
    /// term-by-term rule treats as frozen. Only [`complete_expansion`] emits it.
    NilpotentMotion { pattern: ParameterPattern, order: usize },
}

impl TermKind {
    pub fn pattern(&self) -> &ParameterPattern {
        match self {
            TermKind::Gmoi(p) | TermKind::Correction { pattern: p, .. } | TermKind::NilpotentMotion { pattern: p, .. } => p,
        }
    }

    /// Divided-difference order of the GMOI lift (`ρ − 1`), for GMOI terms.
    pub fn dd_order(&self) -> Option<usize> {
        match self {
            TermKind::Gmoi(p) => Some(p.len() - 1),
            TermKind::Correction { .. } | TermKind::NilpotentMotion { .. } => None,
        }
    }
}

impl fmt::Display for TermKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TermKind::Gmoi(p) => write!(f, "T^{{{p}}}_{{f^[{}]}}", p.len() - 1),
            TermKind::Correction { pattern, order } => write!(f, "𝔛^({order})({pattern})"),
            TermKind::NilpotentMotion { pattern, order } => write!(f, "∂t^{order}∂s T^{{{pattern}}}_{{f^[{}]}}", pattern.len() - 1),
        }
    }
}

/// An integer-weighted term.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExpansionTerm {
    pub coefficient: i64,
    pub kind: TermKind,
}

impl fmt::Display for ExpansionTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:+} · {}", self.coefficient, self.kind)
    }
}

/// The symbolic `n`-th derivative: a sum of weighted terms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DerivativeExpansion {
    pub order: usize,
    pub terms: Vec<ExpansionTerm>,
}

impl DerivativeExpansion {
    /// Coefficient of a term (zero when absent).
    pub fn coefficient(&self, kind: &TermKind) -> i64 {
        self.terms.iter().find(|t| &t.kind == kind).map_or(0, |t| t.coefficient)
    }

    pub fn gmoi_terms(&self) -> impl Iterator<Item = &ExpansionTerm> {
        self.terms.iter().filter(|t| matches!(t.kind, TermKind::Gmoi(_)))
    }

    pub fn correction_terms(&self) -> impl Iterator<Item = &ExpansionTerm> {
        self.terms.iter().filter(|t| matches!(t.kind, TermKind::Correction { .. }))
    }

    pub fn motion_terms(&self) -> impl Iterator<Item = &ExpansionTerm> {
        self.terms.iter().filter(|t| matches!(t.kind, TermKind::NilpotentMotion { .. }))
    }

    pub fn to_json(&self) -> Value {
        let terms: Vec<Value> = self
            .terms
            .iter()
            .map(|t| {
                let (kind, order) = match &t.kind {
                    TermKind::Gmoi(p) => ("gmoi", p.len() - 1),
                    TermKind::Correction { order, .. } => ("correction", *order),
                    TermKind::NilpotentMotion { order, .. } => ("nilpotent-motion", *order),
                };
                json!({
                    "coefficient": t.coefficient,
                    "kind": kind,
                    "pattern": t.kind.pattern().slots.iter().map(|s| s.label()).collect::<Vec<_>>(),
                    "order": order,
                    "label": t.kind.to_string(),
                })
            })
            .collect();
        json!({ "order": self.order, "terms": terms })
    }
}

impl fmt::Display for DerivativeExpansion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "d^{} f(X+tY)/dt^{} at t = 0:", self.order, self.order)?;
        for t in &self.terms {
            writeln!(f, "  {t}")?;
        }
        Ok(())
    }
}

/// Builds the expansion of `dⁿ f(X + tY)/dtⁿ |_{t=0}` by differentiating
/// term by term, starting from `T_{f^{[1]}}^{X,X}(Y)`.
///
/// * GMOI terms: each full slot `X` at position `k` contributes
///   `+T^{…,X,X,…}`, `−T^{…,X_N,X_N,…}` and `−𝔛^{(1)}(…, X̃, X, moved tail)`;
///   nilpotent slots do not move, so patterns without `X` contribute nothing.
/// * Correction terms raise their derivative order by one.
///
/// Like terms are merged and cancelled terms dropped. Terms are ordered with
/// GMOI terms first, then by pattern.
pub fn build_expansion(n: usize) -> Result<DerivativeExpansion> {
    if n == 0 {
        return Err(GmoiError::InvalidInput("derivative order must be at least 1".into()));
    }
    if n > MAX_EXPANSION_ORDER {
        return Err(GmoiError::DerivativeOrder { requested: n, max: MAX_EXPANSION_ORDER });
    }
    let mut terms: BTreeMap<TermKind, i64> = BTreeMap::new();
    terms.insert(TermKind::Gmoi(ParameterPattern { slots: vec![Slot::X, Slot::X] }), 1);
    for _ in 1..n {
        let mut next: BTreeMap<TermKind, i64> = BTreeMap::new();
        let mut add = |k: TermKind, c: i64| *next.entry(k).or_insert(0) += c;
        for (kind, c) in terms {
            match kind {
                TermKind::Gmoi(p) => {
                    for k in p.positions() {
                        let (pre, post) = (&p.slots[..k], &p.slots[k + 1..]);
                        let splice = |mid: &[Slot], tail: Vec<Slot>| {
                            let mut s = pre.to_vec();
                            s.extend_from_slice(mid);
                            s.extend(tail);
                            ParameterPattern { slots: s }
                        };
                        add(TermKind::Gmoi(splice(&[Slot::X, Slot::X], post.to_vec())), c);
                        add(TermKind::Gmoi(splice(&[Slot::XN, Slot::XN], post.to_vec())), -c);
                        let moved = post.iter().map(|s| s.moved()).collect();
                        add(TermKind::Correction { pattern: splice(&[Slot::XT, Slot::X], moved), order: 1 }, -c);
                    }
                }
                TermKind::Correction { pattern, order } => add(TermKind::Correction { pattern, order: order + 1 }, c),
                TermKind::NilpotentMotion { .. } => unreachable!("not produced by the recursion"),
            }
        }
        next.retain(|_, c| *c != 0);
        terms = next;
    }
    Ok(DerivativeExpansion {
        order: n,
        terms: terms.into_iter().map(|(kind, coefficient)| ExpansionTerm { coefficient, kind }).collect(),
    })
}

/// [`build_expansion`] plus the nilpotent-slot motion it leaves out.
///
/// The term-by-term rule differentiates only the full slots of a GMOI term.
/// When a Jordan block of size three or more has a moving eigenvalue, the
/// nilpotent slots contribute as well; each GMOI term `c · T^{p}` with a
/// nilpotent slot at order `k < n` adds `c · ∂_t^{n−k−1} ∂_s T^{p}`, which
/// is then carried through the remaining `n − k − 1` differentiations as a
/// whole.
pub fn complete_expansion(n: usize) -> Result<DerivativeExpansion> {
    let mut out = build_expansion(n)?;
    let mut motion: BTreeMap<TermKind, i64> = BTreeMap::new();
    for k in 2..n {
        for t in build_expansion(k)?.gmoi_terms().filter(|t| t.kind.pattern().has_nilpotent()) {
            let kind = TermKind::NilpotentMotion { pattern: t.kind.pattern().clone(), order: n - k - 1 };
            *motion.entry(kind).or_insert(0) += t.coefficient;
        }
    }
    out.terms.extend(
        motion
            .into_iter()
            .filter(|(_, c)| *c != 0)
            .map(|(kind, coefficient)| ExpansionTerm { coefficient, kind }),
    );
    Ok(out)
}

/// Number of distinct mixed correction patterns of length `ρ`:
/// `Σ_{k ≥ 1, ρ−2k−1 ≥ 0} (ρ−k−1)! / (k! (ρ−2k−1)!) · (ρ − 2k − 1)`.
pub fn gamma(rho: usize) -> Result<u64> {
    if rho < 4 {
        return Err(GmoiError::InvalidInput(format!("γ(ρ) needs ρ ≥ 4 (got {rho})")));
    }
    let mut total = 0u64;
    let mut k = 1;
    while 2 * k < rho {
        total += binomial(rho - k - 1, k) * (rho - 2 * k - 1) as u64;
        k += 1;
    }
    Ok(total)
}

/// Number of GMOI terms with at least one nilpotent slot produced at order
/// `n − 1`: `Σ_{k=1}^{⌈(n−1)/2⌉} (n−k)! / (k! (n−2k)!) − [n even]`.
pub fn mixed_term_count(n: usize) -> Result<u64> {
    if n < 2 {
        return Err(GmoiError::InvalidInput(format!("the mixed-term count needs n ≥ 2 (got {n})")));
    }
    let upper = (n - 1).div_ceil(2);
    let sum: u64 = (1..=upper).filter(|&k| 2 * k <= n).map(|k| binomial(n - k, k)).sum();
    Ok(sum - u64::from(n.is_multiple_of(2)))
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// A path `s ↦ X(s)` through matrices of constant Jordan structure, with
/// `X(0) = X` and `X'(0) = Y`.
pub trait MatrixFamily<S: Scalar> {
    /// Decomposition of `X(0)`.
    fn base(&self) -> Arc<JordanDecomposition<S>>;
    /// The direction `Y`.
    fn direction(&self) -> &Matrix<S>;
    /// Decomposition of `X(t)`; fails with [`GmoiError::StructureInstability`]
    /// when the Jordan structure differs from the one at `t = 0`.
    fn at(&self, t: &S) -> Result<Arc<JordanDecomposition<S>>>;
    /// Whether `X(t) = X + tY` exactly (so the `t`-derivative is the
    /// directional derivative along `Y`).
    fn is_linear(&self) -> bool;
}

/// A block of a [`StructuredFamily`]: `(λ + μt) I + (1 + νt) S` of the given size.
#[derive(Clone, Debug, PartialEq)]
pub struct FamilyBlock<S> {
    pub eigenvalue: S,
    pub size: usize,
    /// Eigenvalue velocity `μ`.
    pub drift: S,
    /// Velocity `ν` of the superdiagonal.
    pub stretch: S,
}

/// `X(t) = V [⊕ (λ + μt) I + (1 + νt) S] V⁻¹`, linear in `t` with
/// `Y = V [⊕ μ I + ν S] V⁻¹` and exact Jordan data at every `t` with
/// `1 + νt ≠ 0`.
#[derive(Clone, Debug)]
pub struct StructuredFamily<S> {
    transform: Matrix<S>,
    blocks: Vec<FamilyBlock<S>>,
    base: Arc<JordanDecomposition<S>>,
    direction: Matrix<S>,
    tol: f64,
}

impl<S: Scalar> StructuredFamily<S> {
    pub fn new(transform: Matrix<S>, blocks: Vec<FamilyBlock<S>>, tol: f64) -> Result<Self> {
        for (i, a) in blocks.iter().enumerate() {
            for b in &blocks[i + 1..] {
                if a.eigenvalue.coincides(&b.eigenvalue, tol) && !a.drift.coincides(&b.drift, tol) {
                    return Err(GmoiError::InvalidInput(
                        "blocks sharing an eigenvalue must share its drift, or the structure splits".into(),
                    ));
                }
            }
        }
        let spec: Vec<(S, usize)> = blocks.iter().map(|b| (b.eigenvalue.clone(), b.size)).collect();
        let base = Arc::new(JordanDecomposition::prescribed(&transform, &spec, tol)?);
        let n = transform.dim();
        let mut inner = Matrix::zeros(n);
        let mut at = 0;
        for b in &blocks {
            for i in 0..b.size {
                inner.set(at + i, at + i, b.drift.clone());
                if i + 1 < b.size {
                    inner.set(at + i, at + i + 1, b.stretch.clone());
                }
            }
            at += b.size;
        }
        let direction = &(&transform * &inner) * &transform.inverse()?;
        Ok(Self { transform, blocks, base, direction, tol })
    }

    /// Convenience constructor from integer data `(λ, size, μ, ν)`.
    pub fn from_i64(transform: Matrix<S>, blocks: &[(i64, usize, i64, i64)], tol: f64) -> Result<Self> {
        let blocks = blocks
            .iter()
            .map(|&(l, size, mu, nu)| FamilyBlock {
                eigenvalue: S::from_i64(l),
                size,
                drift: S::from_i64(mu),
                stretch: S::from_i64(nu),
            })
            .collect();
        Self::new(transform, blocks, tol)
    }

    pub fn blocks(&self) -> &[FamilyBlock<S>] {
        &self.blocks
    }
}

impl<S: Scalar> MatrixFamily<S> for StructuredFamily<S> {
    fn base(&self) -> Arc<JordanDecomposition<S>> {
        self.base.clone()
    }

    fn direction(&self) -> &Matrix<S> {
        &self.direction
    }

    fn at(&self, t: &S) -> Result<Arc<JordanDecomposition<S>>> {
        if t.is_zero() {
            return Ok(self.base.clone());
        }
        // Rescale the chain vectors so that (1 + νt) S becomes S.
        let mut v = self.transform.clone();
        let mut spec = Vec::with_capacity(self.blocks.len());
        let mut at = 0;
        for b in &self.blocks {
            let scale = S::one() + b.stretch.clone() * t.clone();
            if scale.is_zero() && b.size > 1 {
                return Err(GmoiError::StructureInstability {
                    t: format!("{}", t.to_c64()),
                    detail: "a Jordan chain collapses (1 + νt = 0)".into(),
                });
            }
            let mut factor = S::one();
            for i in 0..b.size {
                if i > 0 {
                    factor = factor / scale.clone();
                }
                for r in 0..v.dim() {
                    let entry = v.get(r, at + i).clone() * factor.clone();
                    v.set(r, at + i, entry);
                }
            }
            spec.push((b.eigenvalue.clone() + b.drift.clone() * t.clone(), b.size));
            at += b.size;
        }
        let dec = JordanDecomposition::prescribed(&v, &spec, self.tol)?;
        if dec.signature() != self.base.signature() {
            return Err(GmoiError::StructureInstability {
                t: format!("{}", t.to_c64()),
                detail: format!("signature {:?} differs from {:?}", dec.signature(), self.base.signature()),
            });
        }
        Ok(Arc::new(dec))
    }

    fn is_linear(&self) -> bool {
        true
    }
}

/// `X(t) = X + tY` decomposed by structure inference at every `t`.
#[derive(Clone, Debug)]
pub struct AutoFamily<S> {
    x: Matrix<S>,
    base: Arc<JordanDecomposition<S>>,
    direction: Matrix<S>,
    tol: f64,
}

impl<S: Scalar> AutoFamily<S> {
    /// Uses the given decomposition of `X` at `t = 0`.
    pub fn new(base: Arc<JordanDecomposition<S>>, y: Matrix<S>) -> Result<Self> {
        if y.dim() != base.dim {
            return Err(GmoiError::DimensionMismatch { expected: base.dim, found: y.dim() });
        }
        Ok(Self { x: base.reconstruct(), tol: base.tol, base, direction: y })
    }

    /// Infers the structure of `X` as well.
    pub fn from_matrices(x: &Matrix<S>, y: Matrix<S>, tol: f64) -> Result<Self> {
        Self::new(Arc::new(JordanDecomposition::auto(x, tol)?), y)
    }
}

impl<S: Scalar> MatrixFamily<S> for AutoFamily<S> {
    fn base(&self) -> Arc<JordanDecomposition<S>> {
        self.base.clone()
    }

    fn direction(&self) -> &Matrix<S> {
        &self.direction
    }

    fn at(&self, t: &S) -> Result<Arc<JordanDecomposition<S>>> {
        if t.is_zero() {
            return Ok(self.base.clone());
        }
        let moved = &self.x + &self.direction.scale(t);
        let instability = |detail: String| GmoiError::StructureInstability { t: format!("{}", t.to_c64()), detail };
        let dec = JordanDecomposition::auto(&moved, self.tol).map_err(|e| instability(e.to_string()))?;
        if dec.signature() != self.base.signature() {
            return Err(instability(format!(
                "signature {:?} differs from {:?}",
                dec.signature(),
                self.base.signature()
            )));
        }
        Ok(Arc::new(dec))
    }

    fn is_linear(&self) -> bool {
        true
    }
}

/// `d/dt f(X + tY)|_{t=0} = T_{f^{[1]}}^{X,X}(Y)`.
pub fn first_derivative<S: Scalar>(f: &MultiFunction<S>, x: &JordanDecomposition<S>, y: &Matrix<S>) -> Result<Matrix<S>> {
    let x = Arc::new(x.clone());
    let problem = GmoiProblem::new(f.lift(1)?, vec![x.clone(), x], vec![y.clone()])?;
    eval_gmoi(&problem)
}

/// Options of [`evaluate_expansion`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeOptions {
    /// Step of the central differences applied to correction terms.
    pub x_step: f64,
    /// Term budget of each GMOI evaluation (`None`: default budget).
    pub budget: Option<u64>,
    /// Use [`complete_expansion`] instead of [`build_expansion`].
    pub nilpotent_motion: bool,
}

impl Default for DerivativeOptions {
    fn default() -> Self {
        Self { x_step: DEFAULT_XSTEP, budget: None, nilpotent_motion: false }
    }
}

impl DerivativeOptions {
    /// The expansion these options evaluate.
    pub fn expansion(&self, n: usize) -> Result<DerivativeExpansion> {
        if self.nilpotent_motion {
            complete_expansion(n)
        } else {
            build_expansion(n)
        }
    }
}

/// Value of every term of `expansion` (without its coefficient).
pub fn evaluate_expansion<S: Scalar, F: MatrixFamily<S> + ?Sized>(
    f: &MultiFunction<S>,
    family: &F,
    expansion: &DerivativeExpansion,
    options: DerivativeOptions,
) -> Result<Vec<(ExpansionTerm, Matrix<S>)>> {
    if f.arity() != 1 {
        return Err(GmoiError::InvalidInput(format!("f must be univariate (got arity {})", f.arity())));
    }
    let base = family.base();
    let mut out = Vec::with_capacity(expansion.terms.len());
    for term in &expansion.terms {
        let value = match &term.kind {
            TermKind::Gmoi(p) => gmoi_term(f, &base, family.direction(), p, options.budget)?,
            // Every correction or motion term involves a nilpotent part of X
            // or X̃, and the structure is constant along the family.
            TermKind::Correction { .. } | TermKind::NilpotentMotion { .. } if base.is_diagonalizable() => {
                Matrix::zeros(base.dim)
            }
            TermKind::Correction { pattern, order } => correction_derivative(f, family, pattern, *order, options)?,
            TermKind::NilpotentMotion { pattern, order } => motion_derivative(f, family, pattern, *order, options)?,
        };
        out.push((term.clone(), value));
    }
    Ok(out)
}

/// `dⁿ/dtⁿ f(X(t))|_{t=0}` from the GMOI expansion of order `n`.
pub fn nth_derivative_family<S: Scalar, F: MatrixFamily<S> + ?Sized>(
    f: &MultiFunction<S>,
    family: &F,
    n: usize,
    options: DerivativeOptions,
) -> Result<Matrix<S>> {
    let expansion = options.expansion(n)?;
    let terms = evaluate_expansion(f, family, &expansion, options)?;
    Ok(weighted_sum(&terms, family.base().dim))
}

/// `dⁿ/dtⁿ f(X + tY)|_{t=0}`, decomposing `X + sY` by structure inference
/// at the stencil nodes of the correction terms.
pub fn nth_derivative<S: Scalar>(
    f: &MultiFunction<S>,
    x: &JordanDecomposition<S>,
    y: &Matrix<S>,
    n: usize,
    x_step: f64,
) -> Result<Matrix<S>> {
    let family = AutoFamily::new(Arc::new(x.clone()), y.clone())?;
    nth_derivative_family(f, &family, n, DerivativeOptions { x_step, ..Default::default() })
}

/// `Σ coefficient · value`.
pub fn weighted_sum<S: Scalar>(terms: &[(ExpansionTerm, Matrix<S>)], dim: usize) -> Matrix<S> {
    let mut acc = Matrix::zeros(dim);
    for (t, m) in terms {
        acc.add_scaled(&S::from_i64(t.coefficient), m);
    }
    acc
}

fn gmoi_term<S: Scalar>(
    f: &MultiFunction<S>,
    base: &Arc<JordanDecomposition<S>>,
    y: &Matrix<S>,
    pattern: &ParameterPattern,
    budget: Option<u64>,
) -> Result<Matrix<S>> {
    if pattern.slots.iter().any(|s| s.is_moving()) {
        return Err(GmoiError::InvalidInput(format!("GMOI term {pattern} contains a moving slot")));
    }
    let params = pattern
        .slots
        .iter()
        .map(|s| Parameter { decomposition: base.clone(), mode: s.mode() })
        .collect();
    let rho = pattern.len();
    let problem = GmoiProblem::with_parameters(f.lift(rho - 1)?, params, vec![y.clone(); rho - 1])?;
    eval_gmoi(&problem.with_budget(budget))
}

/// `𝔛(pattern; t, s)`: the correction sum of the perturbation formula with
/// `D = X(t)` in the slot after `X̃`, `C = X(t + s)` in the `X̃` slot, the
/// slots before `C` at `X(t)` and the moving slots after `D` at `X(t + s)`.
pub fn correction_value<S: Scalar, F: MatrixFamily<S> + ?Sized>(
    f: &MultiFunction<S>,
    family: &F,
    pattern: &ParameterPattern,
    t: &S,
    s: &S,
    budget: Option<u64>,
) -> Result<Matrix<S>> {
    let c = pattern.correction_split()?;
    let base = family.at(t)?;
    let moving = family.at(&(t.clone() + s.clone()))?;
    let params: Vec<Parameter<S>> = pattern
        .slots
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != c && k != c + 1)
        .map(|(_, slot)| Parameter {
            decomposition: if slot.is_moving() { moving.clone() } else { base.clone() },
            mode: slot.mode(),
        })
        .collect();
    let args = vec![family.direction().clone(); pattern.len() - 2];
    correction_sum(f, c + 1, &params, moving, base, &args, CorrectionForm::Derived, budget)
}

/// `𝔛^{(order)}(pattern)`. With the term-by-term rule this is
/// `∂_s^order 𝔛(pattern; 0, s)`; with nilpotent motion enabled the base
/// point moves too and the value is `∂_t^{order−1} ∂_s 𝔛(pattern; t, s)`.
fn correction_derivative<S: Scalar, F: MatrixFamily<S> + ?Sized>(
    f: &MultiFunction<S>,
    family: &F,
    pattern: &ParameterPattern,
    order: usize,
    options: DerivativeOptions,
) -> Result<Matrix<S>> {
    let value = |t: &S, s: &S| correction_value(f, family, pattern, t, s, options.budget);
    let orders = if options.nilpotent_motion { (order - 1, 1) } else { (0, order) };
    mixed_difference(value, orders, family.base().dim, options.x_step)
}

/// `∂_t^order ∂_s T^{pattern}` at `(0, 0)` with full slots at `X(t)` and
/// nilpotent slots at `X(t + s)`.
fn motion_derivative<S: Scalar, F: MatrixFamily<S> + ?Sized>(
    f: &MultiFunction<S>,
    family: &F,
    pattern: &ParameterPattern,
    order: usize,
    options: DerivativeOptions,
) -> Result<Matrix<S>> {
    let rho = pattern.len();
    let lift = f.lift(rho - 1)?;
    let args = vec![family.direction().clone(); rho - 1];
    let value = |t: &S, s: &S| -> Result<Matrix<S>> {
        let (at_t, at_ts) = (family.at(t)?, family.at(&(t.clone() + s.clone()))?);
        let params = pattern
            .slots
            .iter()
            .map(|slot| Parameter {
                decomposition: if slot.mode() == SlotMode::Nilpotent { at_ts.clone() } else { at_t.clone() },
                mode: slot.mode(),
            })
            .collect();
        eval_gmoi(&GmoiProblem::with_parameters(lift.clone(), params, args.clone())?.with_budget(options.budget))
    };
    mixed_difference(value, (order, 1), family.base().dim, options.x_step)
}

/// `∂_t^a ∂_s^b g(t, s)` at `(0, 0)` by tensor central differences of step
/// `step`, with one Richardson level `(4 D(h/2) − D(h)) / 3`.
fn mixed_difference<S: Scalar>(
    g: impl Fn(&S, &S) -> Result<Matrix<S>>,
    (a, b): (usize, usize),
    dim: usize,
    step: f64,
) -> Result<Matrix<S>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(GmoiError::InvalidInput(format!("xStep must be positive (got {step})")));
    }
    let stencil_for = |q: usize| -> Result<Vec<(i64, S)>> {
        if q == 0 {
            return Ok(vec![(0, S::one())]);
        }
        let offsets = central_offsets(q);
        let points: Vec<S> = offsets.iter().map(|&o| S::from_i64(o)).collect();
        Ok(offsets.into_iter().zip(fd_weights(&points, q)?).filter(|(_, w)| !w.is_zero()).collect())
    };
    let (t_stencil, s_stencil) = (stencil_for(a)?, stencil_for(b)?);
    let estimate = |h: &S| -> Result<Matrix<S>> {
        let mut acc = Matrix::zeros(dim);
        for (ot, wt) in &t_stencil {
            for (os, ws) in &s_stencil {
                let m = g(&(S::from_i64(*ot) * h.clone()), &(S::from_i64(*os) * h.clone()))?;
                acc.add_scaled(&(wt.clone() * ws.clone()), &m);
            }
        }
        Ok(acc.scale(&(S::one() / h.powi(a + b))))
    };
    let h = S::from_c64(C64::new(step, 0.0))?;
    let coarse = estimate(&h)?;
    let fine = estimate(&(h / S::from_i64(2)))?;
    Ok(&fine.scale(&S::from_ratio(4, 3)) - &coarse.scale(&S::from_ratio(1, 3)))
}

/// Central finite difference of order `n` of `t ↦ f(X(t))` at `t = 0` on
/// a symmetric stencil of at least `stencil_width` points (`≥ n + 1`).
/// Polynomials are evaluated by Horner's scheme on `X + tY`; other
/// functions through the family's Jordan data at every node.
pub fn fd_oracle<S: Scalar, F: MatrixFamily<S> + ?Sized>(
    f: &MultiFunction<S>,
    family: &F,
    n: usize,
    step: f64,
    stencil_width: usize,
) -> Result<Matrix<S>> {
    if stencil_width < n + 1 {
        return Err(GmoiError::InvalidInput(format!(
            "stencil width {stencil_width} cannot resolve derivative order {n}"
        )));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(GmoiError::InvalidInput(format!("step must be positive (got {step})")));
    }
    let half = (stencil_width / 2).max(n.div_ceil(2)) as i64;
    let offsets: Vec<i64> = (-half..=half).collect();
    let points: Vec<S> = offsets.iter().map(|&o| S::from_i64(o)).collect();
    let weights = fd_weights(&points, n)?;
    let h = S::from_c64(C64::new(step, 0.0))?;
    let x = family.base().reconstruct();
    let mut acc = Matrix::zeros(x.dim());
    for (&o, w) in offsets.iter().zip(&weights) {
        if w.is_zero() {
            continue;
        }
        let t = S::from_i64(o) * h.clone();
        let value = match (&f.kind, family.is_linear()) {
            (FunctionKind::Polynomial(c), true) => horner(c, &(&x + &family.direction().scale(&t))),
            _ => eval_univariate(f, &*family.at(&t)?)?,
        };
        acc.add_scaled(w, &value);
    }
    Ok(acc.scale(&(S::one() / h.powi(n))))
}

/// Exact `dⁿ/dtⁿ p(X + tY)|_{t=0}` for a polynomial `p`: `n!` times the
/// `tⁿ` coefficient, computed by Horner's scheme over matrix polynomials in `t`.
pub fn polynomial_oracle<S: Scalar>(coeffs: &[S], x: &Matrix<S>, y: &Matrix<S>, n: usize) -> Matrix<S> {
    let dim = x.dim();
    // acc[k]: coefficient of t^k, truncated at degree n.
    let mut acc: Vec<Matrix<S>> = vec![Matrix::zeros(dim); n + 1];
    for c in coeffs.iter().rev() {
        let mut next: Vec<Matrix<S>> = vec![Matrix::zeros(dim); n + 1];
        for k in 0..=n {
            next[k] = &acc[k] * x;
            if k > 0 {
                next[k] = &next[k] + &(&acc[k - 1] * y);
            }
        }
        next[0].add_scaled(c, &Matrix::identity(dim));
        acc = next;
    }
    acc.swap_remove(n).scale(&S::factorial(n))
}
