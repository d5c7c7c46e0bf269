//! Multivariate scalar functions with exact partial-derivative oracles and
//! (confluent) divided differences.
//!
//! Every function exposes `partial(orders, z)`, the mixed partial derivative
//! `∂^{q₁}_{z₁} … ∂^{q_r}_{z_r} f(z)`. Univariate kinds provide local Taylor
//! coefficients in closed form; divided-difference lifts obtain their
//! partials from the node-repetition identity
//! `∂^{q}_{z_j} f[z₀, …, z_k] = q! · f[…, z_j, …, z_j, …]` (node `z_j`
//! repeated `q + 1` times).

use serde_json::{json, Value};

use crate::error::{GmoiError, Result};
use crate::scalar::Scalar;

/// Node-coincidence tolerance for divided differences in float mode.
pub const CONFLUENCE_TOL: f64 = 1e-8;

/// The concrete formula behind a [`MultiFunction`].
#[derive(Clone, Debug, PartialEq)]
pub enum FunctionKind<S> {
    /// `Σ c_i z^i` (coefficients in ascending degree).
    Polynomial(Vec<S>),
    /// `e^z`.
    Exp,
    /// `p(z) / q(z)` with ascending coefficients.
    Rational { num: Vec<S>, den: Vec<S> },
    /// `z^d`.
    Power(usize),
    /// `Σ c · Π z_j^{e_j}` in `arity` variables.
    MultiPolynomial { arity: usize, terms: Vec<(S, Vec<usize>)> },
    /// `f^{[k]}(z₀, …, z_k)`: the `k`-th divided difference of a univariate base.
    DdLift { base: Box<MultiFunction<S>>, order: usize },
    /// `β(z₁, z₃, …, z_{2ζ+1}) · z₂ z₄ ⋯ z_{2ζ}`.
    ProductMoi { beta: Box<MultiFunction<S>>, zeta: usize },
    /// `Π_f f(z restricted to its variables)`; the variable sets partition the arguments.
    SeparableProduct { arity: usize, factors: Vec<(MultiFunction<S>, Vec<usize>)> },
}

/// An `r`-variate scalar function with a partial-derivative oracle.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiFunction<S> {
    pub kind: FunctionKind<S>,
    /// Largest supported total derivative order (`None`: unlimited).
    pub max_order: Option<usize>,
}

impl<S: Scalar> MultiFunction<S> {
    fn new(kind: FunctionKind<S>) -> Self {
        Self { kind, max_order: None }
    }

    /// Polynomial with ascending coefficients.
    pub fn polynomial(coeffs: Vec<S>) -> Self {
        Self::new(FunctionKind::Polynomial(coeffs))
    }

    /// Polynomial with integer coefficients.
    pub fn polynomial_i64(coeffs: &[i64]) -> Self {
        Self::polynomial(coeffs.iter().map(|&c| S::from_i64(c)).collect())
    }

    /// `e^z` (exact mode only supports evaluation at `0`).
    pub fn exp() -> Self {
        Self::new(FunctionKind::Exp)
    }

    /// Taylor polynomial of `e^z` of degree `order`.
    pub fn truncated_exp(order: usize) -> Self {
        let mut coeffs = Vec::with_capacity(order + 1);
        let mut fact = S::one();
        for i in 0..=order {
            if i > 0 {
                fact = fact * S::from_i64(i as i64);
            }
            coeffs.push(S::one() / fact.clone());
        }
        Self::polynomial(coeffs)
    }

    /// `p / q`.
    pub fn rational(num: Vec<S>, den: Vec<S>) -> Result<Self> {
        if den.iter().all(|c| c.is_zero()) {
            return Err(GmoiError::InvalidInput("rational function with zero denominator".into()));
        }
        Ok(Self::new(FunctionKind::Rational { num, den }))
    }

    /// `z^d`.
    pub fn power(d: usize) -> Self {
        Self::new(FunctionKind::Power(d))
    }

    /// Multivariate polynomial `Σ c · Π z^e`.
    pub fn multi_polynomial(arity: usize, terms: Vec<(S, Vec<usize>)>) -> Result<Self> {
        if arity == 0 {
            return Err(GmoiError::InvalidInput("multivariate polynomial needs arity ≥ 1".into()));
        }
        for (_, e) in &terms {
            if e.len() != arity {
                return Err(GmoiError::DimensionMismatch { expected: arity, found: e.len() });
            }
        }
        Ok(Self::new(FunctionKind::MultiPolynomial { arity, terms }))
    }

    /// Constant `c` of the given arity.
    pub fn constant(arity: usize, c: S) -> Self {
        Self::new(FunctionKind::MultiPolynomial { arity, terms: vec![(c, vec![0; arity])] })
    }

    /// Coordinate projection `z ↦ z_j` (zero-based `j`).
    pub fn projection(arity: usize, j: usize) -> Self {
        let mut e = vec![0; arity];
        e[j] = 1;
        Self::new(FunctionKind::MultiPolynomial { arity, terms: vec![(S::one(), e)] })
    }

    /// `z₁ + … + z_r`.
    pub fn sum_of_variables(arity: usize) -> Self {
        let terms = (0..arity)
            .map(|j| {
                let mut e = vec![0; arity];
                e[j] = 1;
                (S::one(), e)
            })
            .collect();
        Self::new(FunctionKind::MultiPolynomial { arity, terms })
    }

    /// `z₁ ⋯ z_r`.
    pub fn product_of_variables(arity: usize) -> Self {
        Self::new(FunctionKind::MultiPolynomial { arity, terms: vec![(S::one(), vec![1; arity])] })
    }

    /// `f^{[k]}` of a univariate `base`.
    pub fn dd_lift(base: MultiFunction<S>, order: usize) -> Result<Self> {
        if base.arity() != 1 {
            return Err(GmoiError::InvalidInput(format!(
                "divided-difference lift needs a univariate base, found arity {}",
                base.arity()
            )));
        }
        if let Some(m) = base.max_order {
            if order > m {
                return Err(GmoiError::DerivativeOrder { requested: order, max: m });
            }
        }
        let max_order = base.max_order.map(|m| m - order);
        Ok(Self { kind: FunctionKind::DdLift { base: Box::new(base), order }, max_order })
    }

    /// `k`-th divided-difference lift of this (univariate) function.
    pub fn lift(&self, order: usize) -> Result<Self> {
        match &self.kind {
            FunctionKind::DdLift { .. } => Err(GmoiError::InvalidInput("cannot lift a lifted function".into())),
            _ => Self::dd_lift(self.clone(), order),
        }
    }

    /// `β(z_odd) · Π z_even` of arity `2ζ + 1`.
    pub fn product_moi(beta: MultiFunction<S>, zeta: usize) -> Result<Self> {
        if beta.arity() != zeta + 1 {
            return Err(GmoiError::DimensionMismatch { expected: zeta + 1, found: beta.arity() });
        }
        let max_order = beta.max_order;
        Ok(Self { kind: FunctionKind::ProductMoi { beta: Box::new(beta), zeta }, max_order })
    }

    /// Product of factors acting on disjoint variable subsets covering `0..arity`.
    pub fn separable_product(arity: usize, factors: Vec<(MultiFunction<S>, Vec<usize>)>) -> Result<Self> {
        let mut seen = vec![false; arity];
        for (f, vars) in &factors {
            if f.arity() != vars.len() {
                return Err(GmoiError::DimensionMismatch { expected: f.arity(), found: vars.len() });
            }
            for &v in vars {
                if v >= arity || seen[v] {
                    return Err(GmoiError::InvalidInput(format!(
                        "separable product: variable {v} out of range or used twice"
                    )));
                }
                seen[v] = true;
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(GmoiError::InvalidInput("separable product: variables must be covered".into()));
        }
        Ok(Self::new(FunctionKind::SeparableProduct { arity, factors }))
    }

    /// Declares the largest supported total derivative order.
    pub fn with_max_order(mut self, m: usize) -> Self {
        self.max_order = Some(m);
        self
    }

    /// Number of arguments `r`.
    pub fn arity(&self) -> usize {
        match &self.kind {
            FunctionKind::Polynomial(_) | FunctionKind::Exp | FunctionKind::Rational { .. } | FunctionKind::Power(_) => 1,
            FunctionKind::MultiPolynomial { arity, .. } => *arity,
            FunctionKind::DdLift { order, .. } => order + 1,
            FunctionKind::ProductMoi { zeta, .. } => 2 * zeta + 1,
            FunctionKind::SeparableProduct { arity, .. } => *arity,
        }
    }

    /// Polynomial degree, when the function is a univariate polynomial.
    pub fn polynomial_degree(&self) -> Option<usize> {
        match &self.kind {
            FunctionKind::Polynomial(c) => Some(c.iter().rposition(|x| !x.is_zero()).unwrap_or(0)),
            FunctionKind::Power(d) => Some(*d),
            _ => None,
        }
    }

    /// Value at `z`.
    pub fn eval(&self, z: &[S]) -> Result<S> {
        self.partial(&vec![0; self.arity()], z)
    }

    /// Mixed partial derivative of orders `orders` at `z`.
    pub fn partial(&self, orders: &[usize], z: &[S]) -> Result<S> {
        let r = self.arity();
        if orders.len() != r {
            return Err(GmoiError::DimensionMismatch { expected: r, found: orders.len() });
        }
        if z.len() != r {
            return Err(GmoiError::DimensionMismatch { expected: r, found: z.len() });
        }
        let total: usize = orders.iter().sum();
        if let Some(m) = self.max_order {
            if total > m {
                return Err(GmoiError::DerivativeOrder { requested: total, max: m });
            }
        }
        match &self.kind {
            FunctionKind::Polynomial(_) | FunctionKind::Exp | FunctionKind::Rational { .. } | FunctionKind::Power(_) => {
                let q = orders[0];
                let t = self.taylor(&z[0], q)?;
                Ok(t[q].clone() * S::factorial(q))
            }
            FunctionKind::MultiPolynomial { terms, .. } => {
                let mut acc = S::zero();
                for (c, e) in terms {
                    if e.iter().zip(orders).any(|(&ej, &qj)| qj > ej) {
                        continue;
                    }
                    let mut term = c.clone();
                    for ((&ej, &qj), zj) in e.iter().zip(orders).zip(z) {
                        term = term * S::from_i64(falling(ej, qj) as i64) * zj.powi(ej - qj);
                    }
                    acc = acc + term;
                }
                Ok(acc)
            }
            FunctionKind::DdLift { base, .. } => {
                let mut nodes = Vec::with_capacity(r + total);
                let mut scale = S::one();
                for (zj, &qj) in z.iter().zip(orders) {
                    for _ in 0..=qj {
                        nodes.push(zj.clone());
                    }
                    scale = scale * S::factorial(qj);
                }
                Ok(divided_difference(base, &nodes)? * scale)
            }
            FunctionKind::ProductMoi { beta, zeta } => {
                let mut factor = S::one();
                for p in 0..*zeta {
                    let idx = 2 * p + 1;
                    match orders[idx] {
                        0 => factor = factor * z[idx].clone(),
                        1 => {}
                        _ => return Ok(S::zero()),
                    }
                }
                let bz: Vec<S> = (0..=*zeta).map(|p| z[2 * p].clone()).collect();
                let bq: Vec<usize> = (0..=*zeta).map(|p| orders[2 * p]).collect();
                Ok(beta.partial(&bq, &bz)? * factor)
            }
            FunctionKind::SeparableProduct { factors, .. } => {
                let mut acc = S::one();
                for (f, vars) in factors {
                    let fz: Vec<S> = vars.iter().map(|&v| z[v].clone()).collect();
                    let fq: Vec<usize> = vars.iter().map(|&v| orders[v]).collect();
                    acc = acc * f.partial(&fq, &fz)?;
                    if acc.is_zero() {
                        break;
                    }
                }
                Ok(acc)
            }
        }
    }

    /// Taylor coefficients `f^{(j)}(z)/j!` for `j = 0..=upto` (univariate kinds).
    pub fn taylor(&self, z: &S, upto: usize) -> Result<Vec<S>> {
        if let Some(m) = self.max_order {
            if upto > m {
                return Err(GmoiError::DerivativeOrder { requested: upto, max: m });
            }
        }
        match &self.kind {
            FunctionKind::Polynomial(c) => Ok(poly_taylor(c, z, upto)),
            FunctionKind::Power(d) => {
                let mut c = vec![S::zero(); d + 1];
                c[*d] = S::one();
                Ok(poly_taylor(&c, z, upto))
            }
            FunctionKind::Exp => {
                let e = z
                    .exp()
                    .ok_or_else(|| GmoiError::NotExact(format!("exp at {:?} is irrational", z.to_c64())))?;
                let mut out = Vec::with_capacity(upto + 1);
                let mut fact = S::one();
                for j in 0..=upto {
                    if j > 0 {
                        fact = fact * S::from_i64(j as i64);
                    }
                    out.push(e.clone() / fact.clone());
                }
                Ok(out)
            }
            FunctionKind::Rational { num, den } => {
                let p = poly_taylor(num, z, upto);
                let d = poly_taylor(den, z, upto);
                let scale = den.iter().map(|c| c.modulus()).fold(0.0, f64::max);
                if d[0].is_zero() || (!S::EXACT && d[0].modulus() <= 1e-14 * scale.max(1.0)) {
                    return Err(GmoiError::Pole(format!("denominator vanishes at {:?}", z.to_c64())));
                }
                let mut r: Vec<S> = Vec::with_capacity(upto + 1);
                for j in 0..=upto {
                    let mut acc = p[j].clone();
                    for l in 1..=j {
                        acc = acc - d[l].clone() * r[j - l].clone();
                    }
                    r.push(acc / d[0].clone());
                }
                Ok(r)
            }
            _ => Err(GmoiError::InvalidInput(format!(
                "Taylor coefficients need a univariate function, found arity {}",
                self.arity()
            ))),
        }
    }

    /// JSON specification (inverse of [`MultiFunction::from_json`]).
    pub fn to_json(&self) -> Value {
        let scalars = |v: &[S]| v.iter().map(|c| c.to_json()).collect::<Vec<_>>();
        let mut out = match &self.kind {
            FunctionKind::Polynomial(c) => json!({"kind": "polynomial", "coeffs": scalars(c)}),
            FunctionKind::Exp => json!({"kind": "exp"}),
            FunctionKind::Rational { num, den } => json!({"kind": "rational", "num": scalars(num), "den": scalars(den)}),
            FunctionKind::Power(d) => json!({"kind": "power", "degree": d}),
            FunctionKind::MultiPolynomial { arity, terms } => json!({
                "kind": "multi-polynomial",
                "arity": arity,
                "terms": terms.iter().map(|(c, e)| json!({"coeff": c.to_json(), "exponents": e})).collect::<Vec<_>>(),
            }),
            FunctionKind::DdLift { base, order } => json!({"kind": "dd-lift", "base": base.to_json(), "order": order}),
            FunctionKind::ProductMoi { beta, zeta } => json!({"kind": "product-moi", "beta": beta.to_json(), "zeta": zeta}),
            FunctionKind::SeparableProduct { arity, factors } => json!({
                "kind": "separable-product",
                "arity": arity,
                "factors": factors.iter().map(|(f, v)| json!({"function": f.to_json(), "variables": v})).collect::<Vec<_>>(),
            }),
        };
        if let (Some(m), Value::Object(map)) = (self.max_order, &mut out) {
            if !matches!(self.kind, FunctionKind::DdLift { .. } | FunctionKind::ProductMoi { .. }) {
                map.insert("max_order".into(), json!(m));
            }
        }
        out
    }

    /// Parses a function specification such as `{"kind":"polynomial","coeffs":[…]}`.
    ///
    /// Kinds: `polynomial`, `exp`, `truncated-exp` (`order`), `rational`
    /// (`num`, `den`), `power` (`degree`), `constant` (`value`, `arity`),
    /// `multi-polynomial`, `dd-lift` (`base`, `order`), `product-moi`
    /// (`beta`, `zeta`), `separable-product` (`factors`). An optional
    /// `max_order` caps the supported derivative order.
    pub fn from_json(v: &Value) -> Result<Self> {
        let kind = v
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| GmoiError::InvalidInput("function JSON: missing string field \"kind\"".into()))?;
        let field = |name: &str| {
            v.get(name)
                .ok_or_else(|| GmoiError::InvalidInput(format!("function JSON ({kind}): missing field \"{name}\"")))
        };
        let uint = |name: &str| -> Result<usize> {
            field(name)?
                .as_u64()
                .map(|x| x as usize)
                .ok_or_else(|| GmoiError::InvalidInput(format!("function JSON ({kind}): \"{name}\" must be a non-negative integer")))
        };
        let scalar_list = |name: &str| -> Result<Vec<S>> {
            field(name)?
                .as_array()
                .ok_or_else(|| GmoiError::InvalidInput(format!("function JSON ({kind}): \"{name}\" must be an array")))?
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    S::from_json(c).map_err(|e| GmoiError::InvalidInput(format!("function JSON ({kind}): {name}[{i}]: {e}")))
                })
                .collect()
        };
        let f = match kind {
            "polynomial" => Self::polynomial(scalar_list("coeffs")?),
            "exp" => Self::exp(),
            "truncated-exp" => Self::truncated_exp(uint("order")?),
            "rational" => Self::rational(scalar_list("num")?, scalar_list("den")?)?,
            "power" => Self::power(uint("degree")?),
            "constant" => {
                let arity = v.get("arity").and_then(Value::as_u64).unwrap_or(1) as usize;
                Self::constant(arity, S::from_json(field("value")?)?)
            }
            "multi-polynomial" => {
                let arity = uint("arity")?;
                let terms = field("terms")?
                    .as_array()
                    .ok_or_else(|| GmoiError::InvalidInput("function JSON (multi-polynomial): \"terms\" must be an array".into()))?
                    .iter()
                    .map(|t| {
                        let c = S::from_json(t.get("coeff").ok_or_else(|| {
                            GmoiError::InvalidInput("function JSON (multi-polynomial): term without \"coeff\"".into())
                        })?)?;
                        let e = t
                            .get("exponents")
                            .and_then(Value::as_array)
                            .ok_or_else(|| GmoiError::InvalidInput("function JSON (multi-polynomial): term without \"exponents\"".into()))?
                            .iter()
                            .map(|x| x.as_u64().map(|x| x as usize).ok_or_else(|| GmoiError::InvalidInput("exponent must be a non-negative integer".into())))
                            .collect::<Result<Vec<_>>>()?;
                        Ok((c, e))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::multi_polynomial(arity, terms)?
            }
            "dd-lift" => Self::dd_lift(Self::from_json(field("base")?)?, uint("order")?)?,
            "product-moi" => Self::product_moi(Self::from_json(field("beta")?)?, uint("zeta")?)?,
            "separable-product" => {
                let arity = uint("arity")?;
                let factors = field("factors")?
                    .as_array()
                    .ok_or_else(|| GmoiError::InvalidInput("function JSON (separable-product): \"factors\" must be an array".into()))?
                    .iter()
                    .map(|fv| {
                        let f = Self::from_json(fv.get("function").ok_or_else(|| {
                            GmoiError::InvalidInput("function JSON (separable-product): factor without \"function\"".into())
                        })?)?;
                        let vars = fv
                            .get("variables")
                            .and_then(Value::as_array)
                            .ok_or_else(|| GmoiError::InvalidInput("function JSON (separable-product): factor without \"variables\"".into()))?
                            .iter()
                            .map(|x| x.as_u64().map(|x| x as usize).ok_or_else(|| GmoiError::InvalidInput("variable index must be a non-negative integer".into())))
                            .collect::<Result<Vec<_>>>()?;
                        Ok((f, vars))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Self::separable_product(arity, factors)?
            }
            other => return Err(GmoiError::InvalidInput(format!("function JSON: unknown kind {other:?}"))),
        };
        match v.get("max_order").and_then(Value::as_u64) {
            Some(m) => Ok(f.with_max_order(m as usize)),
            None => Ok(f),
        }
    }
}

/// `e (e−1) ⋯ (e−q+1)`.
fn falling(e: usize, q: usize) -> u128 {
    (0..q).map(|i| (e - i) as u128).product()
}

/// Taylor coefficients of a polynomial about `z` up to order `upto`.
fn poly_taylor<S: Scalar>(c: &[S], z: &S, upto: usize) -> Vec<S> {
    // Repeated synthetic division by (x − z).
    let mut work: Vec<S> = c.to_vec();
    let mut out = Vec::with_capacity(upto + 1);
    for _ in 0..=upto {
        if work.is_empty() {
            out.push(S::zero());
            continue;
        }
        // Horner: remainder is the value, quotient the next polynomial.
        let deg = work.len() - 1;
        let mut quotient = vec![S::zero(); deg];
        let mut acc = S::zero();
        for i in (0..=deg).rev() {
            acc = acc * z.clone() + work[i].clone();
            if i > 0 {
                quotient[i - 1] = acc.clone();
            }
        }
        out.push(acc);
        work = quotient;
    }
    out
}

/// Divided difference `f[z₀, …, z_k]` of a univariate function, with
/// coincident nodes handled by the confluent rule
/// `f[λ, …, λ] (s+1 copies) = f^{(s)}(λ)/s!`.
pub fn divided_difference<S: Scalar>(f: &MultiFunction<S>, nodes: &[S]) -> Result<S> {
    if nodes.is_empty() {
        return Err(GmoiError::InvalidInput("divided difference needs at least one node".into()));
    }
    if f.arity() != 1 {
        return Err(GmoiError::InvalidInput("divided difference needs a univariate function".into()));
    }
    if let Some(m) = f.max_order {
        if nodes.len() - 1 > m {
            return Err(GmoiError::DerivativeOrder { requested: nodes.len() - 1, max: m });
        }
    }
    // Cancellation-free routes: synthetic division for polynomials, and a
    // Taylor polynomial about the centroid for clustered nodes of `exp`.
    match &f.kind {
        FunctionKind::Polynomial(c) => return Ok(poly_divided_difference(c, nodes)),
        FunctionKind::Power(d) => {
            let mut c = vec![S::zero(); d + 1];
            c[*d] = S::one();
            return Ok(poly_divided_difference(&c, nodes));
        }
        FunctionKind::Exp if !S::EXACT => {
            let k = nodes.len() - 1;
            let mean = nodes.iter().fold(S::zero(), |acc, z| acc + z.clone()) / S::from_i64(nodes.len() as i64);
            let spread = nodes.iter().map(|z| (z.clone() - mean.clone()).modulus()).fold(0.0, f64::max);
            if spread <= EXP_TAYLOR_SPREAD {
                let coeffs = f.taylor(&mean, k + EXP_TAYLOR_EXTRA)?;
                let shifted: Vec<S> = nodes.iter().map(|z| z.clone() - mean.clone()).collect();
                return Ok(poly_divided_difference(&coeffs, &shifted));
            }
        }
        _ => {}
    }
    // Group coincident nodes; repeated nodes become consecutive.
    let mut groups: Vec<(S, usize)> = Vec::new();
    for z in nodes {
        match groups.iter_mut().find(|g| g.0.coincides(z, CONFLUENCE_TOL)) {
            Some(g) => g.1 += 1,
            None => groups.push((z.clone(), 1)),
        }
    }
    if groups.len() == 1 {
        let (z, m) = &groups[0];
        let t = f.taylor(z, m - 1)?;
        return Ok(t[m - 1].clone());
    }
    let mut pts: Vec<usize> = Vec::with_capacity(nodes.len());
    let mut taylors = Vec::with_capacity(groups.len());
    for (g, (z, m)) in groups.iter().enumerate() {
        taylors.push(f.taylor(z, m - 1)?);
        pts.extend(std::iter::repeat_n(g, *m));
    }
    let k = pts.len();
    // Column-by-column Hermite table; `col[i]` = f[z_i, …, z_{i+l}].
    let mut col: Vec<S> = pts.iter().map(|&g| taylors[g][0].clone()).collect();
    for l in 1..k {
        let mut next = Vec::with_capacity(k - l);
        for i in 0..k - l {
            let (gi, gj) = (pts[i], pts[i + l]);
            if gi == gj {
                next.push(taylors[gi][l].clone());
            } else {
                let num = col[i + 1].clone() - col[i].clone();
                let den = groups[gj].0.clone() - groups[gi].0.clone();
                next.push(num / den);
            }
        }
        col = next;
    }
    Ok(col.pop().expect("nonempty table"))
}

/// Node spread below which `exp` divided differences use a Taylor polynomial.
const EXP_TAYLOR_SPREAD: f64 = 1.0;

/// Taylor terms kept beyond the divided-difference order (`1/40!` is far below
/// double precision for spreads up to [`EXP_TAYLOR_SPREAD`]).
const EXP_TAYLOR_EXTRA: usize = 40;

/// `p[z₀, …, z_k]` by repeated synthetic division: dividing by `x − z_i`
/// turns `p[z₀, …, z_{i−1}, x]` into `p[z₀, …, z_i, x]`.
fn poly_divided_difference<S: Scalar>(c: &[S], nodes: &[S]) -> S {
    let k = nodes.len() - 1;
    let mut work: Vec<S> = c.to_vec();
    for z in &nodes[..k] {
        if work.len() <= 1 {
            return S::zero();
        }
        let deg = work.len() - 1;
        let mut quotient = vec![S::zero(); deg];
        let mut acc = S::zero();
        for i in (1..=deg).rev() {
            acc = acc * z.clone() + work[i].clone();
            quotient[i - 1] = acc.clone();
        }
        work = quotient;
    }
    work.iter().rev().fold(S::zero(), |acc, ci| acc * nodes[k].clone() + ci.clone())
}

/// Weights `w` with `Σ w_i g(x_i) ≈ g^{(order)}(0)` for the given stencil
/// points (Fornberg's recursion; exact in rational mode).
pub fn fd_weights<S: Scalar>(points: &[S], order: usize) -> Result<Vec<S>> {
    let n = points.len();
    if n <= order {
        return Err(GmoiError::InvalidInput(format!(
            "stencil of {n} points cannot approximate derivative order {order}"
        )));
    }
    // c[i][k]: weight of point i for derivative k.
    let mut c = vec![vec![S::zero(); order + 1]; n];
    c[0][0] = S::one();
    let mut c1 = S::one();
    let mut c4 = points[0].clone();
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = S::one();
        let c5 = c4.clone();
        c4 = points[i].clone();
        for j in 0..i {
            let c3 = points[i].clone() - points[j].clone();
            c2 = c2 * c3.clone();
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1.clone()
                        * (S::from_i64(k as i64) * c[i - 1][k - 1].clone() - c5.clone() * c[i - 1][k].clone())
                        / c2.clone();
                }
                c[i][0] = -(c1.clone() * c5.clone() * c[i - 1][0].clone()) / c2.clone();
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4.clone() * c[j][k].clone() - S::from_i64(k as i64) * c[j][k - 1].clone()) / c3.clone();
            }
            c[j][0] = c4.clone() * c[j][0].clone() / c3.clone();
        }
        c1 = c2;
    }
    Ok(c.into_iter().map(|row| row[order].clone()).collect())
}

/// Offsets `−p, …, p` of the narrowest central stencil for derivative `order`.
pub fn central_offsets(order: usize) -> Vec<i64> {
    let p = order.div_ceil(2).max(1) as i64;
    (-p..=p).collect()
}

/// `|partial − central finite difference of eval|` using tensor-product
/// central stencils of step `step` in every differentiated variable.
pub fn fd_check<S: Scalar>(f: &MultiFunction<S>, orders: &[usize], nodes: &[S], step: f64) -> Result<f64> {
    let exact = f.partial(orders, nodes)?;
    let h = S::from_c64(crate::scalar::C64::new(step, 0.0))?;
    let mut stencils: Vec<Vec<(S, S)>> = Vec::with_capacity(orders.len());
    for &q in orders {
        if q == 0 {
            stencils.push(vec![(S::zero(), S::one())]);
            continue;
        }
        let offs = central_offsets(q);
        let pts: Vec<S> = offs.iter().map(|&o| S::from_i64(o)).collect();
        let w = fd_weights(&pts, q)?;
        let hq = h.powi(q);
        stencils.push(
            offs.iter()
                .zip(w)
                .map(|(&o, wi)| (S::from_i64(o) * h.clone(), wi / hq.clone()))
                .collect(),
        );
    }
    let mut approx = S::zero();
    let mut idx = vec![0usize; orders.len()];
    loop {
        let mut weight = S::one();
        let mut z = nodes.to_vec();
        for (j, &i) in idx.iter().enumerate() {
            let (off, w) = &stencils[j][i];
            weight = weight * w.clone();
            z[j] = z[j].clone() + off.clone();
        }
        if !weight.is_zero() {
            approx = approx + weight * f.eval(&z)?;
        }
        // Odometer increment.
        let mut j = 0;
        loop {
            if j == idx.len() {
                return Ok((exact - approx).modulus());
            }
            idx[j] += 1;
            if idx[j] < stencils[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{C64, CQ};

    fn c(v: f64) -> C64 {
        C64::new(v, 0.0)
    }

    #[test]
    fn builtin_oracles() {
        let sq = MultiFunction::<CQ>::polynomial_i64(&[0, 0, 1]);
        assert_eq!(sq.eval(&[CQ::from_i64(3)]).unwrap(), CQ::from_i64(9));
        let e = MultiFunction::<C64>::exp();
        assert!((e.partial(&[5], &[c(0.0)]).unwrap() - c(1.0)).norm() < 1e-15);
        let cube = MultiFunction::<CQ>::power(3);
        assert_eq!(cube.partial(&[2], &[CQ::from_i64(2)]).unwrap(), CQ::from_i64(12));
    }

    #[test]
    fn divided_difference_oracles() {
        let sq = MultiFunction::<CQ>::polynomial_i64(&[0, 0, 1]);
        let n = |v: &[i64]| v.iter().map(|&x| CQ::from_i64(x)).collect::<Vec<_>>();
        assert_eq!(divided_difference(&sq, &n(&[1, 2])).unwrap(), CQ::from_i64(3));
        assert_eq!(divided_difference(&sq, &n(&[2, 2])).unwrap(), CQ::from_i64(4));
        assert_eq!(divided_difference(&sq, &n(&[0, 1, 5])).unwrap(), CQ::from_i64(1));
        assert_eq!(divided_difference(&sq, &n(&[0, 1, 5, 5])).unwrap(), CQ::zero());
    }

    #[test]
    fn lifted_oracles() {
        let sq = MultiFunction::<CQ>::polynomial_i64(&[0, 0, 1]);
        let l = sq.lift(1).unwrap();
        assert_eq!(l.eval(&[CQ::from_i64(1), CQ::from_i64(2)]).unwrap(), CQ::from_i64(3));
        let cube = MultiFunction::<CQ>::power(3).lift(1).unwrap();
        assert_eq!(cube.partial(&[1, 0], &[CQ::from_i64(2), CQ::from_i64(2)]).unwrap(), CQ::from_i64(6));
        let fl = MultiFunction::<C64>::power(3).lift(1).unwrap();
        let r = fd_check(&fl, &[1, 0], &[c(0.7), c(-0.4)], 1e-4).unwrap();
        assert!(r <= 1e-5, "{r}");
    }

    #[test]
    fn fd_check_examples() {
        let e = MultiFunction::<C64>::exp();
        assert!(fd_check(&e, &[1], &[c(0.0)], 1e-5).unwrap() <= 1e-9);
        let sq = MultiFunction::<C64>::polynomial(vec![c(0.0), c(0.0), c(1.0)]);
        assert!(fd_check(&sq, &[3], &[c(0.3)], 1e-2).unwrap() <= 1e-8);
    }

    #[test]
    fn rational_kind_and_poles() {
        // 1 / (1 − z): Taylor coefficients at 0 are all one.
        let f = MultiFunction::<CQ>::rational(vec![CQ::one()], vec![CQ::one(), CQ::from_i64(-1)]).unwrap();
        let t = f.taylor(&CQ::zero(), 4).unwrap();
        assert!(t.iter().all(|x| *x == CQ::one()));
        assert!(matches!(f.eval(&[CQ::one()]), Err(GmoiError::Pole(_))));
    }

    #[test]
    fn max_order_is_enforced() {
        let f = MultiFunction::<CQ>::exp().with_max_order(2);
        assert!(matches!(f.partial(&[3], &[CQ::zero()]), Err(GmoiError::DerivativeOrder { requested: 3, max: 2 })));
        assert!(f.lift(3).is_err());
    }

    #[test]
    fn product_moi_partials_follow_leibniz() {
        let beta = MultiFunction::<CQ>::sum_of_variables(2);
        let f = MultiFunction::product_moi(beta, 1).unwrap();
        let z: Vec<CQ> = [2, 5, 7].iter().map(|&v| CQ::from_i64(v)).collect();
        assert_eq!(f.eval(&z).unwrap(), CQ::from_i64(45));
        assert_eq!(f.partial(&[1, 0, 0], &z).unwrap(), CQ::from_i64(5));
        assert_eq!(f.partial(&[0, 1, 0], &z).unwrap(), CQ::from_i64(9));
        assert_eq!(f.partial(&[0, 2, 0], &z).unwrap(), CQ::zero());
    }

    #[test]
    fn fornberg_weights_are_exact() {
        let pts: Vec<CQ> = (-1..=1).map(CQ::from_i64).collect();
        let w = fd_weights(&pts, 2).unwrap();
        assert_eq!(w, vec![CQ::one(), CQ::from_i64(-2), CQ::one()]);
        let w1 = fd_weights(&pts, 1).unwrap();
        assert_eq!(w1, vec![CQ::from_ratio(-1, 2), CQ::zero(), CQ::from_ratio(1, 2)]);
    }

    #[test]
    fn json_round_trip() {
        let f = MultiFunction::<CQ>::product_moi(MultiFunction::polynomial_i64(&[1, 2]).lift(1).unwrap(), 1).unwrap();
        let j = f.to_json();
        assert_eq!(MultiFunction::<CQ>::from_json(&j).unwrap(), f);
        assert!(MultiFunction::<CQ>::from_json(&serde_json::json!({"kind": "nope"})).is_err());
    }
}
