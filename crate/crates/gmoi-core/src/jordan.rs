//! Jordan-structure decomposition into per-block spectral data.
//!
//! A matrix `X = V J V⁻¹` is represented by its distinct eigenvalues `λ_k`
//! and, for every geometric Jordan block `(k, i)`, the projector
//! `P_{k,i} = V E_{k,i} V⁻¹`, the nilpotent `N_{k,i} = V S_{k,i} V⁻¹` and the
//! block order `m_{k,i}`, so that `X = Σ (λ_k P_{k,i} + N_{k,i})`.
//!
//! Blocks are indexed by eigenvalue in lexicographic `(re, im)` order, then
//! by decreasing block length, ties broken by first occurrence in the input
//! (prescribed mode) or in the chain-construction scan (auto mode).

use std::cmp::Ordering;

use nalgebra::DMatrix;
use num_complex::Complex;
use serde_json::{json, Value};

use crate::error::{GmoiError, Result};
use crate::matrix::{nullspace_of_rows, rank_of_vectors, Matrix};
use crate::scalar::{rationalize, Scalar, C64, CQ, DEFAULT_TOL};

/// One geometric Jordan component.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralBlock<S> {
    /// `λ_k`.
    pub eigenvalue: S,
    /// `k`, zero-based index of the distinct eigenvalue.
    pub eigen_index: usize,
    /// `i`, zero-based index of the block among those of `λ_k`.
    pub block_index: usize,
    /// `P_{k,i}`.
    pub projector: Matrix<S>,
    /// `N_{k,i}`.
    pub nilpotent: Matrix<S>,
    /// `m_{k,i}`: block length, the smallest power annihilating `N_{k,i}`.
    pub order: usize,
}

impl<S: Scalar> SpectralBlock<S> {
    /// Spectral factor of exponent `q`: `P` for `q = 0`, `N^q` for `1 ≤ q < m`,
    /// `None` for `q ≥ m` (the power vanishes).
    pub fn factor(&self, q: usize) -> Option<Matrix<S>> {
        match q {
            0 => Some(self.projector.clone()),
            q if q < self.order => Some(self.nilpotent.pow(q)),
            _ => None,
        }
    }

    /// All nonvanishing factors `[P, N, N², …, N^{m−1}]`.
    pub fn factors(&self) -> Vec<Matrix<S>> {
        let mut out = Vec::with_capacity(self.order);
        out.push(self.projector.clone());
        let mut acc = self.projector.clone();
        for _ in 1..self.order {
            acc = &acc * &self.nilpotent;
            out.push(acc.clone());
        }
        out
    }
}

/// Spectral data of a square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct JordanDecomposition<S> {
    pub dim: usize,
    /// Blocks in canonical order (see module docs).
    pub blocks: Vec<SpectralBlock<S>>,
    /// Distinct eigenvalues `λ_1 … λ_K` in lexicographic `(re, im)` order.
    pub eigenvalues: Vec<S>,
    /// Geometric multiplicities `α^G_k`.
    pub geometric: Vec<usize>,
    /// Algebraic multiplicities `α^A_k`.
    pub algebraic: Vec<usize>,
    /// Similarity transform `V` with columns ordered like `blocks`.
    pub transform: Matrix<S>,
    /// `V⁻¹`.
    pub transform_inv: Matrix<S>,
    /// Tolerance used while constructing the decomposition.
    pub tol: f64,
}

/// How [`decompose`] obtains the Jordan structure.
#[derive(Clone, Debug, PartialEq)]
pub enum DecomposeMode<S> {
    /// Infer eigenvalues and chains from the matrix.
    Auto,
    /// Caller supplies `V` and the `(λ, size)` blocks in column order.
    Prescribed {
        transform: Matrix<S>,
        blocks: Vec<(S, usize)>,
    },
}

/// Invariant residuals of a decomposition (Frobenius norms; `0` exactly in
/// rational mode for a valid decomposition).
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    /// `max ‖P² − P‖`.
    pub idempotency: f64,
    /// `max ‖P_a P_b‖` over distinct blocks.
    pub orthogonality: f64,
    /// `‖Σ P − I‖`.
    pub completeness: f64,
    /// `max ‖N^m‖`.
    pub nilpotency: f64,
    /// `max (‖PN − N‖, ‖NP − N‖)`.
    pub confinement: f64,
    /// `min ‖N^{m−1}‖` over blocks with `m > 1` (should be nonzero).
    pub min_top_power: Option<f64>,
    /// `‖Σ(λP + N) − X‖` when the original matrix is supplied.
    pub reconstruction: Option<f64>,
}

impl ValidationReport {
    /// Largest residual (ignoring `min_top_power`).
    pub fn max_residual(&self) -> f64 {
        [self.idempotency, self.orthogonality, self.completeness, self.nilpotency, self.confinement]
            .into_iter()
            .chain(self.reconstruction)
            .fold(0.0, f64::max)
    }

    /// Whether every residual is within `tol`.
    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual() <= tol && self.min_top_power.is_none_or(|v| v > 0.0)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "idempotency": self.idempotency,
            "orthogonality": self.orthogonality,
            "completeness": self.completeness,
            "nilpotency": self.nilpotency,
            "confinement": self.confinement,
            "min_top_power": self.min_top_power,
            "reconstruction": self.reconstruction,
        })
    }
}

/// Decomposes `x` (see [`DecomposeMode`]). Prescribed structures are
/// validated against `x`; auto mode infers structure and validates the
/// reconstruction.
pub fn decompose<S: Scalar>(x: &Matrix<S>, tol: f64, mode: DecomposeMode<S>) -> Result<JordanDecomposition<S>> {
    let j = match mode {
        DecomposeMode::Auto => return JordanDecomposition::auto(x, tol),
        DecomposeMode::Prescribed { transform, blocks } => JordanDecomposition::prescribed(&transform, &blocks, tol)?,
    };
    if j.dim != x.dim() {
        return Err(GmoiError::DimensionMismatch { expected: x.dim(), found: j.dim });
    }
    j.check_reconstruction(x)?;
    Ok(j)
}

/// `Σ λ_k P_{k,i} + Σ N_{k,i}`.
pub fn reconstruct<S: Scalar>(j: &JordanDecomposition<S>) -> Matrix<S> {
    j.reconstruct()
}

/// `(X_P, X_N) = (Σ λ P, Σ N)`.
pub fn split_parts<S: Scalar>(j: &JordanDecomposition<S>) -> (Matrix<S>, Matrix<S>) {
    j.split_parts()
}

/// Residual report (see [`ValidationReport`]).
pub fn validate<S: Scalar>(j: &JordanDecomposition<S>) -> ValidationReport {
    j.validate(None)
}

impl<S: Scalar> JordanDecomposition<S> {
    /// Spectral data of the Jordan form given by `(λ, size)` blocks in
    /// column order, with similarity transform `v`.
    pub fn prescribed(v: &Matrix<S>, blocks: &[(S, usize)], tol: f64) -> Result<Self> {
        let n = v.dim();
        let total: usize = blocks.iter().map(|b| b.1).sum();
        if total != n {
            return Err(GmoiError::DimensionMismatch { expected: n, found: total });
        }
        if blocks.iter().any(|b| b.1 == 0) {
            return Err(GmoiError::InvalidInput("Jordan block sizes must be positive".into()));
        }
        // Distinct eigenvalues in lexicographic order.
        let mut distinct: Vec<S> = Vec::new();
        for (lam, _) in blocks {
            if !distinct.iter().any(|d| d.coincides(lam, tol)) {
                distinct.push(lam.clone());
            }
        }
        distinct.sort_by(|a, b| a.cmp_re_im(b));
        let eig_index = |lam: &S| distinct.iter().position(|d| d.coincides(lam, tol)).expect("eigenvalue present");

        // Column ranges in the input ordering.
        let mut starts = Vec::with_capacity(blocks.len());
        let mut c = 0;
        for (_, size) in blocks {
            starts.push(c);
            c += size;
        }
        let mut order: Vec<usize> = (0..blocks.len()).collect();
        order.sort_by(|&a, &b| {
            eig_index(&blocks[a].0)
                .cmp(&eig_index(&blocks[b].0))
                .then(blocks[b].1.cmp(&blocks[a].1))
                .then(a.cmp(&b))
        });
        let mut cols = Vec::with_capacity(n);
        for &b in &order {
            for off in 0..blocks[b].1 {
                cols.push(v.column(starts[b] + off));
            }
        }
        let transform = Matrix::from_columns(&cols)?;
        let sorted: Vec<(usize, usize)> = order.iter().map(|&b| (eig_index(&blocks[b].0), blocks[b].1)).collect();
        Self::assemble(transform, distinct, &sorted, tol)
    }

    /// Spectral data of a matrix already in Jordan form (`V = I`).
    pub fn from_jordan_blocks(blocks: &[(S, usize)], tol: f64) -> Result<Self> {
        let n = blocks.iter().map(|b| b.1).sum();
        Self::prescribed(&Matrix::identity(n), blocks, tol)
    }

    /// Builds the decomposition from a transform whose columns are already in
    /// canonical block order; `sorted` lists `(eigen index, size)`.
    fn assemble(transform: Matrix<S>, eigenvalues: Vec<S>, sorted: &[(usize, usize)], tol: f64) -> Result<Self> {
        let n = transform.dim();
        let transform_inv = if S::EXACT { transform.inverse()? } else { transform.inverse_tol(1e-13)? };
        let k_count = eigenvalues.len();
        let mut geometric = vec![0; k_count];
        let mut algebraic = vec![0; k_count];
        let mut blocks = Vec::with_capacity(sorted.len());
        let mut col = 0;
        for &(k, size) in sorted {
            let mut projector = Matrix::zeros(n);
            let mut nilpotent = Matrix::zeros(n);
            for c in col..col + size {
                add_outer(&mut projector, &transform, c, &transform_inv, c);
                if c + 1 < col + size {
                    add_outer(&mut nilpotent, &transform, c, &transform_inv, c + 1);
                }
            }
            blocks.push(SpectralBlock {
                eigenvalue: eigenvalues[k].clone(),
                eigen_index: k,
                block_index: geometric[k],
                projector,
                nilpotent,
                order: size,
            });
            geometric[k] += 1;
            algebraic[k] += size;
            col += size;
        }
        Ok(Self { dim: n, blocks, eigenvalues, geometric, algebraic, transform, transform_inv, tol })
    }

    /// Infers the Jordan structure of `x`.
    ///
    /// Eigenvalues come from a complex Schur form and are clustered; Jordan
    /// chains are built by rank profiling of `(X − λI)^s`. In exact mode each
    /// cluster mean is rounded to a small-denominator rational and verified
    /// exactly; matrices with irrational eigenvalues are rejected.
    pub fn auto(x: &Matrix<S>, tol: f64) -> Result<Self> {
        let n = x.dim();
        let xf = x.to_c64();
        let eig = eigenvalues_c64(&xf);
        // Exact mode verifies every cluster exactly afterwards, so the float
        // clustering only needs a working tolerance (a zero tolerance would
        // split every defective eigenvalue).
        let cluster_tol = if S::EXACT && tol < DEFAULT_TOL { DEFAULT_TOL } else { tol };
        let clusters = cluster_eigenvalues(&eig, cluster_tol)?;

        let mut lambdas: Vec<(S, usize)> = Vec::new();
        for (center, count) in clusters {
            let lam = if S::EXACT {
                let re = rationalize(center.re, 10_000)
                    .ok_or_else(|| GmoiError::NotExact(format!("eigenvalue {center}")))?;
                let im = rationalize(center.im, 10_000)
                    .ok_or_else(|| GmoiError::NotExact(format!("eigenvalue {center}")))?;
                exact_from_parts::<S>(re, im)?
            } else {
                S::from_c64(center)?
            };
            match lambdas.iter_mut().find(|(l, _)| *l == lam) {
                Some((_, c)) => *c += count,
                None => lambdas.push((lam, count)),
            }
        }
        lambdas.sort_by(|a, b| a.0.cmp_re_im(&b.0));

        let rank_tol = if S::EXACT { 0.0 } else { tol.sqrt() };
        let mut columns: Vec<Vec<S>> = Vec::with_capacity(n);
        let mut sorted = Vec::new();
        let mut eigenvalues = Vec::new();
        for (k, (lam, count)) in lambdas.iter().enumerate() {
            let chains = jordan_chains(x, lam, *count, rank_tol)?;
            for chain in chains {
                sorted.push((k, chain.len()));
                columns.extend(chain);
            }
            eigenvalues.push(lam.clone());
        }
        if columns.len() != n {
            return Err(GmoiError::ValidationFailure {
                what: "generalized eigenvector count".into(),
                residual: (n as f64 - columns.len() as f64).abs(),
                tol: 0.0,
            });
        }
        let transform = Matrix::from_columns(&columns)?;
        let j = Self::assemble(transform, eigenvalues, &sorted, tol)?;
        j.check_reconstruction(x)?;
        Ok(j)
    }

    fn check_reconstruction(&self, x: &Matrix<S>) -> Result<()> {
        let residual = (&self.reconstruct() - x).frobenius_norm();
        let bound = if S::EXACT { 0.0 } else { self.tol * x.frobenius_norm().max(1.0) };
        if residual > bound {
            return Err(GmoiError::ValidationFailure { what: "reconstruction".into(), residual, tol: bound });
        }
        Ok(())
    }

    /// `Σ λ_k P_{k,i} + Σ N_{k,i}`.
    pub fn reconstruct(&self) -> Matrix<S> {
        let (p, nil) = self.split_parts();
        &p + &nil
    }

    /// Semisimple and nilpotent parts.
    pub fn split_parts(&self) -> (Matrix<S>, Matrix<S>) {
        let mut semi = Matrix::zeros(self.dim);
        let mut nil = Matrix::zeros(self.dim);
        for b in &self.blocks {
            semi.add_scaled(&b.eigenvalue, &b.projector);
            nil.add_scaled(&S::one(), &b.nilpotent);
        }
        (semi, nil)
    }

    /// Whether every nilpotent part vanishes (exactly, or below `tol` in float mode).
    pub fn is_diagonalizable(&self) -> bool {
        self.blocks.iter().all(|b| b.order == 1)
    }

    /// Largest block order `max m_{k,i}`.
    pub fn max_order(&self) -> usize {
        self.blocks.iter().map(|b| b.order).max().unwrap_or(1)
    }

    /// Decomposition of the semisimple part `X_P` (same transform, all blocks of size one).
    pub fn semisimple_decomposition(&self) -> Result<Self> {
        let mut cols_blocks = Vec::with_capacity(self.dim);
        for b in &self.blocks {
            for _ in 0..b.order {
                cols_blocks.push((b.eigenvalue.clone(), 1));
            }
        }
        Self::prescribed(&self.transform, &cols_blocks, self.tol)
    }

    /// Structure signature: block orders per distinct eigenvalue.
    pub fn signature(&self) -> Vec<Vec<usize>> {
        let mut sig = vec![Vec::new(); self.eigenvalues.len()];
        for b in &self.blocks {
            sig[b.eigen_index].push(b.order);
        }
        sig
    }

    /// Residual report; pass the original matrix to include reconstruction.
    pub fn validate(&self, original: Option<&Matrix<S>>) -> ValidationReport {
        let n = self.dim;
        let mut idempotency: f64 = 0.0;
        let mut orthogonality: f64 = 0.0;
        let mut nilpotency: f64 = 0.0;
        let mut confinement: f64 = 0.0;
        let mut min_top: Option<f64> = None;
        let mut sum = Matrix::zeros(n);
        for (a, ba) in self.blocks.iter().enumerate() {
            let p = &ba.projector;
            idempotency = idempotency.max((&(p * p) - p).frobenius_norm());
            for (b, bb) in self.blocks.iter().enumerate() {
                if a != b {
                    orthogonality = orthogonality.max((p * &bb.projector).frobenius_norm());
                }
            }
            nilpotency = nilpotency.max(ba.nilpotent.pow(ba.order).frobenius_norm());
            confinement = confinement
                .max((&(p * &ba.nilpotent) - &ba.nilpotent).frobenius_norm())
                .max((&(&ba.nilpotent * p) - &ba.nilpotent).frobenius_norm());
            if ba.order > 1 {
                let top = ba.nilpotent.pow(ba.order - 1).frobenius_norm();
                min_top = Some(min_top.map_or(top, |m| m.min(top)));
            }
            sum.add_scaled(&S::one(), p);
        }
        let completeness = (&sum - &Matrix::identity(n)).frobenius_norm();
        let reconstruction = original.map(|x| (&self.reconstruct() - x).frobenius_norm());
        ValidationReport {
            idempotency,
            orthogonality,
            completeness,
            nilpotency,
            confinement,
            min_top_power: min_top,
            reconstruction,
        }
    }

    /// JSON report including every projector and nilpotent.
    pub fn to_json(&self) -> Value {
        json!({
            "dim": self.dim,
            "mode": S::MODE,
            "tolerance": self.tol,
            "eigenvalues": self.eigenvalues.iter().map(|l| l.to_json()).collect::<Vec<_>>(),
            "geometric_multiplicities": self.geometric,
            "algebraic_multiplicities": self.algebraic,
            "blocks": self.blocks.iter().map(|b| json!({
                "eigenvalue": b.eigenvalue.to_json(),
                "eigenvalue_index": b.eigen_index,
                "block_index": b.block_index,
                "order": b.order,
                "size": b.order,
                "projector": b.projector.to_json(),
                "nilpotent": b.nilpotent.to_json(),
            })).collect::<Vec<_>>(),
            "transform": self.transform.to_json(),
            "transform_inverse": self.transform_inv.to_json(),
        })
    }

    /// Rebuilds a decomposition from its JSON report (or from any object with
    /// `transform` and `blocks: [{eigenvalue, size|order}]`).
    pub fn from_json(v: &Value, tol: f64) -> Result<Self> {
        let transform = Matrix::from_json(
            v.get("transform")
                .ok_or_else(|| GmoiError::InvalidInput("decomposition JSON: missing field \"transform\"".into()))?,
        )?;
        let blocks = parse_block_list::<S>(v)?;
        let tol = v.get("tolerance").and_then(Value::as_f64).unwrap_or(tol);
        Self::prescribed(&transform, &blocks, tol)
    }
}

/// Parses `blocks: [{"eigenvalue": …, "size": m}]` (or `order` for `size`).
pub fn parse_block_list<S: Scalar>(v: &Value) -> Result<Vec<(S, usize)>> {
    let arr = v
        .get("blocks")
        .and_then(Value::as_array)
        .ok_or_else(|| GmoiError::InvalidInput("missing array field \"blocks\"".into()))?;
    arr.iter()
        .enumerate()
        .map(|(i, b)| {
            let lam = S::from_json(
                b.get("eigenvalue")
                    .ok_or_else(|| GmoiError::InvalidInput(format!("blocks[{i}]: missing \"eigenvalue\"")))?,
            )
            .map_err(|e| GmoiError::InvalidInput(format!("blocks[{i}].eigenvalue: {e}")))?;
            let size = b
                .get("size")
                .or_else(|| b.get("order"))
                .and_then(Value::as_u64)
                .ok_or_else(|| GmoiError::InvalidInput(format!("blocks[{i}]: missing positive integer \"size\"")))?;
            Ok((lam, size as usize))
        })
        .collect()
}

fn exact_from_parts<S: Scalar>(re: num_rational::BigRational, im: num_rational::BigRational) -> Result<S> {
    let q: CQ = Complex::new(re, im);
    S::from_json(&q.to_json())
}

/// `target += V[:, c] · W[r, :]`.
fn add_outer<S: Scalar>(target: &mut Matrix<S>, v: &Matrix<S>, c: usize, w: &Matrix<S>, r: usize) {
    let n = v.dim();
    for i in 0..n {
        let a = v.get(i, c);
        if a.is_zero() {
            continue;
        }
        for j in 0..n {
            let b = w.get(r, j);
            if b.is_zero() {
                continue;
            }
            let cur = target.get(i, j).clone();
            target.set(i, j, cur + a.clone() * b.clone());
        }
    }
}

/// Eigenvalues of a complex matrix from its Schur form.
pub fn eigenvalues_c64(x: &Matrix<C64>) -> Vec<C64> {
    let n = x.dim();
    let m = DMatrix::from_row_slice(n, n, x.entries());
    let (_, t) = m.schur().unpack();
    (0..n).map(|i| t[(i, i)]).collect()
}

/// Right singular vectors of the `dim` smallest singular values.
fn svd_kernel(m: &Matrix<C64>, dim: usize) -> Vec<Vec<C64>> {
    let n = m.dim();
    let svd = DMatrix::from_row_slice(n, n, m.entries()).svd(false, true);
    let v_t = svd.v_t.expect("requested V^H");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    order
        .into_iter()
        .take(dim)
        .map(|r| (0..n).map(|c| v_t[(r, c)].conj()).collect())
        .collect()
}

/// Single-linkage clustering of eigenvalues at radius `tol^{1/3} · scale`.
/// Returns `(mean, count)` per cluster. Clusters whose gap is within ten
/// radii are reported as ambiguous.
pub fn cluster_eigenvalues(eig: &[C64], tol: f64) -> Result<Vec<(C64, usize)>> {
    let scale = eig.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let radius = tol.cbrt() * scale;
    let n = eig.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for a in 0..n {
        for b in a + 1..n {
            if (eig[a] - eig[b]).norm() <= radius {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra] = rb;
            }
        }
    }
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        match groups.iter_mut().find(|g| g.0 == r) {
            Some(g) => g.1.push(i),
            None => groups.push((r, vec![i])),
        }
    }
    for (ga, gb) in groups.iter().enumerate().flat_map(|(i, ga)| groups[i + 1..].iter().map(move |gb| (ga, gb))) {
        let d = ga
            .1
            .iter()
            .flat_map(|&a| gb.1.iter().map(move |&b| (a, b)))
            .map(|(a, b)| (eig[a] - eig[b]).norm())
            .fold(f64::INFINITY, f64::min);
        if d <= 10.0 * radius {
            return Err(GmoiError::AmbiguousClustering {
                a: format!("{}", eig[ga.1[0]]),
                b: format!("{}", eig[gb.1[0]]),
                distance: d,
                band: 10.0 * radius,
            });
        }
    }
    let mut out: Vec<(C64, usize)> = groups
        .into_iter()
        .map(|(_, members)| {
            let sum: C64 = members.iter().map(|&i| eig[i]).sum();
            (sum / members.len() as f64, members.len())
        })
        .collect();
    out.sort_by(|a, b| a.0.re.total_cmp(&b.0.re).then(a.0.im.total_cmp(&b.0.im)));
    Ok(out)
}

/// Jordan chains of `x` at eigenvalue `lam` with algebraic multiplicity
/// `alg`. Each chain is returned bottom-up, `[A^{L−1}v, …, Av, v]` with
/// `A = X − λI`, sorted by decreasing length (stable in scan order).
fn jordan_chains<S: Scalar>(x: &Matrix<S>, lam: &S, alg: usize, rank_tol: f64) -> Result<Vec<Vec<Vec<S>>>> {
    let n = x.dim();
    let a = x - &Matrix::identity(n).scale(lam);
    // Powers and their ranks until the kernel dimension reaches `alg`.
    let mut powers = vec![Matrix::identity(n)];
    let mut ranks = vec![n];
    loop {
        let next = powers.last().expect("nonempty") * &a;
        let r = next.rank(rank_tol);
        let stalled = r == *ranks.last().expect("nonempty");
        powers.push(next);
        ranks.push(r);
        if n - r >= alg || stalled || powers.len() > n + 1 {
            break;
        }
    }
    let kernel_dim = n - *ranks.last().expect("nonempty");
    if kernel_dim != alg {
        return Err(GmoiError::ValidationFailure {
            what: format!("algebraic multiplicity of eigenvalue {:?} (rank profile {ranks:?})", lam.to_c64()),
            residual: (kernel_dim as f64 - alg as f64).abs(),
            tol: 0.0,
        });
    }
    let depth = ranks.len() - 1;
    // d[s] = number of blocks of size ≥ s.
    let d = |s: usize| if s == 0 || s > depth { 0 } else { ranks[s - 1] - ranks[s] };

    // Float mode: orthonormal kernel from the SVD, with the dimension fixed
    // by the rank profile (elimination at the loose rank tolerance would
    // perturb the vectors themselves). Exact mode: elimination.
    let kernel = |s: usize| -> Result<Vec<Vec<S>>> {
        let m = &powers[s];
        if S::EXACT {
            let rows: Vec<Vec<S>> = (0..n).map(|i| m.row(i)).collect();
            return Ok(nullspace_of_rows(rows, n, rank_tol));
        }
        svd_kernel(&m.to_c64(), n - ranks[s])
            .into_iter()
            .map(|v| v.into_iter().map(S::from_c64).collect())
            .collect()
    };

    let mut chains: Vec<Vec<Vec<S>>> = Vec::new();
    // level_vectors[s] holds chain vectors at height s from longer chains.
    let mut level_vectors: Vec<Vec<Vec<S>>> = vec![Vec::new(); depth + 2];
    for s in (1..=depth).rev() {
        let needed = d(s) - d(s + 1);
        if needed == 0 {
            continue;
        }
        let lower = if s > 1 { kernel(s - 1)? } else { Vec::new() };
        let mut span: Vec<Vec<S>> = lower;
        span.extend(level_vectors[s].iter().cloned());
        let mut span_rank = rank_of_vectors(&span, rank_tol);
        let mut found = 0;
        for cand in kernel(s)? {
            if found == needed {
                break;
            }
            let mut trial = span.clone();
            trial.push(cand.clone());
            let r = rank_of_vectors(&trial, rank_tol);
            if r > span_rank {
                span = trial;
                span_rank = r;
                found += 1;
                // Build the chain [A^{s−1}v, …, v].
                let mut chain = vec![cand.clone()];
                let mut cur = cand;
                for h in (1..s).rev() {
                    cur = a.apply(&cur);
                    level_vectors[h].push(cur.clone());
                    chain.push(cur.clone());
                }
                chain.reverse();
                chains.push(chain);
            }
        }
        if found != needed {
            return Err(GmoiError::ValidationFailure {
                what: format!("Jordan chains of length {s} for eigenvalue {:?}", lam.to_c64()),
                residual: (needed - found) as f64,
                tol: 0.0,
            });
        }
    }
    // Longest first, scan order within equal lengths (already the case).
    chains.sort_by(|a, b| match b.len().cmp(&a.len()) {
        Ordering::Equal => Ordering::Equal,
        o => o,
    });
    Ok(chains)
}

#[cfg(test)]
mod tests {
    use super::*;

    type Q = Matrix<CQ>;
    type M = Matrix<C64>;

    fn q(rows: &[&[i64]]) -> Q {
        Q::from_i64_rows(rows).unwrap()
    }

    #[test]
    fn identity_has_one_eigenvalue_and_zero_nilpotents() {
        let j = JordanDecomposition::auto(&q(&[&[1, 0], &[0, 1]]), 1e-9).unwrap();
        assert_eq!(j.eigenvalues, vec![CQ::one()]);
        assert_eq!(j.geometric, vec![2]);
        assert!(j.blocks.iter().all(|b| b.nilpotent.is_zero()));
        let sum = j.blocks.iter().fold(Q::zeros(2), |acc, b| &acc + &b.projector);
        assert_eq!(sum, Q::identity(2));
    }

    #[test]
    fn canonical_jordan_block() {
        let x = q(&[&[2, 1], &[0, 2]]);
        let j = JordanDecomposition::auto(&x, 1e-9).unwrap();
        assert_eq!(j.blocks.len(), 1);
        let b = &j.blocks[0];
        assert_eq!(b.eigenvalue, CQ::from_i64(2));
        assert_eq!(b.order, 2);
        assert_eq!(b.projector, Q::identity(2));
        assert_eq!(b.nilpotent, q(&[&[0, 1], &[0, 0]]));
        assert_eq!(j.reconstruct(), x);
        let (p, nil) = j.split_parts();
        assert_eq!(p, Q::identity(2).scale(&CQ::from_i64(2)));
        assert_eq!(nil, q(&[&[0, 1], &[0, 0]]));
    }

    #[test]
    fn distinct_diagonal_entries() {
        let j = JordanDecomposition::auto(&q(&[&[1, 0], &[0, 2]]), 1e-9).unwrap();
        assert_eq!(j.eigenvalues.len(), 2);
        assert_eq!(j.blocks[0].projector, q(&[&[1, 0], &[0, 0]]));
        assert_eq!(j.blocks[1].projector, q(&[&[0, 0], &[0, 1]]));
    }

    #[test]
    fn nilpotent_input() {
        let x = q(&[&[0, 1], &[0, 0]]);
        let j = JordanDecomposition::auto(&x, 1e-9).unwrap();
        assert_eq!(j.blocks[0].eigenvalue, CQ::zero());
        assert_eq!(j.blocks[0].nilpotent, x);
        assert_eq!(j.blocks[0].order, 2);
    }

    #[test]
    fn prescribed_blocks_are_sorted_canonically() {
        let blocks = vec![(CQ::from_i64(3), 1), (CQ::from_i64(1), 1), (CQ::from_i64(1), 2)];
        let v = q(&[&[1, 1, 0, 0], &[0, 1, 1, 0], &[1, 0, 1, 1], &[0, 2, 0, 1]]);
        let j = JordanDecomposition::prescribed(&v, &blocks, 0.0).unwrap();
        let sig: Vec<(usize, usize)> = j.blocks.iter().map(|b| (b.eigen_index, b.order)).collect();
        assert_eq!(sig, vec![(0, 2), (0, 1), (1, 1)]);
        assert_eq!(j.geometric, vec![2, 1]);
        assert_eq!(j.algebraic, vec![3, 1]);
        let rep = j.validate(None);
        assert_eq!(rep.max_residual(), 0.0);
        // Auto mode recovers the same structure from the assembled matrix.
        let x = j.reconstruct();
        let a = JordanDecomposition::auto(&x, 1e-9).unwrap();
        assert_eq!(a.signature(), j.signature());
        assert_eq!(a.validate(Some(&x)).max_residual(), 0.0);
    }

    #[test]
    fn zeroed_projector_shows_in_completeness() {
        let j0 = JordanDecomposition::auto(&q(&[&[1, 0], &[0, 2]]), 1e-9).unwrap();
        let mut j = j0.clone();
        let missing = j.blocks[1].projector.clone();
        j.blocks[1].projector = Q::zeros(2);
        let rep = j.validate(None);
        assert_eq!(rep.completeness, missing.frobenius_norm());
    }

    #[test]
    fn float_auto_mode_on_similar_jordan_form() {
        let v = M::from_i64_rows(&[&[2, 1, 0], &[1, 1, 1], &[0, 1, 3]]).unwrap();
        let blocks = vec![(C64::new(1.0, 0.0), 2), (C64::new(-2.0, 0.5), 1)];
        let j = JordanDecomposition::prescribed(&v, &blocks, 1e-9).unwrap();
        let x = j.reconstruct();
        let a = JordanDecomposition::auto(&x, 1e-9).unwrap();
        assert_eq!(a.signature(), vec![vec![1], vec![2]]);
        let rep = a.validate(Some(&x));
        assert!(rep.max_residual() < 1e-9, "{rep:?}");
        let (p, nil) = a.split_parts();
        assert!(p.commutator(&nil).frobenius_norm() < 1e-10);
    }

    #[test]
    fn close_clusters_are_ambiguous() {
        let eig = vec![C64::new(1.0, 0.0), C64::new(1.0 + 5e-3, 0.0)];
        assert!(matches!(cluster_eigenvalues(&eig, 1e-9), Err(GmoiError::AmbiguousClustering { .. })));
    }

    #[test]
    fn irrational_spectrum_rejected_in_exact_mode() {
        let x = q(&[&[0, 2], &[1, 0]]);
        assert!(JordanDecomposition::auto(&x, 1e-9).is_err());
        assert!(JordanDecomposition::auto(&x.to_c64(), 1e-9).is_ok());
    }

    #[test]
    fn json_round_trip_is_a_fixpoint() {
        let j = JordanDecomposition::auto(&q(&[&[2, 1, 0], &[0, 2, 0], &[0, 0, -1]]), 1e-9).unwrap();
        let text = j.to_json();
        let back = JordanDecomposition::<CQ>::from_json(&text, 1e-9).unwrap();
        assert_eq!(back.to_json(), text);
    }
}
