//! Deterministic fixture generation.
//!
//! Every fixture is `X = V J V⁻¹` with a known Jordan form `J` and a random
//! well-conditioned `V`, so tests never depend on structure inference. The
//! generator is driven by a seeded ChaCha8 stream: the same seed yields the
//! same fixtures (and byte-identical JSON) on every platform. In exact mode
//! `V` has small integer entries so that `V⁻¹` stays rational.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::derivative::{FamilyBlock, StructuredFamily};
use crate::error::{GmoiError, Result};
use crate::jordan::{parse_block_list, JordanDecomposition};
use crate::matrix::Matrix;
use crate::scalar::{Scalar, C64};

/// Transforms whose condition estimate exceeds this are redrawn.
pub const MAX_CONDITION: f64 = 1e6;

/// Entries of exact-mode transforms are drawn from `−ENTRY_RANGE..=ENTRY_RANGE`.
pub const ENTRY_RANGE: i64 = 3;

const MAX_REDRAWS: usize = 10_000;

/// A matrix with its ground-truth Jordan data.
#[derive(Clone, Debug)]
pub struct Fixture<S> {
    pub matrix: Matrix<S>,
    pub transform: Matrix<S>,
    /// `(λ, size)` in the column order of `transform`.
    pub blocks: Vec<(S, usize)>,
    pub decomposition: JordanDecomposition<S>,
}

impl<S: Scalar> Fixture<S> {
    /// Builds the fixture `V J V⁻¹` for the given transform and blocks.
    pub fn new(transform: Matrix<S>, blocks: Vec<(S, usize)>, tol: f64) -> Result<Self> {
        let decomposition = JordanDecomposition::prescribed(&transform, &blocks, tol)?;
        let matrix = decomposition.reconstruct();
        Ok(Self { matrix, transform, blocks, decomposition })
    }

    /// `{"matrix", "transform", "blocks": [{"eigenvalue", "size"}]}`.
    pub fn to_json(&self) -> Value {
        json!({
            "matrix": self.matrix.to_json(),
            "transform": self.transform.to_json(),
            "blocks": self
                .blocks
                .iter()
                .map(|(l, m)| json!({ "eigenvalue": l.to_json(), "size": m }))
                .collect::<Vec<_>>(),
        })
    }

    /// Inverse of [`Fixture::to_json`]; the stored matrix must match `V J V⁻¹`.
    pub fn from_json(v: &Value, tol: f64) -> Result<Self> {
        let field = |k: &str| v.get(k).ok_or_else(|| GmoiError::InvalidInput(format!("fixture JSON: missing field \"{k}\"")));
        let transform = Matrix::from_json(field("transform")?)
            .map_err(|e| GmoiError::InvalidInput(format!("fixture JSON: transform: {e}")))?;
        let blocks = parse_block_list::<S>(v)?;
        let fixture = Self::new(transform, blocks, tol)?;
        let stored = Matrix::<S>::from_json(field("matrix")?)
            .map_err(|e| GmoiError::InvalidInput(format!("fixture JSON: matrix: {e}")))?;
        let residual = (&stored - &fixture.matrix).frobenius_norm();
        let bound = if S::EXACT { 0.0 } else { tol * stored.frobenius_norm().max(1.0) };
        if residual > bound {
            return Err(GmoiError::ValidationFailure { what: "fixture matrix vs V J V⁻¹".into(), residual, tol: bound });
        }
        Ok(fixture)
    }
}

/// Seeded generator of transforms, structures, fixtures and families.
#[derive(Clone, Debug)]
pub struct FixtureGenerator {
    rng: ChaCha8Rng,
}

impl FixtureGenerator {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Uniform integer in `lo..=hi`.
    pub fn int(&mut self, lo: i64, hi: i64) -> i64 {
        self.rng.random_range(lo..=hi)
    }

    /// Uniform real in `[lo, hi)`.
    pub fn real(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }

    /// Random invertible transform with condition estimate ≤ [`MAX_CONDITION`].
    /// Exact mode: integer entries in `[−3, 3]`; float mode: real entries in `[−1, 1)`.
    pub fn transform<S: Scalar>(&mut self, n: usize) -> Result<Matrix<S>> {
        for _ in 0..MAX_REDRAWS {
            let v = if S::EXACT {
                Matrix::from_fn(n, |_, _| S::from_i64(self.int(-ENTRY_RANGE, ENTRY_RANGE)))
            } else {
                let entries: Vec<S> = (0..n * n)
                    .map(|_| S::from_c64(C64::new(self.real(-1.0, 1.0), 0.0)))
                    .collect::<Result<_>>()?;
                Matrix::from_vec(n, entries)?
            };
            let cond = v.condition_estimate();
            if cond.is_finite() && cond <= MAX_CONDITION && v.inverse().is_ok() {
                return Ok(v);
            }
        }
        Err(GmoiError::InvalidInput(format!("no well-conditioned {n}×{n} transform after {MAX_REDRAWS} draws")))
    }

    /// Random unitary matrix: Gram–Schmidt on a random complex matrix (float)
    /// or the Cayley transform `(I − A)(I + A)⁻¹` of a rational skew-Hermitian
    /// `A` (exact).
    pub fn unitary<S: Scalar>(&mut self, n: usize) -> Result<Matrix<S>> {
        if S::EXACT {
            let mut a = Matrix::<S>::zeros(n);
            for i in 0..n {
                for j in i + 1..n {
                    let e = S::from_ratio(self.int(-2, 2), 2);
                    a.set(i, j, e.clone());
                    a.set(j, i, -e);
                }
            }
            let id = Matrix::identity(n);
            return Ok(&(&id - &a) * &(&id + &a).inverse()?);
        }
        loop {
            let mut cols: Vec<Vec<C64>> = Vec::with_capacity(n);
            for _ in 0..n {
                let mut v: Vec<C64> = (0..n).map(|_| C64::new(self.real(-1.0, 1.0), self.real(-1.0, 1.0))).collect();
                for u in &cols {
                    let dot: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                    for (vi, ui) in v.iter_mut().zip(u) {
                        *vi -= dot * ui;
                    }
                }
                let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if norm < 1e-3 {
                    break;
                }
                cols.push(v.into_iter().map(|z| z / norm).collect());
            }
            if cols.len() == n {
                let cols: Vec<Vec<S>> = cols
                    .into_iter()
                    .map(|c| c.into_iter().map(S::from_c64).collect::<Result<_>>())
                    .collect::<Result<_>>()?;
                return Matrix::from_columns(&cols);
            }
        }
    }

    /// Random Jordan structure of total size `n` with block sizes ≤
    /// `max_block` and at most `max_eigenvalues` distinct integer eigenvalues
    /// in `[−3, 3]` (so several blocks may share an eigenvalue).
    pub fn structure(&mut self, n: usize, max_block: usize, max_eigenvalues: usize) -> Vec<(i64, usize)> {
        let mut pool: Vec<i64> = Vec::new();
        while pool.len() < max_eigenvalues.max(1) {
            let l = self.int(-3, 3);
            if !pool.contains(&l) {
                pool.push(l);
            }
        }
        let mut left = n;
        let mut out = Vec::new();
        while left > 0 {
            let size = self.int(1, max_block.min(left) as i64) as usize;
            let l = pool[self.int(0, pool.len() as i64 - 1) as usize];
            out.push((l, size));
            left -= size;
        }
        out
    }

    /// Fixture with a random transform (unitary if requested).
    pub fn fixture<S: Scalar>(&mut self, blocks: &[(S, usize)], unitary: bool, tol: f64) -> Result<Fixture<S>> {
        let n = blocks.iter().map(|b| b.1).sum();
        let v = if unitary { self.unitary(n)? } else { self.transform(n)? };
        Fixture::new(v, blocks.to_vec(), tol)
    }

    /// Fixture of size `n` with a random structure (see [`FixtureGenerator::structure`]).
    pub fn random_fixture<S: Scalar>(&mut self, n: usize, max_block: usize, unitary: bool, tol: f64) -> Result<Fixture<S>> {
        let max_eig = self.int(1, 3) as usize;
        let blocks: Vec<(S, usize)> = self
            .structure(n, max_block, max_eig)
            .into_iter()
            .map(|(l, m)| (S::from_i64(l), m))
            .collect();
        self.fixture(&blocks, unitary, tol)
    }

    /// Integer matrix with entries in `lo..=hi`.
    pub fn int_matrix<S: Scalar>(&mut self, n: usize, lo: i64, hi: i64) -> Matrix<S> {
        Matrix::from_fn(n, |_, _| S::from_i64(self.int(lo, hi)))
    }

    /// Real matrix with entries uniform in `[−scale, scale)` (float mode only
    /// keeps all digits; exact mode stores the binary value exactly).
    pub fn real_matrix<S: Scalar>(&mut self, n: usize, scale: f64) -> Result<Matrix<S>> {
        let entries: Vec<S> = (0..n * n)
            .map(|_| S::from_c64(C64::new(self.real(-scale, scale), 0.0)))
            .collect::<Result<_>>()?;
        Matrix::from_vec(n, entries)
    }

    /// Random Hermitian matrix with small integer entries.
    pub fn hermitian<S: Scalar>(&mut self, n: usize) -> Matrix<S> {
        let mut h = Matrix::zeros(n);
        for i in 0..n {
            h.set(i, i, S::from_i64(self.int(-3, 3)));
            for j in i + 1..n {
                let e = S::from_i64(self.int(-2, 2));
                h.set(i, j, e.clone());
                h.set(j, i, e.conj());
            }
        }
        h
    }

    /// Structure-stable family `X(t) = V [⊕ (λ + μt) I + (1 + νt) S] V⁻¹` with
    /// random structure, integer drifts `μ ∈ [−2, 2]` (shared per eigenvalue)
    /// and stretches `ν ∈ {−1, 0, 1}`; `diagonalizable` forces blocks of size one
    /// and distinct eigenvalues.
    pub fn structured_family<S: Scalar>(
        &mut self,
        n: usize,
        max_block: usize,
        diagonalizable: bool,
        tol: f64,
    ) -> Result<StructuredFamily<S>> {
        let structure: Vec<(i64, usize)> = if diagonalizable {
            let mut eig: Vec<i64> = Vec::new();
            while eig.len() < n {
                let l = self.int(-4, 4);
                if !eig.contains(&l) {
                    eig.push(l);
                }
            }
            eig.into_iter().map(|l| (l, 1)).collect()
        } else {
            self.structure(n, max_block, 2)
        };
        let mut drifts: Vec<(i64, i64)> = Vec::new();
        let mut blocks = Vec::with_capacity(structure.len());
        for (l, size) in structure {
            let mu = match drifts.iter().find(|d| d.0 == l) {
                Some(d) => d.1,
                None => {
                    let mu = self.int(-2, 2);
                    drifts.push((l, mu));
                    mu
                }
            };
            let nu = if size > 1 { self.int(-1, 1) } else { 0 };
            blocks.push(FamilyBlock {
                eigenvalue: S::from_i64(l),
                size,
                drift: S::from_i64(mu),
                stretch: S::from_i64(nu),
            });
        }
        let v = self.transform(n)?;
        StructuredFamily::new(v, blocks, tol)
    }
}

/// JSON form of a structure request: `{"blocks": [{"eigenvalue", "size"}], "unitary"?: bool}`.
pub fn fixture_from_request<S: Scalar>(request: &Value, seed: u64, tol: f64) -> Result<Fixture<S>> {
    let blocks = parse_block_list::<S>(request)?;
    if blocks.is_empty() {
        return Err(GmoiError::InvalidInput("fixture request: \"blocks\" is empty".into()));
    }
    let unitary = request.get("unitary").and_then(Value::as_bool).unwrap_or(false);
    FixtureGenerator::new(seed).fixture(&blocks, unitary, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{CQ, DEFAULT_TOL};

    #[test]
    fn same_seed_same_bytes() {
        let req = json!({ "blocks": [{ "eigenvalue": 1, "size": 2 }, { "eigenvalue": "1/2", "size": 1 }] });
        let a = fixture_from_request::<CQ>(&req, 7, 0.0).unwrap().to_json().to_string();
        let b = fixture_from_request::<CQ>(&req, 7, 0.0).unwrap().to_json().to_string();
        assert_eq!(a, b);
        let c = fixture_from_request::<CQ>(&req, 8, 0.0).unwrap().to_json().to_string();
        assert_ne!(a, c);
        let fa = fixture_from_request::<C64>(&req, 7, DEFAULT_TOL).unwrap().to_json().to_string();
        let fb = fixture_from_request::<C64>(&req, 7, DEFAULT_TOL).unwrap().to_json().to_string();
        assert_eq!(fa, fb);
    }

    #[test]
    fn fixtures_are_similar_to_their_jordan_form() {
        let mut g = FixtureGenerator::new(1);
        for _ in 0..20 {
            let f = g.random_fixture::<CQ>(5, 3, false, 0.0).unwrap();
            assert!(f.transform.condition_estimate() <= MAX_CONDITION);
            assert_eq!(f.decomposition.validate(Some(&f.matrix)).max_residual(), 0.0);
            assert!(f.blocks.iter().all(|b| b.1 <= 3));
            let back = Fixture::<CQ>::from_json(&f.to_json(), 0.0).unwrap();
            assert_eq!(back.matrix, f.matrix);
        }
        let single = g.fixture(&[(CQ::one(), 2)], false, 0.0).unwrap();
        assert_eq!(single.decomposition.signature(), vec![vec![2]]);
        let diag = g.fixture(&[(CQ::one(), 1), (CQ::from_i64(2), 1)], false, 0.0).unwrap();
        assert!(diag.decomposition.is_diagonalizable());
        assert_eq!(diag.decomposition.eigenvalues.len(), 2);
    }

    #[test]
    fn unitary_transforms_are_unitary() {
        let mut g = FixtureGenerator::new(3);
        for n in 1..=4 {
            let u = g.unitary::<CQ>(n).unwrap();
            assert_eq!(&u.adjoint() * &u, Matrix::identity(n));
            let v = g.unitary::<C64>(n).unwrap();
            assert!((&(&v.adjoint() * &v) - &Matrix::identity(n)).frobenius_norm() < 1e-12);
        }
    }

    #[test]
    fn tampered_fixture_is_rejected() {
        let mut g = FixtureGenerator::new(5);
        let f = g.random_fixture::<CQ>(3, 2, false, 0.0).unwrap();
        let mut v = f.to_json();
        v["matrix"]["entries"][0] = json!(["1234", "0"]);
        assert!(matches!(Fixture::<CQ>::from_json(&v, 0.0), Err(GmoiError::ValidationFailure { .. })));
    }
}
