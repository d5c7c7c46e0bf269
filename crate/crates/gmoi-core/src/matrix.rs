//! Dense square matrices over either scalar mode, with Gauss–Jordan
//! inversion, rank/nullspace by row reduction, and the Frobenius norm.

use std::ops::{Add, Mul, Neg, Sub};

use serde_json::{json, Value};

use crate::error::{GmoiError, Result};
use crate::scalar::{Scalar, C64};

/// Square `n × n` matrix stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<S> {
    n: usize,
    data: Vec<S>,
}

impl<S: Scalar> Matrix<S> {
    /// The zero matrix.
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![S::zero(); n * n] }
    }

    /// The identity matrix.
    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { S::one() } else { S::zero() })
    }

    /// Builds a matrix entry by entry.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    /// Builds a matrix from rows; every row must have as many entries as there are rows.
    pub fn from_rows(rows: Vec<Vec<S>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(GmoiError::InvalidInput("matrix must have at least one row".into()));
        }
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(GmoiError::DimensionMismatch { expected: n, found: row.len() });
            }
            data.extend(row);
        }
        Ok(Self { n, data })
    }

    /// Builds a matrix from row-major data of length `n²`.
    pub fn from_vec(n: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != n * n {
            return Err(GmoiError::DimensionMismatch { expected: n * n, found: data.len() });
        }
        Ok(Self { n, data })
    }

    /// Integer-valued matrix; convenient for fixtures.
    pub fn from_i64_rows(rows: &[&[i64]]) -> Result<Self> {
        Self::from_rows(rows.iter().map(|r| r.iter().map(|&v| S::from_i64(v)).collect()).collect())
    }

    /// Diagonal matrix.
    pub fn diag(entries: &[S]) -> Self {
        let n = entries.len();
        Self::from_fn(n, |i, j| if i == j { entries[i].clone() } else { S::zero() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &S {
        &self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: S) {
        self.data[i * self.n + j] = v;
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[S] {
        &self.data
    }

    /// Row `i` as a vector.
    pub fn row(&self, i: usize) -> Vec<S> {
        self.data[i * self.n..(i + 1) * self.n].to_vec()
    }

    /// Column `j` as a vector.
    pub fn column(&self, j: usize) -> Vec<S> {
        (0..self.n).map(|i| self.get(i, j).clone()).collect()
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<S>]) -> Result<Self> {
        let n = cols.len();
        for c in cols {
            if c.len() != n {
                return Err(GmoiError::DimensionMismatch { expected: n, found: c.len() });
            }
        }
        Ok(Self::from_fn(n, |i, j| cols[j][i].clone()))
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            Err(GmoiError::DimensionMismatch { expected: self.n, found: other.n })
        } else {
            Ok(())
        }
    }

    /// Matrix product with dimension check.
    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        let n = self.n;
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = S::zero();
                for k in 0..n {
                    let a = &self.data[i * n + k];
                    let b = &other.data[k * n + j];
                    if a.is_zero() || b.is_zero() {
                        continue;
                    }
                    acc = acc + a.clone() * b.clone();
                }
                out.push(acc);
            }
        }
        Ok(Self { n, data: out })
    }

    /// Matrix sum with dimension check.
    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(self.zip_with(other, |a, b| a.clone() + b.clone()))
    }

    /// Matrix difference with dimension check.
    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(self.zip_with(other, |a, b| a.clone() - b.clone()))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&S, &S) -> S) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(a, b)).collect(),
        }
    }

    /// Multiplies every entry by `s`.
    pub fn scale(&self, s: &S) -> Self {
        if s.is_zero() {
            return Self::zeros(self.n);
        }
        Self { n: self.n, data: self.data.iter().map(|a| a.clone() * s.clone()).collect() }
    }

    /// `self += s · other` in place.
    pub fn add_scaled(&mut self, s: &S, other: &Self) {
        assert_eq!(self.n, other.n, "dimension mismatch in add_scaled");
        if s.is_zero() {
            return;
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            if !b.is_zero() {
                *a = a.clone() + s.clone() * b.clone();
            }
        }
    }

    /// Non-negative integer power.
    pub fn pow(&self, k: usize) -> Self {
        let mut acc = Self::identity(self.n);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Transpose.
    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(j, i).clone())
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(j, i).conj())
    }

    pub fn trace(&self) -> S {
        (0..self.n).fold(S::zero(), |acc, i| acc + self.get(i, i).clone())
    }

    /// Frobenius norm: square root of the sum of squared entry moduli.
    pub fn frobenius_norm(&self) -> f64 {
        self.data
            .iter()
            .map(|a| {
                let m = a.modulus();
                m * m
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|a| a.modulus()).fold(0.0, f64::max)
    }

    /// Exact test for the zero matrix.
    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|a| a.is_zero())
    }

    /// Commutator `self·other − other·self`.
    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    /// Entry-wise map into another scalar type.
    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> Matrix<T> {
        Matrix { n: self.n, data: self.data.iter().map(f).collect() }
    }

    /// Nearest double-precision matrix.
    pub fn to_c64(&self) -> Matrix<C64> {
        self.map(|a| a.to_c64())
    }

    /// Converts a double-precision matrix into this mode.
    pub fn from_c64(m: &Matrix<C64>) -> Result<Self> {
        let data = m.data.iter().map(|z| S::from_c64(*z)).collect::<Result<Vec<_>>>()?;
        Ok(Self { n: m.n, data })
    }

    /// Inverse by Gauss–Jordan elimination.
    ///
    /// Float mode uses partial pivoting by largest modulus and treats pivots
    /// below `tol · max|a|` as zero; exact mode takes the first nonzero pivot.
    pub fn inverse_tol(&self, tol: f64) -> Result<Self> {
        let n = self.n;
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut a: Vec<Vec<S>> = (0..n).map(|i| self.row(i)).collect();
        let mut inv: Vec<Vec<S>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { S::one() } else { S::zero() }).collect())
            .collect();
        let mut min_pivot = f64::INFINITY;
        for col in 0..n {
            let pivot_row = if S::EXACT {
                (col..n).find(|&r| !a[r][col].is_zero())
            } else {
                let (r, m) = (col..n)
                    .map(|r| (r, a[r][col].modulus()))
                    .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
                if m > tol * scale {
                    Some(r)
                } else {
                    None
                }
            };
            let Some(p) = pivot_row else {
                let pivot = (col..n).map(|r| a[r][col].modulus()).fold(0.0, f64::max);
                return Err(GmoiError::Singular {
                    pivot,
                    condition: if pivot > 0.0 { scale / pivot } else { f64::INFINITY },
                });
            };
            a.swap(col, p);
            inv.swap(col, p);
            let piv = a[col][col].clone();
            min_pivot = min_pivot.min(piv.modulus());
            let piv_inv = S::one() / piv;
            for j in 0..n {
                a[col][j] = a[col][j].clone() * piv_inv.clone();
                inv[col][j] = inv[col][j].clone() * piv_inv.clone();
            }
            for r in 0..n {
                if r == col || a[r][col].is_zero() {
                    continue;
                }
                let factor = a[r][col].clone();
                for j in 0..n {
                    if !a[col][j].is_zero() {
                        a[r][j] = a[r][j].clone() - factor.clone() * a[col][j].clone();
                    }
                    if !inv[col][j].is_zero() {
                        inv[r][j] = inv[r][j].clone() - factor.clone() * inv[col][j].clone();
                    }
                }
            }
        }
        let _ = min_pivot;
        Self::from_rows(inv)
    }

    /// Inverse at a working tolerance of `1e-13` relative to the largest entry
    /// (float mode) or exactly (rational mode).
    pub fn inverse(&self) -> Result<Self> {
        self.inverse_tol(1e-13)
    }

    /// Frobenius condition estimate `‖A‖_F ‖A⁻¹‖_F`.
    pub fn condition_estimate(&self) -> f64 {
        match self.inverse() {
            Ok(inv) => self.frobenius_norm() * inv.frobenius_norm(),
            Err(_) => f64::INFINITY,
        }
    }

    /// Numerical rank (exact in rational mode).
    pub fn rank(&self, tol: f64) -> usize {
        let rows: Vec<Vec<S>> = (0..self.n).map(|i| self.row(i)).collect();
        rref(rows, self.n, tol).1.len()
    }

    /// Basis of the right nullspace `{v : A v = 0}` as column vectors.
    pub fn nullspace(&self, tol: f64) -> Vec<Vec<S>> {
        let rows: Vec<Vec<S>> = (0..self.n).map(|i| self.row(i)).collect();
        nullspace_of_rows(rows, self.n, tol)
    }

    /// Matrix–vector product.
    pub fn apply(&self, v: &[S]) -> Vec<S> {
        (0..self.n)
            .map(|i| {
                (0..self.n).fold(S::zero(), |acc, j| {
                    let a = self.get(i, j);
                    if a.is_zero() || v[j].is_zero() {
                        acc
                    } else {
                        acc + a.clone() * v[j].clone()
                    }
                })
            })
            .collect()
    }

    /// JSON form `{"dim": n, "entries": [[re, im], …]}` (row-major).
    pub fn to_json(&self) -> Value {
        json!({
            "dim": self.n,
            "entries": self.data.iter().map(|a| a.to_json()).collect::<Vec<_>>(),
        })
    }

    /// Parses the JSON form. `entries` may be the flat row-major list of
    /// `n²` scalars or a list of `n` rows.
    pub fn from_json(v: &Value) -> Result<Self> {
        let entries = v
            .get("entries")
            .and_then(Value::as_array)
            .ok_or_else(|| GmoiError::InvalidInput("matrix JSON: missing array field \"entries\"".into()))?;
        let declared = match v.get("dim") {
            Some(d) => Some(
                d.as_u64()
                    .ok_or_else(|| GmoiError::InvalidInput("matrix JSON: field \"dim\" must be a positive integer".into()))?
                    as usize,
            ),
            None => None,
        };
        let is_nested = entries
            .first()
            .and_then(Value::as_array)
            .map(|first| first.iter().any(|x| x.is_array()))
            .unwrap_or(false);
        let scalars: Vec<S> = if is_nested {
            let mut out = Vec::new();
            for (i, row) in entries.iter().enumerate() {
                let row = row
                    .as_array()
                    .ok_or_else(|| GmoiError::InvalidInput(format!("matrix JSON: row {i} is not an array")))?;
                for (j, x) in row.iter().enumerate() {
                    out.push(S::from_json(x).map_err(|e| {
                        GmoiError::InvalidInput(format!("matrix JSON: entries[{i}][{j}]: {e}"))
                    })?);
                }
            }
            out
        } else {
            entries
                .iter()
                .enumerate()
                .map(|(k, x)| {
                    S::from_json(x).map_err(|e| GmoiError::InvalidInput(format!("matrix JSON: entries[{k}]: {e}")))
                })
                .collect::<Result<_>>()?
        };
        let n = match declared {
            Some(n) => n,
            None => (scalars.len() as f64).sqrt().round() as usize,
        };
        if n == 0 {
            return Err(GmoiError::InvalidInput("matrix JSON: dimension must be positive".into()));
        }
        Self::from_vec(n, scalars)
    }
}

/// Reduced row echelon form of a rectangular matrix (`rows.len() × cols`).
/// Returns the reduced rows and the pivot columns.
///
/// Float mode pivots on the largest remaining modulus in each column and
/// treats entries below `tol · max|a|` as zero.
#[allow(clippy::needless_range_loop)] // Row operations read clearest with explicit indices.
pub fn rref<S: Scalar>(mut a: Vec<Vec<S>>, cols: usize, tol: f64) -> (Vec<Vec<S>>, Vec<usize>) {
    let m = a.len();
    let scale = a
        .iter()
        .flat_map(|r| r.iter().map(|x| x.modulus()))
        .fold(0.0, f64::max);
    let thresh = tol * scale.max(f64::MIN_POSITIVE);
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row >= m {
            break;
        }
        let p = if S::EXACT {
            (row..m).find(|&r| !a[r][col].is_zero())
        } else {
            let (r, best) = (row..m)
                .map(|r| (r, a[r][col].modulus()))
                .fold((row, -1.0), |b, c| if c.1 > b.1 { c } else { b });
            (best > thresh).then_some(r)
        };
        let Some(p) = p else {
            if !S::EXACT {
                for r in row..m {
                    a[r][col] = S::zero();
                }
            }
            continue;
        };
        a.swap(row, p);
        let inv = S::one() / a[row][col].clone();
        for j in 0..cols {
            a[row][j] = a[row][j].clone() * inv.clone();
        }
        for r in 0..m {
            if r == row || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for j in 0..cols {
                if !a[row][j].is_zero() {
                    a[r][j] = a[r][j].clone() - f.clone() * a[row][j].clone();
                }
            }
            a[r][col] = S::zero();
        }
        pivots.push(col);
        row += 1;
    }
    (a, pivots)
}

/// Nullspace basis of a rectangular matrix given by rows.
pub fn nullspace_of_rows<S: Scalar>(rows: Vec<Vec<S>>, cols: usize, tol: f64) -> Vec<Vec<S>> {
    let (r, pivots) = rref(rows, cols, tol);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![S::zero(); cols];
            v[f] = S::one();
            for (i, &p) in pivots.iter().enumerate() {
                v[p] = -r[i][f].clone();
            }
            v
        })
        .collect()
}

/// Rank of a set of vectors (as rows).
pub fn rank_of_vectors<S: Scalar>(vectors: &[Vec<S>], tol: f64) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let cols = vectors[0].len();
    rref(vectors.to_vec(), cols, tol).1.len()
}

/// Product with dimension check (free-function form).
pub fn mat_mul<S: Scalar>(a: &Matrix<S>, b: &Matrix<S>) -> Result<Matrix<S>> {
    a.try_mul(b)
}

/// Frobenius norm (free-function form).
pub fn frobenius_norm<S: Scalar>(a: &Matrix<S>) -> f64 {
    a.frobenius_norm()
}

/// Inverse (free-function form).
pub fn inverse<S: Scalar>(a: &Matrix<S>) -> Result<Matrix<S>> {
    a.inverse()
}

/// Product of a sequence of matrices, left to right.
pub fn product<'a, S: Scalar>(n: usize, factors: impl IntoIterator<Item = &'a Matrix<S>>) -> Matrix<S> {
    factors.into_iter().fold(Matrix::identity(n), |acc, m| &acc * m)
}

impl<'a, S: Scalar> Mul<&'a Matrix<S>> for &'a Matrix<S> {
    type Output = Matrix<S>;
    /// Panics on dimension mismatch; use [`Matrix::try_mul`] for a checked product.
    fn mul(self, rhs: &'a Matrix<S>) -> Matrix<S> {
        self.try_mul(rhs).expect("matrix dimension mismatch")
    }
}

impl<'a, S: Scalar> Add<&'a Matrix<S>> for &'a Matrix<S> {
    type Output = Matrix<S>;
    fn add(self, rhs: &'a Matrix<S>) -> Matrix<S> {
        self.try_add(rhs).expect("matrix dimension mismatch")
    }
}

impl<'a, S: Scalar> Sub<&'a Matrix<S>> for &'a Matrix<S> {
    type Output = Matrix<S>;
    fn sub(self, rhs: &'a Matrix<S>) -> Matrix<S> {
        self.try_sub(rhs).expect("matrix dimension mismatch")
    }
}

impl<S: Scalar> Neg for &Matrix<S> {
    type Output = Matrix<S>;
    fn neg(self) -> Matrix<S> {
        Matrix { n: self.n, data: self.data.iter().map(|a| -a.clone()).collect() }
    }
}
