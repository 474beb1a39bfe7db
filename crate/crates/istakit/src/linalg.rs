//! Minimal dense linear algebra: vectors, matrices, products, norms and
//! power-iteration spectral estimates. Everything here is plain `f64`
//! row-major storage; the problem sizes in this crate (hundreds of
//! columns) do not justify anything fancier.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors from vector/matrix construction and the iterative estimators.
#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("entry count {len} does not match {rows}x{cols}")]
    ShapeMismatch { rows: usize, cols: usize, len: usize },
    #[error("dimensions must be positive")]
    EmptyShape,
    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },
    #[error("matrix is identically zero")]
    ZeroMatrix,
    #[error("power iteration did not converge in {iters} iterations (best estimate {best})")]
    NoConvergence { best: f64, iters: usize },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

/// Dense real vector. Entries are validated to be finite on construction;
/// values produced by solver arithmetic are checked separately by the
/// divergence guard in `solvers`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    /// Builds a vector, rejecting NaN/Inf entries.
    pub fn new(entries: Vec<f64>) -> Result<Self, LinalgError> {
        if entries.is_empty() {
            return Err(LinalgError::EmptyShape);
        }
        for (i, v) in entries.iter().enumerate() {
            if !v.is_finite() {
                return Err(LinalgError::NonFinite { index: i });
            }
        }
        Ok(Self(entries))
    }

    /// Internal constructor for values computed by trusted arithmetic.
    pub(crate) fn from_raw(entries: Vec<f64>) -> Self {
        Self(entries)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// Constant vector with every entry equal to `value`.
    pub fn constant(dim: usize, value: f64) -> Result<Self, LinalgError> {
        Self::new(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn dot(&self, other: &DenseVector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn l1(&self) -> f64 {
        self.0.iter().map(|v| v.abs()).sum()
    }

    pub fn l2(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn linf(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Number of entries that are exactly nonzero (strict test; thresholded
    /// supports live in `metrics`).
    pub fn l0(&self) -> usize {
        self.0.iter().filter(|v| **v != 0.0).count()
    }

    /// All four norms in one pass.
    pub fn norms(&self) -> VectorNorms {
        let mut l0 = 0usize;
        let mut l1 = 0.0;
        let mut l2 = 0.0;
        let mut linf = 0.0f64;
        for &v in &self.0 {
            if v != 0.0 {
                l0 += 1;
            }
            let a = v.abs();
            l1 += a;
            l2 += v * v;
            if a > linf {
                linf = a;
            }
        }
        VectorNorms { l0, l1, l2: l2.sqrt(), linf }
    }

    /// Euclidean distance to another vector of the same dimension.
    pub fn distance(&self, other: &DenseVector) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl std::ops::Index<usize> for DenseVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// ℓ0/ℓ1/ℓ2/ℓ∞ of a vector, computed together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VectorNorms {
    pub l0: usize,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::EmptyShape);
        }
        if entries.len() != rows * cols {
            return Err(LinalgError::ShapeMismatch { rows, cols, len: entries.len() });
        }
        for (i, v) in entries.iter().enumerate() {
            if !v.is_finite() {
                return Err(LinalgError::NonFinite { index: i });
            }
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self { rows: n, cols: n, entries }
    }

    /// Diagonal matrix from the given entries.
    pub fn diagonal(diag: &[f64]) -> Result<Self, LinalgError> {
        let n = diag.len();
        let mut entries = vec![0.0; n * n];
        for (i, &d) in diag.iter().enumerate() {
            entries[i * n + i] = d;
        }
        Self::new(n, n, entries)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Row-major entry slice.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.cols + c]
    }

    fn row(&self, r: usize) -> &[f64] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|v| *v == 0.0)
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut entries = vec![0.0; self.entries.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                entries[c * self.rows + r] = self.get(r, c);
            }
        }
        DenseMatrix { rows: self.cols, cols: self.rows, entries }
    }
}

/// `A * v`.
pub fn matvec(a: &DenseMatrix, v: &DenseVector) -> Result<DenseVector, LinalgError> {
    if a.cols != v.dim() {
        return Err(LinalgError::DimensionMismatch { expected: a.cols, found: v.dim() });
    }
    let mut out = vec![0.0; a.rows];
    matvec_into(a, v.as_slice(), &mut out);
    Ok(DenseVector::from_raw(out))
}

/// `Aᵀ * v`.
pub fn matvec_transpose(a: &DenseMatrix, v: &DenseVector) -> Result<DenseVector, LinalgError> {
    if a.rows != v.dim() {
        return Err(LinalgError::DimensionMismatch { expected: a.rows, found: v.dim() });
    }
    let mut out = vec![0.0; a.cols];
    matvec_transpose_into(a, v.as_slice(), &mut out);
    Ok(DenseVector::from_raw(out))
}

pub(crate) fn matvec_into(a: &DenseMatrix, v: &[f64], out: &mut [f64]) {
    for (r, o) in out.iter_mut().enumerate() {
        let row = a.row(r);
        let mut acc = 0.0;
        for (x, y) in row.iter().zip(v) {
            acc += x * y;
        }
        *o = acc;
    }
}

pub(crate) fn matvec_transpose_into(a: &DenseMatrix, v: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    for (r, coef) in v.iter().enumerate() {
        let row = a.row(r);
        for (o, x) in out.iter_mut().zip(row) {
            *o += coef * x;
        }
    }
}

/// Largest eigenvalue of a symmetric positive semidefinite operator given as
/// `apply: v -> Bv`, by power iteration from the deterministic all-ones
/// start vector. Returns `(estimate, iterations, converged)`.
fn dominant_eigenvalue<F>(apply: F, dim: usize, tol: f64, max_iters: usize) -> (f64, usize, bool)
where
    F: Fn(&[f64], &mut [f64]),
{
    let mut v = vec![1.0 / (dim as f64).sqrt(); dim];
    let mut w = vec![0.0; dim];
    let mut prev = f64::NAN;
    for it in 1..=max_iters {
        apply(&v, &mut w);
        // v is unit, so the Rayleigh quotient is just v·w.
        let est: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let norm: f64 = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            // B annihilates the current iterate: eigenvalue 0 (e.g. B = 0).
            return (0.0, it, true);
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / norm;
        }
        if !prev.is_nan() && (est - prev).abs() <= tol * est.abs().max(f64::MIN_POSITIVE) {
            return (est, it, true);
        }
        prev = est;
    }
    (prev, max_iters, false)
}

/// Spectral norm ‖A‖₂ (largest singular value) via power iteration on AᵀA,
/// to relative accuracy `tol`. Fails with the best estimate if the iteration
/// does not settle within `max_iters`.
pub fn spectral_norm(a: &DenseMatrix, tol: f64, max_iters: usize) -> Result<f64, LinalgError> {
    if a.is_zero() {
        return Err(LinalgError::ZeroMatrix);
    }
    if tol <= 0.0 || tol.is_nan() {
        return Err(LinalgError::BadTolerance(tol));
    }
    let apply = |v: &[f64], out: &mut [f64]| {
        let mut t = vec![0.0; a.rows];
        matvec_into(a, v, &mut t);
        matvec_transpose_into(a, &t, out);
    };
    let (eig, iters, converged) = dominant_eigenvalue(apply, a.cols, tol, max_iters);
    let sigma = eig.max(0.0).sqrt();
    if converged {
        Ok(sigma)
    } else {
        Err(LinalgError::NoConvergence { best: sigma, iters })
    }
}

/// Power-iteration defaults used when building problem instances: τ enters
/// every solver, so the estimate must be accurate well beyond the 1e-10
/// stop criterion of the benchmark protocol.
pub const SPECTRAL_TOL: f64 = 1e-10;
pub const SPECTRAL_MAX_ITERS: usize = 10_000;

/// Extreme squared singular values `(sigma_min^2, sigma_max^2)` of `A`,
/// via power iteration on the Gram matrix G = AᵀA and on the shifted
/// operator `sigma_max^2 I - G`. When `A` has fewer rows than columns the
/// minimum singular value is zero by rank count and is returned directly.
/// The shifted iteration is budget-limited and its best estimate is
/// accepted: clustered small eigenvalues make it slow, and the value is
/// only consumed by contraction certificates.
pub fn extreme_squared_singular_values(a: &DenseMatrix) -> Result<(f64, f64), LinalgError> {
    if a.is_zero() {
        return Err(LinalgError::ZeroMatrix);
    }
    let n = a.cols;
    // Form G = AᵀA once; the shifted iteration needs many passes.
    let mut gram = vec![0.0; n * n];
    for r in 0..a.rows {
        let row = a.row(r);
        for i in 0..n {
            let ai = row[i];
            if ai == 0.0 {
                continue;
            }
            let g = &mut gram[i * n..(i + 1) * n];
            for (gj, aj) in g.iter_mut().zip(row) {
                *gj += ai * aj;
            }
        }
    }
    let gram_apply = |v: &[f64], out: &mut [f64]| {
        for i in 0..n {
            let row = &gram[i * n..(i + 1) * n];
            out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    };
    let (beta, iters, converged) =
        dominant_eigenvalue(gram_apply, n, SPECTRAL_TOL, SPECTRAL_MAX_ITERS);
    if !converged {
        return Err(LinalgError::NoConvergence { best: beta.max(0.0).sqrt(), iters });
    }
    let beta = beta.max(0.0);
    if a.rows < a.cols {
        return Ok((0.0, beta));
    }
    let shifted_apply = |v: &[f64], out: &mut [f64]| {
        gram_apply(v, out);
        for (o, vi) in out.iter_mut().zip(v) {
            *o = beta * vi - *o;
        }
    };
    let (shift_eig, _, _) =
        dominant_eigenvalue(shifted_apply, n, SPECTRAL_TOL, SPECTRAL_MAX_ITERS);
    let mu = (beta - shift_eig.max(0.0)).max(0.0).min(beta);
    Ok((mu, beta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matvec_identity_and_small_cases() {
        let id = DenseMatrix::identity(2);
        let v = DenseVector::new(vec![3.0, 4.0]).unwrap();
        assert_eq!(matvec(&id, &v).unwrap().as_slice(), &[3.0, 4.0]);

        let a = DenseMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let ones = DenseVector::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(matvec(&a, &ones).unwrap().as_slice(), &[3.0, 7.0]);

        let zero = DenseMatrix::new(3, 2, vec![0.0; 6]).unwrap();
        assert_eq!(matvec(&zero, &v).unwrap().as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn matvec_rejects_dimension_mismatch() {
        let a = DenseMatrix::new(2, 3, vec![0.0; 6]).unwrap();
        let v = DenseVector::new(vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            matvec(&a, &v),
            Err(LinalgError::DimensionMismatch { expected: 3, found: 2 })
        ));
    }

    #[test]
    fn construction_rejects_non_finite() {
        assert!(DenseVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(DenseMatrix::new(1, 2, vec![1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn norms_of_named_vectors() {
        let z = DenseVector::zeros(3);
        let n = z.norms();
        assert_eq!((n.l0, n.l1, n.l2, n.linf), (0, 0.0, 0.0, 0.0));

        let v = DenseVector::new(vec![1.0, -2.0, 0.0]).unwrap();
        let n = v.norms();
        assert_eq!(n.l0, 2);
        assert_eq!(n.l1, 3.0);
        assert!((n.l2 - 5.0f64.sqrt()).abs() < 1e-15);
        assert_eq!(n.linf, 2.0);

        // The strict nonzero test counts even denormal-scale entries.
        let tiny = DenseVector::new(vec![1e-30, 0.0]).unwrap();
        assert_eq!(tiny.norms().l0, 1);
    }

    #[test]
    fn spectral_norm_identity_and_diagonal() {
        let id = DenseMatrix::identity(4);
        assert!((spectral_norm(&id, 1e-12, 100).unwrap() - 1.0).abs() < 1e-12);
        let d = DenseMatrix::diagonal(&[3.0, 1.0]).unwrap();
        assert!((spectral_norm(&d, 1e-12, 1000).unwrap() - 3.0).abs() < 1e-10);
    }

    #[test]
    fn spectral_norm_rejects_zero_matrix() {
        let zero = DenseMatrix::new(2, 2, vec![0.0; 4]).unwrap();
        assert!(matches!(spectral_norm(&zero, 1e-10, 10), Err(LinalgError::ZeroMatrix)));
    }

    #[test]
    fn extreme_singular_values_diagonal() {
        let d = DenseMatrix::diagonal(&[3.0, 1.0]).unwrap();
        let (mu, beta) = extreme_squared_singular_values(&d).unwrap();
        assert!((beta - 9.0).abs() < 1e-9);
        assert!((mu - 1.0).abs() < 1e-9);

        let id = DenseMatrix::identity(5);
        let (mu, beta) = extreme_squared_singular_values(&id).unwrap();
        assert!((beta - 1.0).abs() < 1e-12);
        assert!((mu - 1.0).abs() < 1e-12);
    }

    #[test]
    fn wide_matrix_has_zero_mu() {
        let a = DenseMatrix::new(2, 3, vec![1.0, 0.5, -0.25, 0.0, 2.0, 1.0]).unwrap();
        let (mu, _) = extreme_squared_singular_values(&a).unwrap();
        assert_eq!(mu, 0.0);
    }
}
