//! Small dense matrices and symmetric-positive-definite kernels.
//!
//! Everything here targets the tiny dimensions of regression models (p, l ≤ ~10),
//! so the implementations favour exactness of invariants over asymptotics:
//! Cholesky-type factorization backs inversion and log-determinants, and a cyclic
//! Jacobi sweep backs square roots and eigenvalue bounds. Positive definiteness is
//! defined operationally: the factorization succeeds with every pivot above
//! [`PIVOT_REL_TOL`] times the largest diagonal entry.

use crate::error::{Error, Result};
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

/// Relative pivot threshold deciding positive definiteness.
pub const PIVOT_REL_TOL: f64 = 1e-12;
/// Entrywise tolerance for symmetry checks: |a_kl - a_lk| ≤ tol · max(1, |a_kl|).
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Jacobi stops when the off-diagonal Frobenius norm falls below this times ‖A‖_F.
pub const JACOBI_REL_TOL: f64 = 1e-14;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data; rejects non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{} entries", rows * cols),
                got: format!("{}", data.len()),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map(|row| row.len()).unwrap_or(0);
        if r == 0 || c == 0 {
            return Err(Error::ShapeMismatch {
                expected: "nonempty matrix".into(),
                got: format!("{r}x{c}"),
            });
        }
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::ShapeMismatch {
                expected: format!("rows of length {c}"),
                got: "ragged rows".into(),
            });
        }
        Self::new(r, c, rows.iter().flatten().copied().collect())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut m = Self::zeros(entries.len(), entries.len());
        for (i, &x) in entries.iter().enumerate() {
            m.set(i, i, x);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, x: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = x;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch {
                expected: format!("{} inner rows", self.cols),
                got: format!("{}", other.rows),
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::ShapeMismatch {
                expected: format!("vector of length {}", self.cols),
                got: format!("{}", v.len()),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.rows, self.cols),
                got: format!("{}x{}", other.rows, other.cols),
            });
        }
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Matrix { rows: self.rows, cols: self.cols, data })
    }

    pub fn scaled(&self, k: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x * k).collect(),
        }
    }

    /// Adds `k` times `other` in place (same shape required).
    pub fn add_scaled_assign(&mut self, k: f64, other: &Matrix) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", self.rows, self.cols),
                got: format!("{}x{}", other.rows, other.cols),
            });
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += k * b;
        }
        Ok(())
    }

    /// `selfᵀ · self`, computed so the result is exactly symmetric.
    pub fn gram(&self) -> Matrix {
        let n = self.cols;
        let mut g = Matrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let mut s = 0.0;
                for r in 0..self.rows {
                    s += self.get(r, a) * self.get(r, b);
                }
                g.set(a, b, s);
                g.set(b, a, s);
            }
        }
        g
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_symmetric_within(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let a = self.get(i, j);
                let b = self.get(j, i);
                if (a - b).abs() > tol * f64::max(1.0, a.abs()) {
                    return false;
                }
            }
        }
        true
    }
}

// Serialized as an array of row arrays, matching the document schema.
impl Serialize for Matrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.rows))?;
        for i in 0..self.rows {
            seq.serialize_element(self.row(i))?;
        }
        seq.end()
    }
}

/// Symmetric positive definite matrix carrying its lower Cholesky factor.
///
/// Construction is the PD test: it fails with [`Error::NotPositiveDefinite`]
/// if symmetry or the pivot threshold is violated.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    mat: Matrix,
    chol: Matrix,
    min_rel_pivot: f64,
}

impl SpdMatrix {
    /// Factorizes with the default pivot threshold.
    pub fn from_matrix(mat: Matrix) -> Result<Self> {
        Self::from_matrix_with(mat, PIVOT_REL_TOL, SYMMETRY_TOL)
    }

    /// Factorizes with caller-supplied tolerances.
    pub fn from_matrix_with(mat: Matrix, pivot_rel_tol: f64, symmetry_tol: f64) -> Result<Self> {
        if !mat.is_square() {
            return Err(Error::ShapeMismatch {
                expected: "square matrix".into(),
                got: format!("{}x{}", mat.rows(), mat.cols()),
            });
        }
        if !mat.is_symmetric_within(symmetry_tol) {
            return Err(Error::NotSymmetric);
        }
        let n = mat.rows();
        let max_diag = (0..n).map(|i| mat.get(i, i)).fold(f64::NEG_INFINITY, f64::max);
        if !(max_diag > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: max_diag });
        }
        let threshold = pivot_rel_tol * max_diag;
        let mut l = Matrix::zeros(n, n);
        let mut min_rel_pivot = f64::INFINITY;
        for j in 0..n {
            // pivot = a_jj - Σ_k l_jk², tested before taking the square root
            let mut d = mat.get(j, j);
            for k in 0..j {
                d -= l.get(j, k) * l.get(j, k);
            }
            if !(d > threshold) {
                return Err(Error::NotPositiveDefinite { pivot: d / max_diag });
            }
            min_rel_pivot = min_rel_pivot.min(d / max_diag);
            let ljj = d.sqrt();
            l.set(j, j, ljj);
            for i in (j + 1)..n {
                let mut s = mat.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, s / ljj);
            }
        }
        Ok(Self { mat, chol: l, min_rel_pivot })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mat: Matrix::identity(n),
            chol: Matrix::identity(n),
            min_rel_pivot: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.mat
    }

    pub fn into_matrix(self) -> Matrix {
        self.mat
    }

    /// Smallest Cholesky pivot divided by the largest diagonal entry.
    pub fn min_relative_pivot(&self) -> f64 {
        self.min_rel_pivot
    }

    /// Inverse via the Cholesky factor: A⁻¹ = (L⁻¹)ᵀ(L⁻¹), exactly symmetric.
    pub fn inverse(&self) -> Result<SpdMatrix> {
        let n = self.dim();
        // forward-substitute L·X = I to get X = L⁻¹ (lower triangular)
        let mut linv = Matrix::zeros(n, n);
        for col in 0..n {
            for i in col..n {
                let mut s = if i == col { 1.0 } else { 0.0 };
                for k in col..i {
                    s -= self.chol.get(i, k) * linv.get(k, col);
                }
                linv.set(i, col, s / self.chol.get(i, i));
            }
        }
        let inv = linv.gram(); // (L⁻¹)ᵀ(L⁻¹), exactly symmetric
        SpdMatrix::from_matrix(inv)
    }

    /// Inverse square root via Jacobi: A^{-1/2} = Q·Λ^{-1/2}·Qᵀ, exactly symmetric.
    pub fn sqrt_inverse(&self) -> Result<SpdMatrix> {
        let (eigs, q) = symmetric_eigen(&self.mat)?;
        if eigs.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::NotPositiveDefinite { pivot: eigs[0] });
        }
        let n = self.dim();
        let inv_sqrt: Vec<f64> = eigs.iter().map(|&x| 1.0 / x.sqrt()).collect();
        let mut s = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += q.get(i, k) * q.get(j, k) * inv_sqrt[k];
                }
                s.set(i, j, acc);
                s.set(j, i, acc);
            }
        }
        SpdMatrix::from_matrix(s)
    }

    /// log det A = 2 Σ ln L_kk.
    pub fn logdet(&self) -> f64 {
        (0..self.dim()).map(|k| self.chol.get(k, k).ln()).sum::<f64>() * 2.0
    }

    /// Solves A·x = b via the Cholesky factor.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::ShapeMismatch {
                expected: format!("vector of length {n}"),
                got: format!("{}", b.len()),
            });
        }
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.chol.get(i, k) * y[k];
            }
            y[i] /= self.chol.get(i, i);
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] -= self.chol.get(k, i) * y[k];
            }
            y[i] /= self.chol.get(i, i);
        }
        Ok(y)
    }

    /// Lower Cholesky factor L with A = L·Lᵀ (useful as a sampling factor).
    pub fn cholesky_factor(&self) -> &Matrix {
        &self.chol
    }
}

/// tr(a·b) without forming the product; shapes must be m×n and n×m.
pub fn trace_product(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.cols() != b.rows() || a.rows() != b.cols() {
        return Err(Error::ShapeMismatch {
            expected: format!("{}x{} against {}x{}", a.rows(), a.cols(), a.cols(), a.rows()),
            got: format!("{}x{}", b.rows(), b.cols()),
        });
    }
    let mut s = 0.0;
    for i in 0..a.rows() {
        for k in 0..a.cols() {
            s += a.get(i, k) * b.get(k, i);
        }
    }
    Ok(s)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in ascending order with matching eigenvector columns.
pub fn symmetric_eigen(a: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if !a.is_square() {
        return Err(Error::ShapeMismatch {
            expected: "square matrix".into(),
            got: format!("{}x{}", a.rows(), a.cols()),
        });
    }
    if !a.is_symmetric_within(SYMMETRY_TOL) {
        return Err(Error::NotSymmetric);
    }
    let n = a.rows();
    let mut m = a.clone();
    let mut q = Matrix::identity(n);
    let norm = a.frobenius_norm().max(f64::MIN_POSITIVE);
    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += m.get(i, j) * m.get(i, j);
            }
        }
        if (2.0 * off).sqrt() <= JACOBI_REL_TOL * norm {
            break;
        }
        for p in 0..n {
            for r in (p + 1)..n {
                let apr = m.get(p, r);
                if apr == 0.0 {
                    continue;
                }
                // symmetric Schur rotation annihilating m[p][r]
                let theta = (m.get(r, r) - m.get(p, p)) / (2.0 * apr);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m.get(k, p);
                    let mkr = m.get(k, r);
                    m.set(k, p, c * mkp - s * mkr);
                    m.set(k, r, s * mkp + c * mkr);
                }
                for k in 0..n {
                    let mpk = m.get(p, k);
                    let mrk = m.get(r, k);
                    m.set(p, k, c * mpk - s * mrk);
                    m.set(r, k, s * mpk + c * mrk);
                }
                for k in 0..n {
                    let qkp = q.get(k, p);
                    let qkr = q.get(k, r);
                    q.set(k, p, c * qkp - s * qkr);
                    q.set(k, r, s * qkp + c * qkr);
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m.get(i, i).partial_cmp(&m.get(j, j)).unwrap());
    let eigs: Vec<f64> = order.iter().map(|&i| m.get(i, i)).collect();
    let mut vecs = Matrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        for k in 0..n {
            vecs.set(k, new, q.get(k, old));
        }
    }
    Ok((eigs, vecs))
}

/// Smallest eigenvalue of a symmetric matrix (may be negative).
pub fn min_eigenvalue(a: &Matrix) -> Result<f64> {
    Ok(symmetric_eigen(a)?.0[0])
}

/// A factor B with B·Bᵀ ≈ A for symmetric positive *semi*definite A
/// (eigenvalues below zero are clipped). Used for sampling.
pub fn psd_sqrt_factor(a: &Matrix) -> Result<Matrix> {
    let (eigs, q) = symmetric_eigen(a)?;
    let n = a.rows();
    let scale = a.max_abs().max(1.0);
    if eigs[0] < -1e-10 * scale {
        return Err(Error::NotPositiveSemidefinite { min_eig: eigs[0] });
    }
    let mut b = Matrix::zeros(n, n);
    for i in 0..n {
        for k in 0..n {
            b.set(i, k, q.get(i, k) * eigs[k].max(0.0).sqrt());
        }
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mat2(a: f64, b: f64, c: f64, d: f64) -> Matrix {
        Matrix::new(2, 2, vec![a, b, c, d]).unwrap()
    }

    #[test]
    fn inverse_of_two_by_two_matches_hand_computation() {
        // [[1, .5], [.5, .5]] has determinant 1/4, so the inverse is [[2, -2], [-2, 4]]
        let a = SpdMatrix::from_matrix(mat2(1.0, 0.5, 0.5, 0.5)).unwrap();
        let inv = a.inverse().unwrap();
        assert!(inv.matrix().max_abs_diff(&mat2(2.0, -2.0, -2.0, 4.0)) <= 1e-12);
        let prod = a.matrix().matmul(inv.matrix()).unwrap();
        assert!(prod.max_abs_diff(&Matrix::identity(2)) <= 1e-10, "a·a⁻¹ deviates from I");
    }

    #[test]
    fn sqrt_inverse_squares_back_to_inverse() {
        let a = SpdMatrix::from_matrix(mat2(2.0, 1.0, 1.0, 2.0)).unwrap();
        let s = a.sqrt_inverse().unwrap();
        // eigenvalues 1 and 3: A^{-1/2} = 0.5·[[1+1/√3, -1+1/√3], [-1+1/√3, 1+1/√3]]
        let r3 = 1.0 / 3.0_f64.sqrt();
        let expected = mat2(
            0.5 * (1.0 + r3),
            0.5 * (-1.0 + r3),
            0.5 * (-1.0 + r3),
            0.5 * (1.0 + r3),
        );
        assert!(s.matrix().max_abs_diff(&expected) <= 1e-12);
        let sas = s
            .matrix()
            .matmul(a.matrix())
            .unwrap()
            .matmul(s.matrix())
            .unwrap();
        assert!(sas.max_abs_diff(&Matrix::identity(2)) <= 1e-10, "s·a·s deviates from I");
    }

    #[test]
    fn sqrt_inverse_of_identity_is_identity_bit_for_bit() {
        let a = SpdMatrix::identity(3);
        let s = a.sqrt_inverse().unwrap();
        assert_eq!(s.matrix().data(), Matrix::identity(3).data());
    }

    #[test]
    fn logdet_matches_closed_forms() {
        assert_eq!(SpdMatrix::identity(5).logdet(), 0.0);
        let d = SpdMatrix::from_matrix(Matrix::diag(&[2.0, 3.0])).unwrap();
        assert!((d.logdet() - 6.0_f64.ln()).abs() <= 1e-12);
        let a = SpdMatrix::from_matrix(mat2(1.0, 0.5, 0.5, 0.5)).unwrap();
        assert!((a.logdet() - 0.25_f64.ln()).abs() <= 1e-12);
    }

    #[test]
    fn trace_product_handles_nonsymmetric_factors() {
        let a = mat2(0.0, 1.0, 0.0, 0.0);
        let b = mat2(0.0, 0.0, 1.0, 0.0);
        assert_eq!(trace_product(&a, &b).unwrap(), 1.0);
        // and tr(ab) = tr(ba) in general
        let c = mat2(1.0, 2.0, 3.0, 4.0);
        let d = mat2(-1.0, 0.5, 2.0, 7.0);
        let ab = trace_product(&c, &d).unwrap();
        let ba = trace_product(&d, &c).unwrap();
        assert!((ab - ba).abs() <= 1e-12);
    }

    #[test]
    fn min_eigenvalue_of_known_matrix() {
        assert!((min_eigenvalue(&mat2(2.0, 1.0, 1.0, 2.0)).unwrap() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn near_singular_matrix_is_rejected_with_pivot_threshold() {
        // second pivot is ~1e-13 relative, below the 1e-12 threshold
        let eps = 1e-13;
        let a = mat2(1.0, 1.0, 1.0, 1.0 + eps);
        match SpdMatrix::from_matrix(a) {
            Err(Error::NotPositiveDefinite { .. }) => {}
            other => panic!("expected NotPositiveDefinite, got {other:?}"),
        }
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let a = mat2(1.0, 0.3, 0.2, 1.0);
        assert!(matches!(SpdMatrix::from_matrix(a), Err(Error::NotSymmetric)));
        assert!(matches!(min_eigenvalue(&mat2(1.0, 0.3, 0.2, 1.0)), Err(Error::NotSymmetric)));
    }

    #[test]
    fn indefinite_matrix_fails_factorization_but_has_negative_eigenvalue() {
        let a = mat2(1.0, 2.0, 2.0, 1.0); // eigenvalues 3 and -1
        assert!(SpdMatrix::from_matrix(a.clone()).is_err());
        assert!((min_eigenvalue(&a).unwrap() + 1.0).abs() <= 1e-9);
    }

    fn arb_spd(dim: usize) -> impl Strategy<Value = Matrix> {
        proptest::collection::vec(-1.0..1.0f64, dim * dim).prop_map(move |v| {
            let r = Matrix::new(dim, dim, v).unwrap();
            let mut g = r.gram();
            for i in 0..dim {
                g.set(i, i, g.get(i, i) + 0.5);
            }
            g
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn inverse_roundtrips(a in arb_spd(3)) {
            let spd = SpdMatrix::from_matrix(a.clone()).unwrap();
            let inv = spd.inverse().unwrap();
            let prod = a.matmul(inv.matrix()).unwrap();
            prop_assert!(prod.max_abs_diff(&Matrix::identity(3)) <= 1e-10);
        }

        #[test]
        fn sqrt_inverse_whitens(a in arb_spd(3)) {
            let spd = SpdMatrix::from_matrix(a.clone()).unwrap();
            let s = spd.sqrt_inverse().unwrap();
            let sas = s.matrix().matmul(&a).unwrap().matmul(s.matrix()).unwrap();
            prop_assert!(sas.max_abs_diff(&Matrix::identity(3)) <= 1e-10);
        }

        #[test]
        fn logdet_matches_eigenvalue_sum(a in arb_spd(4)) {
            let spd = SpdMatrix::from_matrix(a.clone()).unwrap();
            let (eigs, _) = symmetric_eigen(&a).unwrap();
            let expected: f64 = eigs.iter().map(|x| x.ln()).sum();
            prop_assert!((spd.logdet() - expected).abs() <= 1e-9 * (1.0 + expected.abs()));
        }

        #[test]
        fn solve_agrees_with_inverse(a in arb_spd(3), b in proptest::collection::vec(-1.0..1.0f64, 3)) {
            let spd = SpdMatrix::from_matrix(a).unwrap();
            let x = spd.solve(&b).unwrap();
            let y = spd.inverse().unwrap().matrix().matvec(&b).unwrap();
            for (xi, yi) in x.iter().zip(&y) {
                prop_assert!((xi - yi).abs() <= 1e-9);
            }
        }
    }
}
