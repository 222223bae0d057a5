//! Minimal dense linear-algebra kernels shared by the metric branches:
//! cosine correlation matrices, row-wise top-k sums, means, covariances,
//! and the small-matrix utilities (Cholesky, Jacobi eigensolver) the
//! distribution-level metrics need.
//!
//! Not a BLAS replacement: everything here is sized for descriptor sets of a
//! few hundred columns in a few dozen dimensions.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid_arg, numerical};
use crate::fmath;
use crate::Result;

/// Columns whose Euclidean norm falls below this are treated as zero
/// descriptors: their cosine against anything is 0. Dead feature channels
/// must not poison a correlation matrix with NaN.
pub const EPSILON_NORM: f64 = 1e-12;

/// Dense row-major matrix of finite `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major values, rejecting length mismatches and
    /// non-finite entries.
    pub fn from_values(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(invalid_arg!(
                "matrix values length {} does not match {rows}x{cols}",
                values.len()
            ));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid_arg!("matrix contains non-finite value {v}"));
        }
        Ok(Self { rows, cols, values })
    }

    /// All-zero matrix.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        debug_assert!(r < self.rows && c < self.cols);
        self.values[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(r < self.rows && c < self.cols);
        self.values[r * self.cols + c] = v;
    }

    /// One row as a slice.
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    /// One column, copied out.
    pub fn col(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    /// Plain `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(invalid_arg!(
                "matmul shape mismatch: {}x{} * {}x{}",
                self.rows,
                self.cols,
                other.rows,
                other.cols
            ));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                for c in 0..other.cols {
                    out.values[r * other.cols + c] += a * other.get(k, c);
                }
            }
        }
        Ok(out)
    }

    /// Sum of diagonal entries. The matrix must be square.
    pub fn trace(&self) -> f64 {
        debug_assert_eq!(self.rows, self.cols);
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub(crate) fn from_values_unchecked(rows: usize, cols: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), rows * cols);
        Self { rows, cols, values }
    }
}

/// Dense vector of finite `f64` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector {
    values: Vec<f64>,
}

impl Vector {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(invalid_arg!("vector contains non-finite value {v}"));
        }
        Ok(Self { values })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub(crate) fn from_values_unchecked(values: Vec<f64>) -> Self {
        Self { values }
    }
}

/// Cosine correlation matrix between the columns of `a` (`d×p`) and the
/// columns of `b` (`d×q`): entry `(i, j)` is the cosine of column `i` of `a`
/// and column `j` of `b`.
///
/// Columns with norm below [`EPSILON_NORM`] count as zero descriptors and
/// yield cosine 0 against everything. Entries are not clamped; rounding can
/// leave them a few ulp outside `[-1, 1]`.
pub fn cosine_matrix(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.rows != b.rows {
        return Err(invalid_arg!(
            "cosine_matrix dimension mismatch: a has {} rows, b has {}",
            a.rows,
            b.rows
        ));
    }
    let (d, p, q) = (a.rows, a.cols, b.cols);
    // Normalize columns up front: dot products of unit columns cannot
    // overflow, so every output entry stays finite.
    let an = normalized_columns(a);
    let bn = normalized_columns(b);

    let mut out = vec![0.0f64; p * q];
    for k in 0..d {
        let arow = &an[k * p..(k + 1) * p];
        let brow = &bn[k * q..(k + 1) * q];
        for (i, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let dst = &mut out[i * q..(i + 1) * q];
            for (j, &bv) in brow.iter().enumerate() {
                dst[j] += av * bv;
            }
        }
    }
    Ok(Matrix::from_values_unchecked(p, q, out))
}

/// Columns scaled to unit norm; columns with norm below [`EPSILON_NORM`]
/// (or with a norm that overflowed) become zero columns.
fn normalized_columns(m: &Matrix) -> Vec<f64> {
    let mut sq = vec![0.0f64; m.cols];
    for r in 0..m.rows {
        let row = m.row(r);
        for (j, &v) in row.iter().enumerate() {
            sq[j] += v * v;
        }
    }
    let inv: Vec<f64> = sq
        .iter()
        .map(|&s| {
            let norm = fmath::sqrt(s);
            if norm < EPSILON_NORM || !norm.is_finite() {
                0.0
            } else {
                1.0 / norm
            }
        })
        .collect();
    let mut out = vec![0.0f64; m.rows * m.cols];
    for r in 0..m.rows {
        let row = m.row(r);
        let dst = &mut out[r * m.cols..(r + 1) * m.cols];
        for (j, &v) in row.iter().enumerate() {
            dst[j] = v * inv[j];
        }
    }
    out
}

/// Sum over all rows of the `k` largest entries of each row.
///
/// Ties are broken by ascending column index (stable selection), so the
/// result is bit-reproducible across runs and platforms.
pub fn row_topk_sum(m: &Matrix, k: usize) -> Result<f64> {
    if k < 1 || k > m.cols {
        return Err(invalid_arg!(
            "top-k count {k} out of range 1..={} for a {}x{} matrix",
            m.cols,
            m.rows,
            m.cols
        ));
    }
    let mut order: Vec<usize> = Vec::with_capacity(m.cols);
    let mut total = 0.0f64;
    for r in 0..m.rows {
        let row = m.row(r);
        order.clear();
        order.extend(0..m.cols);
        // Stable sort by descending value keeps equal entries in ascending
        // column order.
        order.sort_by(|&x, &y| row[y].total_cmp(&row[x]));
        for &j in &order[..k] {
            total += row[j];
        }
    }
    Ok(total)
}

/// Arithmetic mean of the columns of a `d×n` matrix.
pub fn mean_vector(descriptors: &Matrix) -> Result<Vector> {
    let n = descriptors.cols;
    if n == 0 {
        return Err(invalid_arg!("mean_vector needs at least one column"));
    }
    let inv = 1.0 / n as f64;
    let mut out = vec![0.0f64; descriptors.rows];
    for (d, acc) in out.iter_mut().enumerate() {
        let row = descriptors.row(d);
        let mut s = 0.0;
        for &v in row {
            s += v;
        }
        *acc = s * inv;
    }
    Ok(Vector::from_values_unchecked(out))
}

/// Biased (divide-by-n) sample covariance of the columns of a `d×n` matrix,
/// plus `shrinkage·I`.
///
/// Symmetry is enforced exactly by averaging the accumulated matrix with its
/// transpose; for `shrinkage > 0` the result is symmetric positive definite.
pub fn covariance(descriptors: &Matrix, shrinkage: f64) -> Result<Matrix> {
    let (d, n) = (descriptors.rows, descriptors.cols);
    if n == 0 {
        return Err(invalid_arg!("covariance needs at least one column"));
    }
    if !shrinkage.is_finite() || shrinkage < 0.0 {
        return Err(invalid_arg!("shrinkage must be >= 0, got {shrinkage}"));
    }
    let mu = mean_vector(descriptors)?;
    let inv = 1.0 / n as f64;
    let mut s = vec![0.0f64; d * d];
    let mut centered = vec![0.0f64; d];
    for j in 0..n {
        for (i, c) in centered.iter_mut().enumerate() {
            *c = descriptors.get(i, j) - mu.get(i);
        }
        for a in 0..d {
            let ca = centered[a];
            if ca == 0.0 {
                continue;
            }
            for b in 0..d {
                s[a * d + b] += ca * centered[b];
            }
        }
    }
    for v in s.iter_mut() {
        *v *= inv;
    }
    // Average with the transpose; floating-point drift otherwise breaks SPD
    // checks downstream.
    for a in 0..d {
        for b in (a + 1)..d {
            let m = 0.5 * (s[a * d + b] + s[b * d + a]);
            s[a * d + b] = m;
            s[b * d + a] = m;
        }
    }
    for i in 0..d {
        s[i * d + i] += shrinkage;
    }
    Ok(Matrix::from_values_unchecked(d, d, s))
}

/// Cholesky factorization of a symmetric positive definite matrix; returns
/// the lower-triangular factor `L` with `L·Lᵀ = m`. Only the lower triangle
/// of the input is read.
pub fn cholesky(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(invalid_arg!(
            "cholesky needs a square matrix, got {}x{}",
            m.rows,
            m.cols
        ));
    }
    let n = m.rows;
    let mut l = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s.is_nan() || s <= 0.0 {
                    return Err(numerical!(
                        "matrix is not positive definite (pivot {s} at row {i}); raise shrinkage"
                    ));
                }
                l[i * n + i] = fmath::sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Ok(Matrix::from_values_unchecked(n, n, l))
}

/// Solves `L·Lᵀ·x = b` given the lower Cholesky factor `L`.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    debug_assert_eq!(b.len(), n);
    // Forward: L y = b
    let mut y = vec![0.0f64; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    // Backward: Lᵀ x = y
    let mut x = vec![0.0f64; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l.get(k, i) * x[k];
        }
        x[i] = s / l.get(i, i);
    }
    x
}

/// Solves the triangular system `L·y = b` for lower-triangular `L`.
pub fn forward_solve(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows;
    debug_assert_eq!(b.len(), n);
    let mut y = vec![0.0f64; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l.get(i, k) * y[k];
        }
        y[i] = s / l.get(i, i);
    }
    y
}

/// Log-determinant of an SPD matrix from its lower Cholesky factor:
/// `2·Σ ln L_ii`.
pub fn log_det_from_cholesky(l: &Matrix) -> f64 {
    let mut s = 0.0;
    for i in 0..l.rows {
        s += fmath::ln(l.get(i, i));
    }
    2.0 * s
}

const JACOBI_MAX_SWEEPS: usize = 64;

/// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
///
/// Returns `(eigenvalues, v)` with `m = v·diag(eigenvalues)·vᵀ`; eigenvector
/// `i` is column `i` of `v`. Eigenvalues are not sorted.
pub fn symmetric_eigen(m: &Matrix) -> Result<(Vector, Matrix)> {
    if !m.is_square() {
        return Err(invalid_arg!(
            "symmetric_eigen needs a square matrix, got {}x{}",
            m.rows,
            m.cols
        ));
    }
    let n = m.rows;
    let mut a = m.values.clone();
    let mut v = Matrix::identity(n).values;

    let frob: f64 = fmath::sqrt(a.iter().map(|x| x * x).sum());
    let tol = 1e-14 * frob.max(1.0);

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if fmath::sqrt(2.0 * off) <= tol {
            let eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
            return Ok((
                Vector::from_values_unchecked(eig),
                Matrix::from_values_unchecked(n, n, v),
            ));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let tau = (aqq - app) / (2.0 * apq);
                let t = if tau >= 0.0 {
                    1.0 / (tau + fmath::sqrt(1.0 + tau * tau))
                } else {
                    -1.0 / (-tau + fmath::sqrt(1.0 + tau * tau))
                };
                let c = 1.0 / fmath::sqrt(1.0 + t * t);
                let s = t * c;

                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(numerical!(
        "Jacobi eigendecomposition did not converge within {JACOBI_MAX_SWEEPS} sweeps"
    ))
}

/// Symmetric square root of a positive semidefinite matrix, computed from
/// the Jacobi eigendecomposition with negative eigenvalues clamped to 0.
pub fn sqrt_psd(m: &Matrix) -> Result<Matrix> {
    let (eig, v) = symmetric_eigen(m)?;
    let n = m.rows;
    // v · diag(sqrt(max(eig, 0))) · vᵀ
    let mut out = vec![0.0f64; n * n];
    for k in 0..n {
        let lam = eig.get(k).max(0.0);
        let root = fmath::sqrt(lam);
        if root == 0.0 {
            continue;
        }
        for i in 0..n {
            let vik = v.get(i, k) * root;
            if vik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += vik * v.get(j, k);
            }
        }
    }
    // Make the result exactly symmetric.
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (out[i * n + j] + out[j * n + i]);
            out[i * n + j] = s;
            out[j * n + i] = s;
        }
    }
    Ok(Matrix::from_values_unchecked(n, n, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mat(rows: usize, cols: usize, values: &[f64]) -> Matrix {
        Matrix::from_values(rows, cols, values.to_vec()).unwrap()
    }

    /// Scalar-loop cosine oracle: u·v / (‖u‖‖v‖) per entry.
    fn cosine_oracle(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.cols(), b.cols());
        for i in 0..a.cols() {
            for j in 0..b.cols() {
                let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
                for d in 0..a.rows() {
                    dot += a.get(d, i) * b.get(d, j);
                    na += a.get(d, i) * a.get(d, i);
                    nb += b.get(d, j) * b.get(d, j);
                }
                let (na, nb) = (na.sqrt(), nb.sqrt());
                let v = if na < EPSILON_NORM || nb < EPSILON_NORM {
                    0.0
                } else {
                    dot / (na * nb)
                };
                out.set(i, j, v);
            }
        }
        out
    }

    /// Exhaustive row-scan top-k oracle.
    fn topk_oracle(m: &Matrix, k: usize) -> f64 {
        let mut total = 0.0;
        for r in 0..m.rows() {
            let mut row = m.row(r).to_vec();
            row.sort_by(|a, b| b.total_cmp(a));
            total += row[..k].iter().sum::<f64>();
        }
        total
    }

    fn splitmix_values(seed: u64, n: usize) -> Vec<f64> {
        // Cheap deterministic pseudo-random values for oracle comparisons.
        let mut state = seed;
        (0..n)
            .map(|_| {
                state = state.wrapping_add(0x9E3779B97F4A7C15);
                let mut z = state;
                z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
                z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
                z ^= z >> 31;
                (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
            })
            .collect()
    }

    #[test]
    fn cosine_identity_column() {
        let a = mat(2, 1, &[1.0, 0.0]);
        let r = cosine_matrix(&a, &a).unwrap();
        assert_relative_eq!(r.get(0, 0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cosine_orthogonal_columns() {
        let a = mat(2, 1, &[1.0, 0.0]);
        let b = mat(2, 1, &[0.0, 1.0]);
        let r = cosine_matrix(&a, &b).unwrap();
        assert_eq!(r.get(0, 0), 0.0);
    }

    #[test]
    fn cosine_matches_scalar_oracle() {
        let a = mat(4, 3, &splitmix_values(1, 12));
        let b = mat(4, 2, &splitmix_values(2, 8));
        let got = cosine_matrix(&a, &b).unwrap();
        let want = cosine_oracle(&a, &b);
        for i in 0..3 {
            for j in 0..2 {
                assert_relative_eq!(got.get(i, j), want.get(i, j), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn cosine_zero_column_yields_zero() {
        let a = mat(3, 2, &[0.0, 1.0, 0.0, 2.0, 0.0, 3.0]);
        let b = mat(3, 1, &[1.0, 1.0, 1.0]);
        let r = cosine_matrix(&a, &b).unwrap();
        assert_eq!(r.get(0, 0), 0.0);
        assert!(r.get(1, 0).is_finite());
    }

    #[test]
    fn cosine_rejects_dim_mismatch() {
        let a = mat(3, 1, &[1.0; 3]);
        let b = mat(2, 1, &[1.0; 2]);
        assert!(matches!(
            cosine_matrix(&a, &b),
            Err(crate::MmlError::InvalidArgument(_))
        ));
    }

    #[test]
    fn topk_basic() {
        let m = mat(2, 2, &[0.9, 0.1, 0.2, 0.8]);
        assert_relative_eq!(row_topk_sum(&m, 1).unwrap(), 1.7, epsilon = 1e-12);
    }

    #[test]
    fn topk_full_row_is_total_sum() {
        let m = mat(2, 3, &splitmix_values(3, 6));
        let want: f64 = m.values().iter().sum();
        assert_relative_eq!(row_topk_sum(&m, 3).unwrap(), want, epsilon = 1e-12);
    }

    #[test]
    fn topk_ties_are_stable() {
        let m = mat(1, 3, &[0.5, 0.5, 0.5]);
        assert_relative_eq!(row_topk_sum(&m, 2).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn topk_out_of_range_errors() {
        let m = mat(1, 2, &[1.0, 2.0]);
        assert!(row_topk_sum(&m, 3).is_err());
        assert!(row_topk_sum(&m, 0).is_err());
    }

    #[test]
    fn topk_matches_oracle() {
        let m = mat(5, 7, &splitmix_values(4, 35));
        for k in 1..=7 {
            assert_relative_eq!(
                row_topk_sum(&m, k).unwrap(),
                topk_oracle(&m, k),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn mean_of_single_column_is_identity() {
        let m = mat(3, 1, &[1.0, -2.0, 3.5]);
        let mu = mean_vector(&m).unwrap();
        assert_eq!(mu.values(), &[1.0, -2.0, 3.5]);
    }

    #[test]
    fn mean_of_symmetric_pair() {
        let m = mat(2, 2, &[0.0, 2.0, 0.0, 4.0]);
        let mu = mean_vector(&m).unwrap();
        assert_eq!(mu.values(), &[1.0, 2.0]);
    }

    #[test]
    fn mean_matches_scalar_accumulation_oracle() {
        let m = mat(3, 5, &splitmix_values(5, 15));
        let mu = mean_vector(&m).unwrap();
        for d in 0..3 {
            let mut s = 0.0;
            for j in 0..5 {
                s += m.get(d, j);
            }
            assert_relative_eq!(mu.get(d), s / 5.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn mean_rejects_empty() {
        let m = Matrix::zeros(3, 0);
        assert!(mean_vector(&m).is_err());
    }

    #[test]
    fn covariance_single_column_is_shrinkage_identity() {
        let m = mat(2, 1, &[3.0, -1.0]);
        let c = covariance(&m, 0.25).unwrap();
        assert_eq!(c.values(), &[0.25, 0.0, 0.0, 0.25]);
    }

    #[test]
    fn covariance_hand_case() {
        let m = mat(2, 2, &[1.0, -1.0, 0.0, 0.0]);
        let c = covariance(&m, 0.0).unwrap();
        assert_eq!(c.values(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn covariance_matches_scalar_oracle_and_is_spd() {
        let m = mat(3, 6, &splitmix_values(6, 18));
        let c = covariance(&m, 0.01).unwrap();
        // Scalar-loop oracle: (1/n) Σ ΔΔᵀ + λI
        let mu = mean_vector(&m).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let mut s = 0.0;
                for j in 0..6 {
                    s += (m.get(a, j) - mu.get(a)) * (m.get(b, j) - mu.get(b));
                }
                s /= 6.0;
                if a == b {
                    s += 0.01;
                }
                assert_relative_eq!(c.get(a, b), s, epsilon = 1e-12);
            }
        }
        assert!(cholesky(&c).is_ok());
    }

    #[test]
    fn covariance_is_exactly_symmetric() {
        let m = mat(4, 9, &splitmix_values(7, 36));
        let c = covariance(&m, 0.0).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                assert_eq!(c.get(a, b).to_bits(), c.get(b, a).to_bits());
            }
        }
    }

    #[test]
    fn cholesky_known_factor() {
        // A = L Lᵀ with L = [[2,0],[1,3]]
        let a = mat(2, 2, &[4.0, 2.0, 2.0, 10.0]);
        let l = cholesky(&a).unwrap();
        assert_relative_eq!(l.get(0, 0), 2.0, epsilon = 1e-12);
        assert_relative_eq!(l.get(1, 0), 1.0, epsilon = 1e-12);
        assert_relative_eq!(l.get(1, 1), 3.0, epsilon = 1e-12);
        assert_eq!(l.get(0, 1), 0.0);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = mat(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            cholesky(&a),
            Err(crate::MmlError::NumericalDomain(_))
        ));
    }

    #[test]
    fn cholesky_solve_recovers_rhs() {
        let a = mat(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let l = cholesky(&a).unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = cholesky_solve(&l, &b);
        // A x should equal b
        for i in 0..3 {
            let mut s = 0.0;
            for j in 0..3 {
                s += a.get(i, j) * x[j];
            }
            assert_relative_eq!(s, b[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn log_det_matches_direct_2x2() {
        let a = mat(2, 2, &[4.0, 2.0, 2.0, 10.0]);
        let l = cholesky(&a).unwrap();
        // det = 4*10 - 4 = 36
        assert_relative_eq!(log_det_from_cholesky(&l), 36.0f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // Eigenvalues of [[2,1],[1,2]] are 1 and 3.
        let a = mat(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (eig, v) = symmetric_eigen(&a).unwrap();
        let mut lams = eig.values().to_vec();
        lams.sort_by(|x, y| x.total_cmp(y));
        assert_relative_eq!(lams[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(lams[1], 3.0, epsilon = 1e-10);
        // Reconstruct V Λ Vᵀ
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..2 {
                    s += v.get(i, k) * eig.get(k) * v.get(j, k);
                }
                assert_relative_eq!(s, a.get(i, j), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn sqrt_psd_squares_back() {
        let m = mat(3, 6, &splitmix_values(8, 18));
        let c = covariance(&m, 0.05).unwrap();
        let r = sqrt_psd(&c).unwrap();
        let sq = r.matmul(&r).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(sq.get(i, j), c.get(i, j), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn cosine_stays_finite_on_extreme_magnitudes() {
        // Norms that overflow f64 degrade to zero columns, never to NaN.
        let a = mat(2, 2, &[1e308, 1.0, 1e308, 2.0]);
        let b = mat(2, 1, &[3.0, 4.0]);
        let r = cosine_matrix(&a, &b).unwrap();
        assert!(r.values().iter().all(|v| v.is_finite()));
        assert_eq!(r.get(0, 0), 0.0);
        // cos((1,2), (3,4)) = 11 / (√5 · 5)
        assert!((r.get(1, 0) - 11.0 / (5.0f64.sqrt() * 5.0)).abs() < 1e-12);
    }

    #[test]
    fn from_values_rejects_nan_and_bad_length() {
        assert!(Matrix::from_values(2, 2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(Matrix::from_values(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Vector::from_values(vec![f64::INFINITY]).is_err());
    }
}
