//! Dense linear algebra used throughout the crate.
//!
//! Everything here works on [`DenseMatrix`], a column-major `f64` matrix that
//! carries the squared norm of each column. Numerical rank, orthonormal bases
//! for the range and kernel, and minimum-norm least-squares solves all come
//! from a Householder QR factorization with column pivoting.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};

/// Column-major real matrix with cached per-column squared norms.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
    col_sq_norms: Vec<f64>,
}

impl DenseMatrix {
    /// Builds a matrix from column-major `values`. All entries must be finite.
    pub fn new(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        check_len("matrix values", n_rows * n_cols, values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "matrix values",
            });
        }
        Ok(Self::from_col_major(n_rows, n_cols, values))
    }

    /// Builds a matrix from row-major `values`.
    pub fn from_row_major(n_rows: usize, n_cols: usize, values: &[f64]) -> Result<Self> {
        check_len("matrix values", n_rows * n_cols, values.len())?;
        let mut col_major = vec![0.0; values.len()];
        for i in 0..n_rows {
            for j in 0..n_cols {
                col_major[j * n_rows + i] = values[i * n_cols + j];
            }
        }
        Self::new(n_rows, n_cols, col_major)
    }

    /// Builds a matrix from a list of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut flat = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            check_len("matrix row", n_cols, row.as_ref().len())?;
            flat.extend_from_slice(row.as_ref());
        }
        Self::from_row_major(n_rows, n_cols, &flat)
    }

    /// Builds a matrix from a list of equally long columns.
    pub fn from_columns<C: AsRef<[f64]>>(n_rows: usize, cols: &[C]) -> Result<Self> {
        let mut flat = Vec::with_capacity(n_rows * cols.len());
        for col in cols {
            check_len("matrix column", n_rows, col.as_ref().len())?;
            flat.extend_from_slice(col.as_ref());
        }
        Self::new(n_rows, cols.len(), flat)
    }

    pub(crate) fn from_col_major(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), n_rows * n_cols);
        let col_sq_norms = if n_rows == 0 {
            vec![0.0; n_cols]
        } else {
            values.chunks_exact(n_rows).map(|c| dot(c, c)).collect()
        };
        Self {
            n_rows,
            n_cols,
            values,
            col_sq_norms,
        }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self::from_col_major(n_rows, n_cols, vec![0.0; n_rows * n_cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut values = vec![0.0; n * n];
        for i in 0..n {
            values[i * n + i] = 1.0;
        }
        Self::from_col_major(n, n, values)
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Column-major storage.
    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n_rows + i]
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.n_rows..(j + 1) * self.n_rows]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.n_cols).map(|j| self.get(i, j)).collect()
    }

    #[inline]
    pub fn col_sq_norms(&self) -> &[f64] {
        &self.col_sq_norms
    }

    /// `self * v`.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n_cols, "mul_vec: length mismatch");
        let mut out = vec![0.0; self.n_rows];
        for (j, &vj) in v.iter().enumerate() {
            if vj != 0.0 {
                axpy(vj, self.column(j), &mut out);
            }
        }
        out
    }

    /// `selfᵀ * v`.
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n_rows, "tr_mul_vec: length mismatch");
        (0..self.n_cols).map(|j| dot(self.column(j), v)).collect()
    }

    /// `a_iᵀ v` for row `i`.
    pub fn row_dot(&self, i: usize, v: &[f64]) -> f64 {
        v.iter()
            .enumerate()
            .map(|(j, &vj)| self.values[j * self.n_rows + i] * vj)
            .sum()
    }

    pub fn transpose(&self) -> Self {
        let (m, n) = (self.n_rows, self.n_cols);
        let mut out = vec![0.0; m * n];
        for j in 0..n {
            for i in 0..m {
                out[i * n + j] = self.values[j * m + i];
            }
        }
        Self::from_col_major(n, m, out)
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n_cols, other.n_rows, "matmul: inner dimension mismatch");
        let mut out = Vec::with_capacity(self.n_rows * other.n_cols);
        for j in 0..other.n_cols {
            out.extend(self.mul_vec(other.column(j)));
        }
        Self::from_col_major(self.n_rows, other.n_cols, out)
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut out = Vec::with_capacity(self.n_rows * cols.len());
        for &j in cols {
            out.extend_from_slice(self.column(j));
        }
        Self::from_col_major(self.n_rows, cols.len(), out)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut out = Vec::with_capacity(rows.len() * self.n_cols);
        for j in 0..self.n_cols {
            let col = self.column(j);
            out.extend(rows.iter().map(|&i| col[i]));
        }
        Self::from_col_major(rows.len(), self.n_cols, out)
    }

    /// Stacks `self` on top of `other`.
    pub fn vstack(&self, other: &Self) -> Self {
        assert_eq!(self.n_cols, other.n_cols, "vstack: column mismatch");
        let mut out = Vec::with_capacity((self.n_rows + other.n_rows) * self.n_cols);
        for j in 0..self.n_cols {
            out.extend_from_slice(self.column(j));
            out.extend_from_slice(other.column(j));
        }
        Self::from_col_major(self.n_rows + other.n_rows, self.n_cols, out)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.col_sq_norms.iter().sum())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Default relative rank threshold for an `n_rows × n_cols` matrix.
pub fn default_rank_tol(n_rows: usize, n_cols: usize) -> f64 {
    1e-10 * n_rows.max(n_cols).max(1) as f64
}

/// Householder QR with column pivoting, stopped once the remaining columns
/// fall below the rank threshold.
struct PivotedQr {
    m: usize,
    /// Reflectors below the diagonal, R on and above it.
    qr: Vec<f64>,
    tau: Vec<f64>,
    rank: usize,
}

impl PivotedQr {
    fn factor(a: &DenseMatrix, rel_tol: f64) -> Self {
        let (m, n) = (a.n_rows, a.n_cols);
        let mut qr = a.values.clone();
        let mut tau = Vec::new();
        let mut norms: Vec<f64> = a.col_sq_norms.clone();
        let steps = m.min(n);
        let mut lead = 0.0;
        let mut rank = 0;
        for k in 0..steps {
            let (pivot, &best) = norms[k..]
                .iter()
                .enumerate()
                .max_by(|x, y| x.1.total_cmp(y.1).then(y.0.cmp(&x.0)))
                .map(|(i, v)| (i + k, v))
                .expect("non-empty");
            let best = libm::sqrt(best);
            if k == 0 {
                lead = best;
            }
            if best == 0.0 || best <= rel_tol * lead {
                break;
            }
            if pivot != k {
                for i in 0..m {
                    qr.swap(k * m + i, pivot * m + i);
                }
                norms.swap(k, pivot);
            }
            let t = make_reflector(&mut qr[k * m + k..(k + 1) * m]);
            tau.push(t);
            let (head, tail) = qr.split_at_mut((k + 1) * m);
            let v = &head[k * m + k..(k + 1) * m];
            for j in (k + 1)..n {
                let col = &mut tail[(j - k - 1) * m + k..(j - k) * m];
                apply_reflector(v, t, col);
                norms[j] = dot(&col[1..], &col[1..]);
            }
            rank += 1;
        }
        Self { m, qr, tau, rank }
    }

    /// Applies `H_0 H_1 … H_{r-1}` to the columns `cols` of the `m × m` identity.
    fn q_columns(&self, cols: core::ops::Range<usize>) -> DenseMatrix {
        let m = self.m;
        let width = cols.len();
        let mut out = vec![0.0; m * width];
        for (c, j) in cols.enumerate() {
            out[c * m + j] = 1.0;
        }
        for k in (0..self.rank).rev() {
            let v = &self.qr[k * m + k..(k + 1) * m];
            for c in 0..width {
                apply_reflector(v, self.tau[k], &mut out[c * m + k..(c + 1) * m]);
            }
        }
        DenseMatrix::from_col_major(m, width, out)
    }
}

/// Turns `x` into `beta e_1` in place, storing the essential part of the
/// reflector below the first entry. Returns `tau` for `H = I - tau v vᵀ`, `v_0 = 1`.
fn make_reflector(x: &mut [f64]) -> f64 {
    let alpha = x[0];
    let tail_sq = dot(&x[1..], &x[1..]);
    if tail_sq == 0.0 {
        return 0.0;
    }
    let norm = libm::sqrt(alpha * alpha + tail_sq);
    let beta = if alpha >= 0.0 { -norm } else { norm };
    let scale = 1.0 / (alpha - beta);
    for xi in &mut x[1..] {
        *xi *= scale;
    }
    x[0] = beta;
    (beta - alpha) / beta
}

/// Applies `H = I - tau v vᵀ` (with `v_0 = 1` implicit) to `col`.
fn apply_reflector(v: &[f64], tau: f64, col: &mut [f64]) {
    if tau == 0.0 {
        return;
    }
    let w = col[0] + dot(&v[1..], &col[1..]);
    let s = tau * w;
    col[0] -= s;
    axpy(-s, &v[1..], &mut col[1..]);
}

/// Numerical rank with orthonormal bases for the range, row space and kernel.
#[derive(Debug, Clone)]
pub struct RankFactorization {
    pub rank: usize,
    /// `n_rows × rank`, orthonormal columns spanning the range.
    pub range_basis: DenseMatrix,
    /// `n_cols × rank`, orthonormal columns spanning the row space.
    pub row_basis: DenseMatrix,
    /// `n_cols × (n_cols - rank)`, orthonormal columns spanning the kernel.
    pub null_basis: DenseMatrix,
    /// Relative threshold the rank decision was made with.
    pub tolerance_used: f64,
    /// Upper-triangular `rank × rank` factor with `M · row_basis = range_basis · R`.
    r_factor: Vec<f64>,
}

impl RankFactorization {
    /// Minimum-norm least-squares solution of `M w ≈ x`.
    pub fn solve(&self, x: &[f64]) -> Vec<f64> {
        let r = self.rank;
        assert_eq!(x.len(), self.range_basis.n_rows(), "solve: length mismatch");
        let mut z = self.range_basis.tr_mul_vec(x);
        for i in (0..r).rev() {
            let tail: f64 = ((i + 1)..r).map(|j| self.r_factor[j * r + i] * z[j]).sum();
            z[i] = (z[i] - tail) / self.r_factor[i * r + i];
        }
        self.row_basis.mul_vec(&z)
    }
}

/// Rank-revealing factorization of `m` under relative threshold `rel_tol`.
///
/// The kernel basis comes from a pivoted QR of `mᵀ`; each kernel vector is
/// sign-normalized so its first non-negligible entry is positive.
pub fn rank_factor(m: &DenseMatrix, rel_tol: f64) -> RankFactorization {
    let (n, p) = (m.n_rows(), m.n_cols());
    let qr = PivotedQr::factor(&m.transpose(), rel_tol);
    let rank = qr.rank;
    let (row_basis, mut null_basis) = if p == 0 {
        (DenseMatrix::zeros(0, 0), DenseMatrix::zeros(0, 0))
    } else {
        (qr.q_columns(0..rank), qr.q_columns(rank..p))
    };
    for j in 0..null_basis.n_cols() {
        let col = &mut null_basis.values[j * p..(j + 1) * p];
        let lead = col.iter().copied().find(|v| v.abs() > 1e-10).unwrap_or(0.0);
        if lead < 0.0 {
            col.iter_mut().for_each(|v| *v = -*v);
        }
    }

    // Orthonormal range basis from the full-column-rank product M · row_basis.
    let projected = m.matmul(&row_basis);
    let mut packed = projected.values.clone();
    let mut taus = Vec::with_capacity(rank);
    for k in 0..rank {
        let t = make_reflector(&mut packed[k * n + k..(k + 1) * n]);
        taus.push(t);
        let (head, tail) = packed.split_at_mut((k + 1) * n);
        let v = &head[k * n + k..(k + 1) * n];
        for j in (k + 1)..rank {
            apply_reflector(v, t, &mut tail[(j - k - 1) * n + k..(j - k) * n]);
        }
    }
    let mut r_factor = vec![0.0; rank * rank];
    for j in 0..rank {
        for i in 0..=j {
            r_factor[j * rank + i] = packed[j * n + i];
        }
    }
    let thin = PivotedQr {
        m: n,
        qr: packed,
        tau: taus,
        rank,
    };
    let range_basis = thin.q_columns(0..rank);

    RankFactorization {
        rank,
        range_basis,
        row_basis,
        null_basis,
        tolerance_used: rel_tol,
        r_factor,
    }
}

/// Numerical rank only; skips forming any orthogonal factor.
pub fn numerical_rank(m: &DenseMatrix, rel_tol: f64) -> usize {
    PivotedQr::factor(&m.transpose(), rel_tol).rank
}

/// Minimum-norm minimizer of `‖M w - x‖₂` under the default rank threshold.
pub fn solve_ls_equality(m: &DenseMatrix, x: &[f64]) -> Result<Vec<f64>> {
    check_len("right-hand side", m.n_rows(), x.len())?;
    let f = rank_factor(m, default_rank_tol(m.n_rows(), m.n_cols()));
    Ok(f.solve(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn identity_has_full_rank_and_no_kernel() {
        let f = rank_factor(&DenseMatrix::identity(3), 1e-10);
        assert_eq!(f.rank, 3);
        assert_eq!(f.null_basis.n_cols(), 0);
        assert_eq!(f.range_basis.n_cols(), 3);
    }

    #[test]
    fn all_ones_kernel_is_antisymmetric() {
        let m = DenseMatrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let f = rank_factor(&m, 1e-10);
        assert_eq!(f.rank, 1);
        let s = core::f64::consts::FRAC_1_SQRT_2;
        assert!(close(f.null_basis.column(0), &[s, -s], 1e-12));
    }

    #[test]
    fn empty_shapes() {
        let f = rank_factor(&DenseMatrix::zeros(0, 0), 1e-10);
        assert_eq!(f.rank, 0);
        assert_eq!(f.null_basis.n_cols(), 0);

        // No rows: the whole space is the kernel.
        let f = rank_factor(&DenseMatrix::zeros(0, 3), 1e-10);
        assert_eq!(f.rank, 0);
        assert_eq!(f.null_basis.n_cols(), 3);

        let f = rank_factor(&DenseMatrix::zeros(4, 0), 1e-10);
        assert_eq!(f.rank, 0);
        assert_eq!(f.range_basis.n_rows(), 4);
        assert_eq!(f.range_basis.n_cols(), 0);
    }

    #[test]
    fn zero_matrix_has_rank_zero() {
        let f = rank_factor(&DenseMatrix::zeros(3, 2), 1e-10);
        assert_eq!(f.rank, 0);
        assert_eq!(f.null_basis.n_cols(), 2);
        assert_eq!(f.solve(&[1.0, 2.0, 3.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn min_norm_solutions() {
        let w = solve_ls_equality(&DenseMatrix::identity(2), &[1.0, 2.0]).unwrap();
        assert!(close(&w, &[1.0, 2.0], 1e-14));

        let m = DenseMatrix::from_rows(&[[1.0, 1.0]]).unwrap();
        let w = solve_ls_equality(&m, &[2.0]).unwrap();
        assert!(close(&w, &[1.0, 1.0], 1e-14));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(DenseMatrix::new(2, 2, vec![1.0; 3]).is_err());
        assert!(matches!(
            DenseMatrix::new(1, 1, vec![f64::NAN]),
            Err(Error::NonFinite { .. })
        ));
        let m = DenseMatrix::identity(2);
        assert!(solve_ls_equality(&m, &[1.0]).is_err());
    }

    #[test]
    fn col_norms_are_cached() {
        let m = DenseMatrix::from_rows(&[[3.0, 0.0], [4.0, 2.0]]).unwrap();
        assert_eq!(m.col_sq_norms(), &[25.0, 4.0]);
        assert_eq!(m.transpose().col_sq_norms(), &[9.0, 20.0]);
    }
}
