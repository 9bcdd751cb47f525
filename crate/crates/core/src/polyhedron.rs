//! Polyhedra `{x : A x ≤ b}` with a declared set of maximal affine constraints.
//!
//! The maximal affine set `S` holds the rows that bind at every point of the
//! polyhedron. It is never detected automatically; the canonical constructors
//! know it analytically and general callers declare it. On construction the
//! affine hull `{x : A_S x = b_S}` is parametrized as `x = ξ + V x'` with `V`
//! an orthonormal basis of `null(A_S)` and `ξ` the minimum-norm solution.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, invalid, Error, Result};
use crate::linalg::{default_rank_tol, norm2, rank_factor, DenseMatrix};
use crate::solver::Bounds;

pub const DEFAULT_BINDING_TOL: f64 = 1e-9;
pub const DEFAULT_FEAS_TOL: f64 = 1e-9;

/// Cached parametrization of the affine hull.
#[derive(Debug, Clone)]
struct Reduction {
    /// `None` stands for the identity (no maximal affine constraints).
    basis: Option<DenseMatrix>,
    offset: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Polyhedron {
    a: DenseMatrix,
    b: Vec<f64>,
    maximal_affine: Vec<usize>,
    free_rows: Vec<usize>,
    reduction: Reduction,
}

/// Result of [`Polyhedron::reduce`]: `P = {ξ + V x' : A' x' ≤ b'}`.
#[derive(Debug, Clone)]
pub struct ReducedPolyhedron {
    pub v: DenseMatrix,
    pub xi: Vec<f64>,
    pub a_reduced: DenseMatrix,
    pub b_reduced: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BindingReport {
    /// Rows with `|b_i - a_iᵀx| ≤ binding_tol`, ascending.
    pub binding: Vec<usize>,
    /// `b - A x`.
    pub slacks: Vec<f64>,
    pub is_feasible: bool,
}

impl Polyhedron {
    /// Builds `{x : A x ≤ b}` with maximal affine rows `maximal_affine`.
    ///
    /// Zero rows outside `S` are dropped (row indices of the result refer to
    /// the remaining rows); a zero row with `b_i < 0` makes the set empty.
    pub fn new(a: DenseMatrix, b: Vec<f64>, maximal_affine: Vec<usize>) -> Result<Self> {
        check_len("constraint right-hand side", a.n_rows(), b.len())?;
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "constraint right-hand side",
            });
        }
        let m = a.n_rows();
        let mut in_s = vec![false; m];
        for &i in &maximal_affine {
            if i >= m {
                return Err(invalid("maximal_affine", "row index out of range"));
            }
            in_s[i] = true;
        }

        let mut keep = Vec::with_capacity(m);
        for i in 0..m {
            let zero = (0..a.n_cols()).all(|j| a.get(i, j) == 0.0);
            if zero && !in_s[i] {
                if b[i] < 0.0 {
                    return Err(Error::EmptyPolyhedron);
                }
                continue;
            }
            keep.push(i);
        }
        let (a, b, in_s) = if keep.len() == m {
            (a, b, in_s)
        } else {
            (
                a.select_rows(&keep),
                keep.iter().map(|&i| b[i]).collect(),
                keep.iter().map(|&i| in_s[i]).collect(),
            )
        };
        Self::from_parts(a, b, in_s)
    }

    fn from_parts(a: DenseMatrix, b: Vec<f64>, in_s: Vec<bool>) -> Result<Self> {
        let p = a.n_cols();
        let maximal_affine: Vec<usize> = (0..in_s.len()).filter(|&i| in_s[i]).collect();
        let free_rows: Vec<usize> = (0..in_s.len()).filter(|&i| !in_s[i]).collect();

        let reduction = if maximal_affine.is_empty() {
            Reduction {
                basis: None,
                offset: vec![0.0; p],
            }
        } else {
            let a_s = a.select_rows(&maximal_affine);
            let b_s: Vec<f64> = maximal_affine.iter().map(|&i| b[i]).collect();
            let f = rank_factor(&a_s, default_rank_tol(a_s.n_rows(), p));
            let xi = f.solve(&b_s);
            let mut resid = a_s.mul_vec(&xi);
            resid.iter_mut().zip(&b_s).for_each(|(r, bi)| *r -= bi);
            if norm2(&resid) > 1e-9 * (1.0 + norm2(&b_s)) {
                return Err(Error::EmptyPolyhedron);
            }
            Reduction {
                basis: Some(f.null_basis),
                offset: xi,
            }
        };

        Ok(Self {
            a,
            b,
            maximal_affine,
            free_rows,
            reduction,
        })
    }

    /// Non-negative orthant: `A = -I`, `b = 0`.
    pub fn orthant(p: usize) -> Result<Self> {
        if p == 0 {
            return Err(invalid("p", "must be at least 1"));
        }
        let mut a = DenseMatrix::identity(p);
        a = negate(&a);
        Self::from_parts(a, vec![0.0; p], vec![false; p])
    }

    /// Box `lower ≤ x ≤ upper`: `A = [-I; I]`, `b = [-lower; upper]`, with rows
    /// for infinite bounds dropped. Lower-bound rows come first. A coordinate
    /// with `lower_i = upper_i` puts both of its rows into `S`.
    pub fn boxed(lower: &[f64], upper: &[f64]) -> Result<Self> {
        let bounds = Bounds::new(lower.to_vec(), upper.to_vec())?;
        Self::from_bounds(&bounds)
    }

    pub fn from_bounds(bounds: &Bounds) -> Result<Self> {
        let p = bounds.len();
        let (lower, upper) = (bounds.lower(), bounds.upper());
        let mut rows: Vec<(usize, f64, f64, bool)> = Vec::new();
        for i in 0..p {
            if lower[i].is_finite() {
                rows.push((i, -1.0, -lower[i], lower[i] == upper[i]));
            }
        }
        for i in 0..p {
            if upper[i].is_finite() {
                rows.push((i, 1.0, upper[i], lower[i] == upper[i]));
            }
        }
        let m = rows.len();
        let mut values = vec![0.0; m * p];
        for (r, &(i, sign, _, _)) in rows.iter().enumerate() {
            values[i * m + r] = sign;
        }
        let a = DenseMatrix::from_col_major(m, p, values);
        let b = rows.iter().map(|r| r.2).collect();
        let in_s = rows.iter().map(|r| r.3).collect();
        Self::from_parts(a, b, in_s)
    }

    /// Scaled simplex: `A = [-I; 1ᵀ]`, `b = [0; c]`. With `equality` the sum
    /// row (index `p`) is declared maximal affine.
    pub fn simplex(p: usize, c: f64, equality: bool) -> Result<Self> {
        if p == 0 {
            return Err(invalid("p", "must be at least 1"));
        }
        if !(c >= 0.0) || !c.is_finite() {
            return Err(invalid("c", "must be finite and non-negative"));
        }
        let m = p + 1;
        let mut values = vec![0.0; m * p];
        for j in 0..p {
            values[j * m + j] = -1.0;
            values[j * m + p] = 1.0;
        }
        let a = DenseMatrix::from_col_major(m, p, values);
        let mut b = vec![0.0; m];
        b[p] = c;
        let mut in_s = vec![false; m];
        in_s[p] = equality;
        Self::from_parts(a, b, in_s)
    }

    #[inline]
    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }

    #[inline]
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    #[inline]
    pub fn n_vars(&self) -> usize {
        self.a.n_cols()
    }

    #[inline]
    pub fn n_constraints(&self) -> usize {
        self.a.n_rows()
    }

    /// Declared maximal affine rows `S`, ascending.
    #[inline]
    pub fn maximal_affine(&self) -> &[usize] {
        &self.maximal_affine
    }

    /// Rows outside `S`, ascending. Position `k` here is row `k` of `A_{-S}`.
    #[inline]
    pub fn free_rows(&self) -> &[usize] {
        &self.free_rows
    }

    /// `p - rank(A_S)`.
    pub fn dimension(&self) -> usize {
        match &self.reduction.basis {
            None => self.n_vars(),
            Some(v) => v.n_cols(),
        }
    }

    pub fn binding_report(&self, x: &[f64], binding_tol: f64, feas_tol: f64) -> Result<BindingReport> {
        check_len("point", self.n_vars(), x.len())?;
        let slacks: Vec<f64> = (0..self.n_constraints())
            .map(|i| self.b[i] - self.a.row_dot(i, x))
            .collect();
        let binding = (0..slacks.len()).filter(|&i| slacks[i].abs() <= binding_tol).collect();
        let is_feasible = slacks.iter().all(|&s| s >= -feas_tol);
        Ok(BindingReport {
            binding,
            slacks,
            is_feasible,
        })
    }

    /// Materializes `V`, `ξ`, `A' = A_{-S} V` and `b' = b_{-S} - A_{-S} ξ`.
    pub fn reduce(&self) -> ReducedPolyhedron {
        let p = self.n_vars();
        let v = self.reduction.basis.clone().unwrap_or_else(|| DenseMatrix::identity(p));
        let xi = self.reduction.offset.clone();
        let a_free = self.a.select_rows(&self.free_rows);
        let a_reduced = a_free.matmul(&v);
        let shift = a_free.mul_vec(&xi);
        let b_reduced = self.free_rows.iter().zip(&shift).map(|(&i, s)| self.b[i] - s).collect();
        ReducedPolyhedron {
            v,
            xi,
            a_reduced,
            b_reduced,
        }
    }

    /// `A_{-S}` and `b_{-S}`.
    pub fn free_part(&self) -> (DenseMatrix, Vec<f64>) {
        (
            self.a.select_rows(&self.free_rows),
            self.free_rows.iter().map(|&i| self.b[i]).collect(),
        )
    }

    /// `A_S` and `b_S`.
    pub fn affine_part(&self) -> (DenseMatrix, Vec<f64>) {
        (
            self.a.select_rows(&self.maximal_affine),
            self.maximal_affine.iter().map(|&i| self.b[i]).collect(),
        )
    }

    /// `x' = Vᵀ (x - ξ)`.
    pub fn to_reduced(&self, x: &[f64]) -> Vec<f64> {
        match &self.reduction.basis {
            None => x.to_vec(),
            Some(v) => {
                let shifted: Vec<f64> = x.iter().zip(&self.reduction.offset).map(|(a, b)| a - b).collect();
                v.tr_mul_vec(&shifted)
            }
        }
    }

    /// `x = ξ + V x'`.
    pub fn from_reduced(&self, x_reduced: &[f64]) -> Vec<f64> {
        match &self.reduction.basis {
            None => x_reduced.to_vec(),
            Some(v) => {
                let mut x = v.mul_vec(x_reduced);
                x.iter_mut().zip(&self.reduction.offset).for_each(|(a, b)| *a += b);
                x
            }
        }
    }
}

fn negate(m: &DenseMatrix) -> DenseMatrix {
    DenseMatrix::from_col_major(m.n_rows(), m.n_cols(), m.values().iter().map(|v| -v).collect())
}
