//! Null-space walking toward sparse representations.
//!
//! Given a feasible `w0` in a polyhedron `P = {w : A w ≤ b}` and a linear map
//! `Q`, [`sparsify`] moves `w` along directions that leave both `Q w` and the
//! currently binding constraints unchanged until it hits a new constraint.
//! Each step pins one more constraint, and the walk stops once no such
//! direction is left. The result binds at least
//! `min(rank(A) - rank(A_S), dim(P) - rank(Q V))` constraints outside the
//! affine hull rows `S`, where `V` spans the directions of the hull.
//!
//! For the orthant this says an NNLS solution with at most `rank(X)`
//! positive entries exists; for the simplex it is Carathéodory's theorem.
//!
//! The walk runs in the original coordinates, with the rows of `A_S` stacked
//! next to `Q` and the binding rows when computing directions. Rows with a
//! single non-zero entry (bound constraints) are not factored: they pin a
//! coordinate, and only the unpinned columns of the remaining rows go through
//! a rank-revealing QR.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, invalid, Error, Result};
use crate::linalg::{default_rank_tol, dot, norm2, rank_factor, solve_ls_equality, DenseMatrix};
use crate::polyhedron::Polyhedron;
use crate::solver::Bounds;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceSet {
    /// A constraint binds when `|b_i - a_iᵀw| ≤ binding`.
    pub binding: f64,
    /// Largest accepted constraint violation of the input point.
    pub feasibility: f64,
    /// Relative rank threshold; `None` uses [`default_rank_tol`] of each
    /// factored matrix.
    pub rank: Option<f64>,
    /// `a_iᵀd` counts as zero below `direction · ‖a_i‖` for a unit direction `d`.
    pub direction: f64,
}

impl Default for ToleranceSet {
    fn default() -> Self {
        Self {
            binding: 1e-9,
            feasibility: 1e-9,
            rank: None,
            direction: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsifyResult {
    pub w: Vec<f64>,
    /// Binding rows of `A_{-S}`, as positions into [`Polyhedron::free_rows`].
    pub binding: Vec<usize>,
    pub binding_rank: usize,
    /// Binding count the result is guaranteed to reach: the theorem's bound,
    /// or the achieved count when the hypothesis could not be certified.
    pub guarantee: usize,
    /// `min(rank(A) - rank(A_S), dim(P) - rank(Q V))`.
    pub theorem_bound: usize,
    /// Whether `[Q; A]` has full column rank, i.e. no direction can leave both
    /// `Q w` and every constraint unchanged.
    pub hypothesis_certified: bool,
    /// Directions skipped because they met no constraint.
    pub skipped_directions: usize,
    /// `‖Q w - Q w0‖₂`.
    pub reconstruction_error: f64,
    pub steps_taken: usize,
}

impl SparsifyResult {
    pub fn guarantee_met(&self) -> bool {
        self.binding.len() >= self.guarantee
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullStep {
    pub t: f64,
    pub hit: usize,
}

/// Step along `v` from `w` to the nearest constraint hyperplane of
/// `A_free w ≤ b_free`.
///
/// Among rows with `a_iᵀv ≠ 0`, returns the `t_i = (b_i - a_iᵀw) / a_iᵀv`
/// of smallest magnitude. Ties prefer positive steps, then the smaller row.
pub fn null_step(a_free: &DenseMatrix, b_free: &[f64], w: &[f64], v: &[f64]) -> Result<NullStep> {
    check_len("constraint right-hand side", a_free.n_rows(), b_free.len())?;
    check_len("point", a_free.n_cols(), w.len())?;
    check_len("direction", a_free.n_cols(), v.len())?;
    let rows: Vec<usize> = (0..a_free.n_rows()).collect();
    let v_norm = norm2(v);
    if v_norm == 0.0 {
        return Err(invalid("direction", "must be non-zero"));
    }
    let row_norms = row_norms(a_free);
    step_over(a_free, b_free, &rows, &row_norms, w, v, 1e-12 * v_norm)
}

fn step_over(
    a: &DenseMatrix,
    b: &[f64],
    rows: &[usize],
    row_norms: &[f64],
    w: &[f64],
    v: &[f64],
    dir_tol: f64,
) -> Result<NullStep> {
    let mut best: Option<NullStep> = None;
    for &i in rows {
        let av = a.row_dot(i, v);
        if av.abs() <= dir_tol * row_norms[i] {
            continue;
        }
        let t = (b[i] - a.row_dot(i, w)) / av;
        let better = match best {
            None => true,
            Some(cur) => t.abs() < cur.t.abs() || (t.abs() == cur.t.abs() && t > 0.0 && cur.t < 0.0),
        };
        if better {
            best = Some(NullStep { t, hit: i });
        }
    }
    best.ok_or(Error::NoIntersection)
}

fn row_norms(a: &DenseMatrix) -> Vec<f64> {
    let mut sq = vec![0.0; a.n_rows()];
    for j in 0..a.n_cols() {
        for (s, v) in sq.iter_mut().zip(a.column(j)) {
            *s += v * v;
        }
    }
    sq.into_iter().map(libm::sqrt).collect()
}

/// The single non-zero column of each row of `a`, if it has exactly one.
fn unit_columns(a: &DenseMatrix) -> Vec<Option<usize>> {
    let mut count = vec![0usize; a.n_rows()];
    let mut col = vec![0usize; a.n_rows()];
    for j in 0..a.n_cols() {
        for (i, &v) in a.column(j).iter().enumerate() {
            if v != 0.0 {
                count[i] += 1;
                col[i] = j;
            }
        }
    }
    count.iter().zip(col).map(|(&c, j)| (c == 1).then_some(j)).collect()
}

/// Rows of `[Q; A_rows]` with the bound-type rows of `A` factored out.
struct Stack<'a> {
    q: Option<&'a DenseMatrix>,
    a: &'a DenseMatrix,
    unit: &'a [Option<usize>],
    rank_tol: Option<f64>,
}

struct Restricted {
    pinned: usize,
    free_cols: Vec<usize>,
    matrix: DenseMatrix,
    tol: f64,
}

impl Stack<'_> {
    fn restrict(&self, rows: &[usize]) -> Restricted {
        let p = self.a.n_cols();
        let mut pinned = vec![false; p];
        let mut general = Vec::new();
        for &i in rows {
            match self.unit[i] {
                Some(j) => pinned[j] = true,
                None => general.push(i),
            }
        }
        let free_cols: Vec<usize> = (0..p).filter(|&j| !pinned[j]).collect();
        let q_rows = self.q.map_or(0, |q| q.n_rows());
        let m = q_rows + general.len();
        let mut values = Vec::with_capacity(m * free_cols.len());
        for &j in &free_cols {
            if let Some(q) = self.q {
                values.extend_from_slice(q.column(j));
            }
            let col = self.a.column(j);
            values.extend(general.iter().map(|&i| col[i]));
        }
        let matrix = DenseMatrix::new(m, free_cols.len(), values).expect("consistent shape");
        let tol = self
            .rank_tol
            .unwrap_or_else(|| default_rank_tol(matrix.n_rows(), matrix.n_cols()));
        Restricted {
            pinned: p - free_cols.len(),
            free_cols,
            matrix,
            tol,
        }
    }

    fn rank(&self, rows: &[usize]) -> usize {
        let r = self.restrict(rows);
        r.pinned + crate::linalg::numerical_rank(&r.matrix, r.tol)
    }

    /// Orthonormal basis of the kernel of `[Q; A_rows]`, as `p × k`.
    fn null_basis(&self, rows: &[usize]) -> DenseMatrix {
        let p = self.a.n_cols();
        let r = self.restrict(rows);
        let inner = rank_factor(&r.matrix, r.tol).null_basis;
        let k = inner.n_cols();
        let mut values = vec![0.0; p * k];
        for c in 0..k {
            for (&j, &v) in r.free_cols.iter().zip(inner.column(c)) {
                values[c * p + j] = v;
            }
        }
        DenseMatrix::new(p, k, values).expect("consistent shape")
    }
}

/// Walks `w0` to a point of `polyhedron` with the same image under `q` that
/// binds the guaranteed number of constraints.
pub fn sparsify(q: &DenseMatrix, polyhedron: &Polyhedron, w0: &[f64], tol: &ToleranceSet) -> Result<SparsifyResult> {
    let p = polyhedron.n_vars();
    check_len("representation columns", p, q.n_cols())?;
    check_len("starting point", p, w0.len())?;
    if w0.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "starting point",
        });
    }
    check_feasible(polyhedron, w0, tol)?;

    let a = polyhedron.a();
    let b = polyhedron.b();
    let s_rows = polyhedron.maximal_affine();
    let free_rows = polyhedron.free_rows();
    let unit = unit_columns(a);
    let norms = row_norms(a);
    let stack = Stack {
        q: Some(q),
        a,
        unit: &unit,
        rank_tol: tol.rank,
    };
    let plain = Stack { q: None, ..stack };

    let x0 = q.mul_vec(w0);
    let mut w = w0.to_vec();
    let mut steps = 0;
    let mut skipped = 0;
    let max_steps = polyhedron.dimension() + 1;
    while steps < max_steps {
        let (blocked, open): (Vec<usize>, Vec<usize>) =
            free_rows.iter().partition(|&&i| b[i] - a.row_dot(i, &w) <= tol.binding);
        let mut rows = s_rows.to_vec();
        rows.extend_from_slice(&blocked);
        let directions = stack.null_basis(&rows);

        let mut moved = false;
        for c in 0..directions.n_cols() {
            let d = directions.column(c);
            match step_over(a, b, &open, &norms, &w, d, tol.direction) {
                Ok(NullStep { t, hit }) => {
                    for (wi, di) in w.iter_mut().zip(d) {
                        *wi += t * di;
                    }
                    snap(a, b, hit, unit[hit], d, &mut w);
                    restore_bounds(a, b, &open, &unit, &mut w);
                    moved = true;
                    break;
                }
                Err(_) => skipped += 1,
            }
        }
        if !moved {
            break;
        }
        steps += 1;
    }

    let binding: Vec<usize> = free_rows
        .iter()
        .enumerate()
        .filter(|(_, &i)| (b[i] - a.row_dot(i, &w)).abs() <= tol.binding)
        .map(|(k, _)| k)
        .collect();
    let t_rows: Vec<usize> = binding.iter().map(|&k| free_rows[k]).collect();
    let binding_rank = plain.rank(&t_rows);

    let all_rows: Vec<usize> = (0..a.n_rows()).collect();
    let rank_a = plain.rank(&all_rows);
    let rank_s = plain.rank(s_rows);
    // dim(P) - rank(QV) = dim(ker Q ∩ ker A_S) = p - rank([Q; A_S]).
    let free_dim = p - stack.rank(s_rows);
    let theorem_bound = (rank_a - rank_s).min(free_dim);
    let hypothesis_certified = stack.rank(&all_rows) == p;
    let guarantee = if hypothesis_certified {
        theorem_bound
    } else {
        theorem_bound.min(binding.len())
    };

    let fit = q.mul_vec(&w);
    let reconstruction_error = libm::sqrt(fit.iter().zip(&x0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
    Ok(SparsifyResult {
        w,
        binding,
        binding_rank,
        guarantee,
        theorem_bound,
        hypothesis_certified,
        skipped_directions: skipped,
        reconstruction_error,
        steps_taken: steps,
    })
}

/// Puts `w` exactly on the hyperplane of row `hit`.
fn snap(a: &DenseMatrix, b: &[f64], hit: usize, unit: Option<usize>, d: &[f64], w: &mut [f64]) {
    match unit {
        // `+ 0.0` turns a -0.0 into 0.0.
        Some(j) => w[j] = b[hit] / a.get(hit, j) + 0.0,
        None => {
            let ad = a.row_dot(hit, d);
            let s = (b[hit] - a.row_dot(hit, w)) / ad;
            for (wi, di) in w.iter_mut().zip(d) {
                *wi += s * di;
            }
        }
    }
}

/// Rounding can leave a coordinate a hair past a bound row it was walking
/// toward; put it back on the bound.
fn restore_bounds(a: &DenseMatrix, b: &[f64], rows: &[usize], unit: &[Option<usize>], w: &mut [f64]) {
    for &i in rows {
        if let Some(j) = unit[i] {
            let aij = a.get(i, j);
            if b[i] - aij * w[j] < 0.0 {
                w[j] = b[i] / aij + 0.0;
            }
        }
    }
}

fn check_feasible(polyhedron: &Polyhedron, w: &[f64], tol: &ToleranceSet) -> Result<()> {
    let report = polyhedron.binding_report(w, tol.binding, tol.feasibility)?;
    let mut worst: Option<(usize, f64)> = None;
    let mut note = |row: usize, violation: f64| {
        if violation > tol.feasibility && worst.is_none_or(|(_, v)| violation > v) {
            worst = Some((row, violation));
        }
    };
    for (i, &s) in report.slacks.iter().enumerate() {
        note(i, -s);
    }
    // Hull rows must hold with equality.
    for &i in polyhedron.maximal_affine() {
        note(i, report.slacks[i]);
    }
    match worst {
        Some((row, violation)) => Err(Error::Infeasible { row, violation }),
        None => Ok(()),
    }
}

/// [`sparsify`] for a bounded-variable least-squares solution: `Q = X` over
/// the box given by `bounds`.
pub fn sparsify_bounded(x: &DenseMatrix, bounds: &Bounds, beta: &[f64], tol: &ToleranceSet) -> Result<SparsifyResult> {
    let polyhedron = Polyhedron::from_bounds(bounds)?;
    sparsify(x, &polyhedron, beta, tol)
}

/// Drops support from a sum-constrained non-negative solution without
/// changing `X β` or increasing `1ᵀβ`, until the support columns of `x` are
/// linearly independent.
pub fn reduce_isls_excess(x: &DenseMatrix, beta: &[f64], c: f64) -> Result<Vec<f64>> {
    check_len("coefficients", x.n_cols(), beta.len())?;
    if beta.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(invalid("beta", "entries must be finite and non-negative"));
    }
    let total: f64 = beta.iter().sum();
    if total > c + 1e-10 * (1.0 + c.abs()) {
        return Err(invalid("beta", "sum exceeds the budget"));
    }
    let mut beta = beta.to_vec();
    loop {
        let support: Vec<usize> = (0..beta.len()).filter(|&j| beta[j] > 0.0).collect();
        let xs = x.select_columns(&support);
        let kernel = rank_factor(&xs, default_rank_tol(xs.n_rows(), xs.n_cols())).null_basis;
        if kernel.n_cols() == 0 {
            return Ok(beta);
        }
        let mut v = kernel.column(0).to_vec();
        if v.iter().sum::<f64>() > 0.0 {
            v.iter_mut().for_each(|e| *e = -*e);
        }
        // Smallest step that zeroes a coordinate; ties to the lower index.
        let mut best: Option<(f64, usize)> = None;
        for (k, &vk) in v.iter().enumerate() {
            if vk < 0.0 {
                let t = beta[support[k]] / -vk;
                if best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, k));
                }
            }
        }
        let Some((t, hit)) = best else {
            return Ok(beta);
        };
        for (k, &j) in support.iter().enumerate() {
            beta[j] = (beta[j] + t * v[k]).max(0.0);
        }
        beta[support[hit]] = 0.0;
    }
}

/// Rewrites `Q w` using few columns of `Q`: at most `rank(Q) + 1` for convex
/// weights, `rank(Q)` for conical ones.
pub fn caratheodory_reduce(q: &DenseMatrix, weights: &[f64], conical: bool) -> Result<SparsifyResult> {
    let p = q.n_cols();
    check_len("weights", p, weights.len())?;
    if weights.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(invalid("weights", "must be finite and non-negative"));
    }
    let polyhedron = if conical {
        Polyhedron::orthant(p)?
    } else {
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(invalid("weights", "convex weights must sum to 1"));
        }
        Polyhedron::simplex(p, 1.0, true)?
    };
    sparsify(q, &polyhedron, weights, &ToleranceSet::default())
}

/// Whether `w` is the only point of `P` on its binding face with image `Q w`:
/// `[Q; A_S; (A_{-S})_T]` has full column rank.
pub fn verify_local_uniqueness(q: &DenseMatrix, polyhedron: &Polyhedron, result: &SparsifyResult) -> bool {
    if q.n_cols() != polyhedron.n_vars() {
        return false;
    }
    let a = polyhedron.a();
    let unit = unit_columns(a);
    let stack = Stack {
        q: Some(q),
        a,
        unit: &unit,
        rank_tol: None,
    };
    stack.rank(&face_rows(polyhedron, result)) == polyhedron.n_vars()
}

/// Solves `Q w = x` together with the equalities of the binding face;
/// reproduces `result.w` when [`verify_local_uniqueness`] holds.
pub fn resolve_on_face(
    q: &DenseMatrix,
    polyhedron: &Polyhedron,
    result: &SparsifyResult,
    x: &[f64],
) -> Result<Vec<f64>> {
    check_len("representation columns", polyhedron.n_vars(), q.n_cols())?;
    check_len("image", q.n_rows(), x.len())?;
    let rows = face_rows(polyhedron, result);
    let face = polyhedron.a().select_rows(&rows);
    let stacked = q.vstack(&face);
    let mut rhs = x.to_vec();
    rhs.extend(rows.iter().map(|&i| polyhedron.b()[i]));
    solve_ls_equality(&stacked, &rhs)
}

fn face_rows(polyhedron: &Polyhedron, result: &SparsifyResult) -> Vec<usize> {
    let mut rows = polyhedron.maximal_affine().to_vec();
    rows.extend(result.binding.iter().map(|&k| polyhedron.free_rows()[k]));
    rows
}

/// `‖Q a - Q b‖₂ / (1 + ‖Q b‖₂)`.
pub fn relative_fit_change(q: &DenseMatrix, a: &[f64], b: &[f64]) -> f64 {
    let qa = q.mul_vec(a);
    let qb = q.mul_vec(b);
    let diff: Vec<f64> = qa.iter().zip(&qb).map(|(x, y)| x - y).collect();
    norm2(&diff) / (1.0 + libm::sqrt(dot(&qb, &qb)))
}
