//! Reference solvers used to check [`crate::solver`].
//!
//! [`projected_gradient`] handles medium instances; [`enumerate_faces`]
//! solves tiny ones exactly by visiting every face of the box.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, invalid, Error, Result};
use crate::linalg::{default_rank_tol, norm2, rank_factor, DenseMatrix};
use crate::solver::{init_beta, Bounds};

/// Largest `p` accepted by [`enumerate_faces`].
pub const MAX_ENUMERATION_VARS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMethod {
    ProjectedGradient,
    Enumeration,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub beta: Vec<f64>,
    pub objective: f64,
    pub method: OracleMethod,
    /// False when projected gradient hit `max_iters`.
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PgConfig {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for PgConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iters: 200_000,
        }
    }
}

pub fn objective(x: &DenseMatrix, y: &[f64], beta: &[f64]) -> f64 {
    let fit = x.mul_vec(beta);
    0.5 * y.iter().zip(&fit).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

/// Upper bound on `‖XᵀX‖₂`: 20 power iterations, inflated by 1%.
pub fn lipschitz_bound(x: &DenseMatrix) -> f64 {
    let p = x.n_cols();
    if p == 0 {
        return 0.0;
    }
    // Slightly uneven start so it is unlikely to be orthogonal to the top
    // eigenvector.
    let mut v: Vec<f64> = (0..p).map(|j| 1.0 + 0.1 * (j % 7) as f64).collect();
    let mut lambda = 0.0;
    for _ in 0..20 {
        let nv = norm2(&v);
        if nv == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|e| *e /= nv);
        let w = x.tr_mul_vec(&x.mul_vec(&v));
        lambda = norm2(&w);
        v = w;
    }
    1.01 * lambda
}

pub fn projected_gradient(x: &DenseMatrix, y: &[f64], bounds: &Bounds, config: &PgConfig) -> Result<OracleResult> {
    check_len("response", x.n_rows(), y.len())?;
    check_len("bounds", x.n_cols(), bounds.len())?;
    if !(config.tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let (lo, hi) = (bounds.lower(), bounds.upper());
    let mut beta = init_beta(bounds);
    let l = lipschitz_bound(x);
    let mut converged = l == 0.0;
    let mut iterations = 0;
    if !converged {
        let step = 1.0 / l;
        while iterations < config.max_iters {
            iterations += 1;
            let fit = x.mul_vec(&beta);
            let resid: Vec<f64> = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
            // β − step·∇f with ∇f = −Xᵀr.
            let g = x.tr_mul_vec(&resid);
            let mut moved = 0.0;
            for j in 0..beta.len() {
                let next = (beta[j] + step * g[j]).max(lo[j]).min(hi[j]);
                moved += (next - beta[j]) * (next - beta[j]);
                beta[j] = next;
            }
            let scale = 1.0 + norm2(&beta);
            if libm::sqrt(moved) <= config.tol * scale {
                converged = true;
                break;
            }
        }
    }
    Ok(OracleResult {
        objective: objective(x, y, &beta),
        beta,
        method: OracleMethod::ProjectedGradient,
        converged,
        iterations,
    })
}

/// Exact minimizer by enumeration of every lower/upper/free pattern.
///
/// For each free set the columns are factored once and reused across all
/// assignments of the pinned coordinates to their finite bounds. Among
/// feasible patterns the lowest objective wins; ties go to the pattern seen
/// first (free sets by increasing bitmask, pinned coordinates lower before
/// upper).
pub fn enumerate_faces(x: &DenseMatrix, y: &[f64], bounds: &Bounds) -> Result<OracleResult> {
    check_len("response", x.n_rows(), y.len())?;
    check_len("bounds", x.n_cols(), bounds.len())?;
    let p = x.n_cols();
    if p > MAX_ENUMERATION_VARS {
        return Err(Error::TooManyVariables {
            p,
            max: MAX_ENUMERATION_VARS,
        });
    }
    let (lo, hi) = (bounds.lower(), bounds.upper());
    // Finite values each coordinate may be pinned at.
    let pins: Vec<Vec<f64>> = (0..p)
        .map(|j| {
            let mut v = Vec::new();
            if lo[j].is_finite() {
                v.push(lo[j]);
            }
            if hi[j].is_finite() && hi[j] != lo[j] {
                v.push(hi[j]);
            }
            v
        })
        .collect();

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut patterns = 0;
    for mask in 0u32..(1u32 << p) {
        let free: Vec<usize> = (0..p).filter(|&j| mask & (1 << j) != 0).collect();
        let pinned: Vec<usize> = (0..p).filter(|&j| mask & (1 << j) == 0).collect();
        // A fixed coordinate is never free; an unbounded one is never pinned.
        if free.iter().any(|&j| lo[j] == hi[j]) || pinned.iter().any(|&j| pins[j].is_empty()) {
            continue;
        }
        let xf = x.select_columns(&free);
        let fact = rank_factor(&xf, default_rank_tol(xf.n_rows(), xf.n_cols()));

        let mut choice = vec![0usize; pinned.len()];
        loop {
            patterns += 1;
            let mut beta = vec![0.0; p];
            let mut r = y.to_vec();
            for (c, &j) in choice.iter().zip(&pinned) {
                let v = pins[j][*c];
                beta[j] = v;
                if v != 0.0 {
                    for (ri, xi) in r.iter_mut().zip(x.column(j)) {
                        *ri -= v * xi;
                    }
                }
            }
            let bf = fact.solve(&r);
            let feasible = free.iter().zip(&bf).all(|(&j, &b)| {
                let slack = 1e-9 * (1.0 + b.abs());
                b >= lo[j] - slack && b <= hi[j] + slack
            });
            if feasible {
                for (&j, &b) in free.iter().zip(&bf) {
                    beta[j] = b.max(lo[j]).min(hi[j]);
                }
                let f = objective(x, y, &beta);
                if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                    best = Some((f, beta));
                }
            }
            if !advance(&mut choice, |i| pins[pinned[i]].len()) {
                break;
            }
        }
    }
    // The all-pinned-at-init pattern (or the all-free pattern when nothing
    // is finite) is always feasible, so `best` is set.
    let (objective, beta) = best.expect("at least one feasible face");
    Ok(OracleResult {
        beta,
        objective,
        method: OracleMethod::Enumeration,
        converged: true,
        iterations: patterns,
    })
}

/// Mixed-radix increment; false once every combination has been produced.
fn advance(digits: &mut [usize], radix: impl Fn(usize) -> usize) -> bool {
    for i in (0..digits.len()).rev() {
        digits[i] += 1;
        if digits[i] < radix(i) {
            return true;
        }
        digits[i] = 0;
    }
    false
}
