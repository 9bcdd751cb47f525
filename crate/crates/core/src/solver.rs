//! Screened coordinate descent for bounded-variable least squares.
//!
//! Minimizes `½‖y - Xβ‖²` subject to `ℓ ≤ β ≤ u`. Each outer round computes
//! the KKT violations of every coordinate, admits up to `κ` of the worst
//! unscreened violators into the screen set, and then runs coordinate descent
//! restricted to the screen set: one full cycle to collect the coordinates
//! that sit strictly inside their bounds (the active set), cycles over the
//! active set until they settle, drop coordinates that hit a bound, repeat.
//! The solve ends when no coordinate violates its KKT condition beyond
//! `kkt_tol · ‖X_j‖ · ‖y‖`.
//!
//! NNLS is the special case `ℓ = 0`, `u = +∞`; see [`solve_nnls`].

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, invalid, Error, Result};
use crate::linalg::{axpy, dot, norm2, DenseMatrix};

/// Coordinate-wise bounds `lower ≤ β ≤ upper` over the extended reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_len("upper bounds", lower.len(), upper.len())?;
        for (index, (&l, &u)) in lower.iter().zip(&upper).enumerate() {
            let bad = l.is_nan() || u.is_nan() || l > u || l == f64::INFINITY || u == f64::NEG_INFINITY;
            if bad {
                return Err(Error::InvalidBounds {
                    index,
                    lower: l,
                    upper: u,
                });
            }
        }
        Ok(Self { lower, upper })
    }

    /// `0 ≤ β`.
    pub fn nonnegative(p: usize) -> Self {
        Self {
            lower: vec![0.0; p],
            upper: vec![f64::INFINITY; p],
        }
    }

    pub fn unbounded(p: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; p],
            upper: vec![f64::INFINITY; p],
        }
    }

    /// The same interval `[lower, upper]` for all `p` coordinates.
    pub fn uniform(p: usize, lower: f64, upper: f64) -> Result<Self> {
        Self::new(vec![lower; p], vec![upper; p])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.lower.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    #[inline]
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    #[inline]
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, beta: &[f64]) -> bool {
        beta.len() == self.len()
            && beta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&b, (&l, &u))| l <= b && b <= u)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Screen batch size. Falls back to `rank_hint`, then `min(n, p)`.
    pub kappa: Option<usize>,
    pub kkt_tol: f64,
    /// A cycle has converged once `max_k ‖X_k‖² Δβ_k² ≤ cd_tol · ‖y‖²`.
    pub cd_tol: f64,
    /// Outer KKT rounds; `None` means `10 p`.
    pub max_iters: Option<usize>,
    pub rank_hint: Option<usize>,
    /// Cap on coordinate-descent cycles within one outer round.
    pub max_cd_cycles: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kappa: None,
            kkt_tol: 1e-7,
            cd_tol: 1e-12,
            max_iters: None,
            rank_hint: None,
            max_cd_cycles: 100_000,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if self.kappa == Some(0) {
            return Err(invalid("kappa", "must be at least 1"));
        }
        if !(self.kkt_tol > 0.0) {
            return Err(invalid("kkt_tol", "must be positive"));
        }
        if !(self.cd_tol > 0.0) {
            return Err(invalid("cd_tol", "must be positive"));
        }
        if self.max_cd_cycles == 0 {
            return Err(invalid("max_cd_cycles", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// KKT check passed on every coordinate.
    Converged,
    /// Ran out of outer rounds before the KKT check passed.
    MaxIterations,
    /// Every violator was already screened and coordinate descent could not
    /// be tightened any further.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub beta: Vec<f64>,
    /// `y - Xβ`, recomputed from scratch at exit.
    pub residual: Vec<f64>,
    pub objective: f64,
    /// `max_j δ_j / (‖X_j‖ ‖y‖)` over non-zero columns (unscaled when `y = 0`).
    pub kkt_residual: f64,
    /// Screened coordinates in admission order.
    pub screen_set: Vec<usize>,
    /// Coordinates strictly inside their bounds at exit, ascending.
    pub active_set: Vec<usize>,
    pub n_cycles: usize,
    pub n_rounds: usize,
    pub kkt_passed: bool,
    pub status: SolveStatus,
}

/// One accepted coordinate move, reported to the observer of [`solve_observed`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateEvent {
    pub coordinate: usize,
    pub old: f64,
    pub new: f64,
}

/// Vertex of the box closest to zero: `β_i = ℓ_i` if `|ℓ_i| < |u_i|`, else `u_i`;
/// zero when both bounds are infinite.
pub fn init_beta(bounds: &Bounds) -> Vec<f64> {
    bounds
        .lower
        .iter()
        .zip(&bounds.upper)
        .map(|(&l, &u)| {
            if l.is_infinite() && u.is_infinite() {
                0.0
            } else if l.abs() < u.abs() {
                l
            } else {
                u
            }
        })
        .collect()
}

/// `∇f(β) = -Xᵀ r` with `r = y - Xβ`.
pub fn gradient(x: &DenseMatrix, residual: &[f64]) -> Vec<f64> {
    (0..x.n_cols()).map(|j| -dot(x.column(j), residual)).collect()
}

/// KKT violations `δ_i = (∂_i f)_- 1{β_i < u_i} + (∂_i f)_+ 1{β_i > ℓ_i}`.
pub fn violations(grad: &[f64], beta: &[f64], bounds: &Bounds) -> Vec<f64> {
    grad.iter()
        .zip(beta)
        .zip(bounds.lower.iter().zip(&bounds.upper))
        .map(|((&g, &b), (&l, &u))| {
            let mut d = 0.0;
            if b < u {
                d += (-g).max(0.0);
            }
            if b > l {
                d += g.max(0.0);
            }
            d
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktCheck {
    pub passed: bool,
    /// Coordinates with `δ_j > kkt_tol ‖X_j‖ ‖y‖`, by decreasing `δ`, ties by index.
    pub violators: Vec<usize>,
}

pub fn kkt_check(delta: &[f64], x: &DenseMatrix, y: &[f64], kkt_tol: f64) -> KktCheck {
    let y_norm = norm2(y);
    let mut violators: Vec<usize> = (0..delta.len())
        .filter(|&j| delta[j] > kkt_tol * libm::sqrt(x.col_sq_norms()[j]) * y_norm)
        .collect();
    sort_by_violation(&mut violators, delta);
    KktCheck {
        passed: violators.is_empty(),
        violators,
    }
}

fn sort_by_violation(idx: &mut [usize], delta: &[f64]) {
    idx.sort_by(|&a, &b| delta[b].total_cmp(&delta[a]).then(a.cmp(&b)));
}

/// Exact minimization of the objective along coordinate `k`, clipped to
/// `[lower, upper]`. Returns the new value and the change.
#[inline]
pub fn coord_update(beta_k: f64, sq_norm: f64, dot_resid: f64, lower: f64, upper: f64) -> (f64, f64) {
    let new = (beta_k + dot_resid / sq_norm).max(lower).min(upper);
    (new, new - beta_k)
}

/// NNLS: [`solve`] with `ℓ = 0`, `u = +∞`.
pub fn solve_nnls(x: &DenseMatrix, y: &[f64], config: &SolverConfig) -> Result<SolveResult> {
    solve(x, y, &Bounds::nonnegative(x.n_cols()), config)
}

pub fn solve(x: &DenseMatrix, y: &[f64], bounds: &Bounds, config: &SolverConfig) -> Result<SolveResult> {
    solve_observed(x, y, bounds, config, |_| {})
}

/// [`solve`], calling `observer` after every coordinate move.
pub fn solve_observed<F>(
    x: &DenseMatrix,
    y: &[f64],
    bounds: &Bounds,
    config: &SolverConfig,
    observer: F,
) -> Result<SolveResult>
where
    F: FnMut(&UpdateEvent),
{
    check_len("response", x.n_rows(), y.len())?;
    check_len("bounds", x.n_cols(), bounds.len())?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { context: "response" });
    }
    config.validate()?;

    let (n, p) = (x.n_rows(), x.n_cols());
    let kappa = config.kappa.or(config.rank_hint).unwrap_or(n.min(p)).max(1);
    let max_rounds = config.max_iters.unwrap_or(10 * p).max(1);
    let y_sq = dot(y, y);
    let y_norm = libm::sqrt(y_sq);
    let thresholds: Vec<f64> = x
        .col_sq_norms()
        .iter()
        .map(|&s| config.kkt_tol * libm::sqrt(s) * y_norm)
        .collect();

    let mut cd = Descent {
        x,
        y,
        bounds,
        beta: init_beta(bounds),
        resid: Vec::new(),
        observer,
        cycles: 0,
    };
    cd.refresh_residual();

    let mut in_screen = vec![false; p];
    let mut screen: Vec<usize> = Vec::new();
    let mut active: Vec<usize> = Vec::new();
    let mut cd_tol = config.cd_tol;
    let mut rounds = 0;
    let status = loop {
        cd.refresh_residual();
        let grad = gradient(x, &cd.resid);
        let delta = violations(&grad, &cd.beta, bounds);
        let mut order: Vec<usize> = (0..p)
            .filter(|&j| x.col_sq_norms()[j] > 0.0 && delta[j] > thresholds[j])
            .collect();
        if order.is_empty() {
            break SolveStatus::Converged;
        }
        if rounds == max_rounds {
            break SolveStatus::MaxIterations;
        }
        sort_by_violation(&mut order, &delta);

        let mut added = 0;
        for &j in &order {
            if in_screen[j] {
                continue;
            }
            if added == kappa {
                break;
            }
            in_screen[j] = true;
            screen.push(j);
            added += 1;
        }
        if added == 0 {
            // Only screened coordinates still violate: the inner loop stopped
            // short of the KKT tolerance, so tighten it.
            if cd_tol <= MIN_CD_TOL {
                break SolveStatus::Stalled;
            }
            cd_tol = (cd_tol * 1e-2).max(MIN_CD_TOL);
        }

        rounds += 1;
        cd.solve_screened(&screen, &mut active, cd_tol * y_sq, config.max_cd_cycles);
    };

    cd.refresh_residual();
    let grad = gradient(x, &cd.resid);
    let delta = violations(&grad, &cd.beta, bounds);
    let kkt_residual = (0..p)
        .filter(|&j| x.col_sq_norms()[j] > 0.0)
        .map(|j| {
            let scale = libm::sqrt(x.col_sq_norms()[j]) * y_norm;
            if scale > 0.0 {
                delta[j] / scale
            } else {
                delta[j]
            }
        })
        .fold(0.0, f64::max);

    let mut active_set: Vec<usize> = (0..p).filter(|&j| cd.is_interior(j)).collect();
    active_set.sort_unstable();
    let objective = 0.5 * dot(&cd.resid, &cd.resid);
    Ok(SolveResult {
        objective,
        kkt_residual,
        screen_set: screen,
        active_set,
        n_cycles: cd.cycles,
        n_rounds: rounds,
        kkt_passed: status == SolveStatus::Converged,
        status,
        beta: cd.beta,
        residual: cd.resid,
    })
}

const MIN_CD_TOL: f64 = 1e-30;

struct Descent<'a, F> {
    x: &'a DenseMatrix,
    y: &'a [f64],
    bounds: &'a Bounds,
    beta: Vec<f64>,
    resid: Vec<f64>,
    observer: F,
    cycles: usize,
}

impl<F: FnMut(&UpdateEvent)> Descent<'_, F> {
    fn refresh_residual(&mut self) {
        let fit = self.x.mul_vec(&self.beta);
        self.resid = self.y.iter().zip(&fit).map(|(a, b)| a - b).collect();
    }

    #[inline]
    fn is_interior(&self, k: usize) -> bool {
        self.bounds.lower[k] < self.beta[k] && self.beta[k] < self.bounds.upper[k]
    }

    /// Coordinate update on `k`; returns `‖X_k‖² Δβ_k²`.
    fn update(&mut self, k: usize) -> f64 {
        let sq = self.x.col_sq_norms()[k];
        if sq == 0.0 {
            return 0.0;
        }
        let col = self.x.column(k);
        let old = self.beta[k];
        let (new, step) = coord_update(
            old,
            sq,
            dot(col, &self.resid),
            self.bounds.lower[k],
            self.bounds.upper[k],
        );
        if step == 0.0 {
            return 0.0;
        }
        axpy(-step, col, &mut self.resid);
        self.beta[k] = new;
        (self.observer)(&UpdateEvent {
            coordinate: k,
            old,
            new,
        });
        sq * step * step
    }

    fn solve_screened(&mut self, screen: &[usize], active: &mut Vec<usize>, tol: f64, max_cycles: usize) {
        let mut in_active = vec![false; self.beta.len()];
        for &k in active.iter() {
            in_active[k] = true;
        }
        let mut cycles = 0;
        loop {
            let mut worst: f64 = 0.0;
            for &k in screen {
                worst = worst.max(self.update(k));
                if !in_active[k] && self.is_interior(k) {
                    in_active[k] = true;
                    active.push(k);
                }
            }
            cycles += 1;
            if worst <= tol || cycles >= max_cycles {
                self.prune(active, &mut in_active);
                break;
            }
            cycles += self.cycle_active(active, tol, max_cycles - cycles);
            self.prune(active, &mut in_active);
            if cycles >= max_cycles {
                break;
            }
        }
        self.cycles += cycles;
    }

    /// Cycles over `active` until converged or `budget` cycles are spent;
    /// returns the cycles used.
    ///
    /// When the active set is smaller than the number of rows this runs the
    /// covariance method: the active gradients are updated through the cached
    /// Gram matrix and the residual is brought up to date once at the end.
    fn cycle_active(&mut self, active: &[usize], tol: f64, budget: usize) -> usize {
        let m = active.len();
        let mut cycles = 0;
        if m > self.x.n_rows() {
            loop {
                let mut worst: f64 = 0.0;
                for &k in active {
                    worst = worst.max(self.update(k));
                }
                cycles += 1;
                if worst <= tol || cycles >= budget {
                    return cycles;
                }
            }
        }

        let cols: Vec<&[f64]> = active.iter().map(|&k| self.x.column(k)).collect();
        let mut gram = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..i {
                let g = dot(cols[i], cols[j]);
                gram[i * m + j] = g;
                gram[j * m + i] = g;
            }
            gram[i * m + i] = self.x.col_sq_norms()[active[i]];
        }
        let mut grad: Vec<f64> = cols.iter().map(|c| dot(c, &self.resid)).collect();
        let start: Vec<f64> = active.iter().map(|&k| self.beta[k]).collect();
        loop {
            let mut worst: f64 = 0.0;
            for i in 0..m {
                let k = active[i];
                let sq = gram[i * m + i];
                if sq == 0.0 {
                    continue;
                }
                let old = self.beta[k];
                let (new, step) = coord_update(old, sq, grad[i], self.bounds.lower[k], self.bounds.upper[k]);
                if step == 0.0 {
                    continue;
                }
                for (g, h) in grad.iter_mut().zip(&gram[i * m..(i + 1) * m]) {
                    *g -= step * h;
                }
                self.beta[k] = new;
                (self.observer)(&UpdateEvent {
                    coordinate: k,
                    old,
                    new,
                });
                worst = worst.max(sq * step * step);
            }
            cycles += 1;
            if worst <= tol || cycles >= budget {
                break;
            }
        }
        for (i, col) in cols.iter().enumerate() {
            let moved = self.beta[active[i]] - start[i];
            if moved != 0.0 {
                axpy(-moved, col, &mut self.resid);
            }
        }
        cycles
    }

    fn prune(&self, active: &mut Vec<usize>, in_active: &mut [bool]) {
        active.retain(|&k| {
            let keep = self.is_interior(k);
            in_active[k] = keep;
            keep
        });
    }
}
