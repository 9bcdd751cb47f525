//! Benchmark suites: the simulated NNLS study and spike deconvolution.

use std::fmt;
use std::time::Instant;

use polyls_core::baseline::{enumerate_faces, projected_gradient, PgConfig, MAX_ENUMERATION_VARS};
use polyls_core::solver::{gradient, kkt_check, violations};
use polyls_core::sparsify::{sparsify_bounded, SparsifyResult, ToleranceSet};
use polyls_core::synth::{build_spike_matrix, gen_sim_instance, normalize_times, SimConfig, SpikeConfig, SpikeDesign};
use polyls_core::{solve, Bounds, DenseMatrix, SolveResult, SolverConfig};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolverKind {
    Cd,
    /// Coordinate descent followed by the sparsify post-pass.
    CdSparsify,
    ProjectedGradient,
    Enumeration,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Cd => "cd",
            Self::CdSparsify => "cd_sparsify",
            Self::ProjectedGradient => "projected_gradient",
            Self::Enumeration => "enumeration",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub instance: String,
    pub solver: SolverKind,
    pub wall_time_s: f64,
    pub objective: f64,
    pub n_positive: usize,
    pub kkt_passed: bool,
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub solvers: Vec<SolverKind>,
    pub solver: SolverConfig,
    pub pg: PgConfig,
    /// When false every wall time is recorded as 0 so output is reproducible
    /// byte for byte.
    pub timing: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            solvers: vec![SolverKind::Cd, SolverKind::CdSparsify, SolverKind::ProjectedGradient],
            solver: SolverConfig::default(),
            pg: PgConfig::default(),
            timing: true,
        }
    }
}

/// Entries above `1e-9 · max|β|` in magnitude.
pub fn count_positive(beta: &[f64]) -> usize {
    let top = beta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-9 * top;
    beta.iter().filter(|v| v.abs() > tol).count()
}

/// Independent KKT check of any candidate `β`.
pub fn kkt_holds(x: &DenseMatrix, y: &[f64], bounds: &Bounds, beta: &[f64], kkt_tol: f64) -> bool {
    let fit = x.mul_vec(beta);
    let r: Vec<f64> = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
    let delta = violations(&gradient(x, &r), beta, bounds);
    kkt_check(&delta, x, y, kkt_tol).passed
}

fn objective(x: &DenseMatrix, y: &[f64], beta: &[f64]) -> f64 {
    let fit = x.mul_vec(beta);
    0.5 * y.iter().zip(&fit).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

/// Runs every requested solver on one NNLS/BVLS instance.
pub fn run_instance(
    instance: &str,
    x: &DenseMatrix,
    y: &[f64],
    bounds: &Bounds,
    opts: &BenchOptions,
) -> polyls_core::Result<Vec<BenchRecord>> {
    let mut out = Vec::with_capacity(opts.solvers.len());
    for &solver in &opts.solvers {
        let start = Instant::now();
        let (beta, kkt) = match solver {
            SolverKind::Cd => {
                let r = solve(x, y, bounds, &opts.solver)?;
                (r.beta, r.kkt_passed)
            }
            SolverKind::CdSparsify => {
                let r = solve(x, y, bounds, &opts.solver)?;
                let s = sparsify_bounded(x, bounds, &r.beta, &ToleranceSet::default())?;
                (s.w, r.kkt_passed)
            }
            SolverKind::ProjectedGradient => (projected_gradient(x, y, bounds, &opts.pg)?.beta, false),
            SolverKind::Enumeration => (enumerate_faces(x, y, bounds)?.beta, false),
        };
        let elapsed = if opts.timing {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        };
        let kkt_passed = match solver {
            SolverKind::Cd | SolverKind::CdSparsify => kkt,
            _ => kkt_holds(x, y, bounds, &beta, opts.solver.kkt_tol),
        };
        out.push(BenchRecord {
            instance: instance.to_owned(),
            solver,
            wall_time_s: elapsed,
            objective: objective(x, y, &beta),
            n_positive: count_positive(&beta),
            kkt_passed,
        });
    }
    Ok(out)
}

fn check_solvers(p: usize, opts: &BenchOptions) -> polyls_core::Result<()> {
    if p > MAX_ENUMERATION_VARS && opts.solvers.contains(&SolverKind::Enumeration) {
        return Err(polyls_core::Error::TooManyVariables {
            p,
            max: MAX_ENUMERATION_VARS,
        });
    }
    Ok(())
}

/// One NNLS instance per grid mean, run in parallel and reported in grid
/// order.
pub fn run_sim(cfg: &SimConfig, opts: &BenchOptions) -> polyls_core::Result<Vec<BenchRecord>> {
    check_solvers(cfg.p, opts)?;
    let bounds = Bounds::nonnegative(cfg.p);
    let per_instance: Vec<Vec<BenchRecord>> = cfg
        .mu_grid
        .par_iter()
        .enumerate()
        .map(|(k, &mu)| {
            let (x, y) = gen_sim_instance(cfg, mu)?;
            let id = format!("sim_n{}_p{}_seed{}_mu{:02}", cfg.n, cfg.p, cfg.seed, k);
            run_instance(&id, &x, &y, &bounds, opts)
        })
        .collect::<polyls_core::Result<_>>()?;
    Ok(per_instance.into_iter().flatten().collect())
}

#[derive(Debug, Clone)]
pub struct Deconvolution {
    pub design: SpikeDesign,
    pub fit: SolveResult,
    pub sparse: SparsifyResult,
    /// Positive entries of the sparsified coefficients.
    pub n_spikes: usize,
    pub wall_time_s: f64,
}

/// NNLS fit of a spike train on a `grid_size` grid, followed by the
/// sparsify post-pass. `times` are raw and get normalized to `[0, 1]`.
pub fn deconvolve(
    times: &[f64],
    y: &[f64],
    grid_size: usize,
    sd_multiplier: f64,
    solver: &SolverConfig,
) -> polyls_core::Result<Deconvolution> {
    let start = Instant::now();
    let design = build_spike_matrix(&SpikeConfig {
        times: normalize_times(times)?,
        grid_size,
        kernel_sd_multiplier: sd_multiplier,
    })?;
    let bounds = Bounds::nonnegative(grid_size);
    let fit = solve(&design.x, y, &bounds, solver)?;
    let sparse = sparsify_bounded(&design.x, &bounds, &fit.beta, &ToleranceSet::default())?;
    let n_spikes = count_positive(&sparse.w);
    Ok(Deconvolution {
        design,
        fit,
        sparse,
        n_spikes,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Spike-suite records for one series.
pub fn run_spike(
    instance: &str,
    times: &[f64],
    y: &[f64],
    grid_size: usize,
    sd_multiplier: f64,
    opts: &BenchOptions,
) -> polyls_core::Result<Vec<BenchRecord>> {
    check_solvers(grid_size, opts)?;
    let design = build_spike_matrix(&SpikeConfig {
        times: normalize_times(times)?,
        grid_size,
        kernel_sd_multiplier: sd_multiplier,
    })?;
    run_instance(instance, &design.x, y, &Bounds::nonnegative(grid_size), opts)
}

/// Runs `f` on a pool capped by `POLYLS_THREADS` when set.
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let threads = std::env::var("POLYLS_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .unwrap_or(0);
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}
