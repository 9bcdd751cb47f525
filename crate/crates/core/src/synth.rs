//! Instance generators: sparse random NNLS problems and Gaussian-kernel spike
//! deconvolution designs.
//!
//! Everything is seeded through ChaCha8, so equal configurations produce
//! bit-identical data on every platform.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{invalid, Result};
use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub p: usize,
    /// Probability that an entry of `X` is kept (non-zero).
    pub density: f64,
    pub mu_grid: Vec<f64>,
    pub sigma: f64,
    pub seed: u64,
}

impl SimConfig {
    /// Density 0.2, `σ = 1`, and 20 response means evenly spaced on `[-3σ, 3σ]`.
    pub fn new(n: usize, p: usize, seed: u64) -> Self {
        Self {
            n,
            p,
            density: 0.2,
            mu_grid: mu_grid(1.0, 20),
            sigma: 1.0,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(invalid("density", "must lie in (0, 1]"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(invalid("sigma", "must be positive"));
        }
        Ok(())
    }
}

/// `points` evenly spaced values on `[-3σ, 3σ]`.
pub fn mu_grid(sigma: f64, points: usize) -> Vec<f64> {
    linspace(-3.0 * sigma, 3.0 * sigma, points)
}

fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..points)
            .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
            .collect(),
    }
}

/// `X_ij ~ Unif(0,1)` kept with probability `density`, `y_i ~ N(μ, σ²)`.
///
/// `mu` must be an entry of `cfg.mu_grid`; its position selects the random
/// stream, so instances for different means are independent.
pub fn gen_sim_instance(cfg: &SimConfig, mu: f64) -> Result<(DenseMatrix, Vec<f64>)> {
    cfg.validate()?;
    let stream = cfg
        .mu_grid
        .iter()
        .position(|&m| m == mu)
        .ok_or_else(|| invalid("mu", "not on the configured grid"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream as u64);

    let mut values = Vec::with_capacity(cfg.n * cfg.p);
    for _ in 0..cfg.n * cfg.p {
        let v: f64 = rng.random();
        let keep = rng.random::<f64>() < cfg.density;
        values.push(if keep { v } else { 0.0 });
    }
    let x = DenseMatrix::new(cfg.n, cfg.p, values)?;
    let normal = Normal::new(mu, cfg.sigma).map_err(|_| invalid("sigma", "must be positive"))?;
    let y = (0..cfg.n).map(|_| normal.sample(&mut rng)).collect();
    Ok((x, y))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeConfig {
    /// Observation times, ascending, normalized to `[0, 1]`.
    pub times: Vec<f64>,
    pub grid_size: usize,
    /// Kernel sd as a multiple of the median gap between observation times.
    pub kernel_sd_multiplier: f64,
}

impl SpikeConfig {
    pub fn new(times: Vec<f64>, grid_size: usize) -> Self {
        Self {
            times,
            grid_size,
            kernel_sd_multiplier: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpikeDesign {
    pub x: DenseMatrix,
    /// Candidate spike locations, evenly spaced on `[0, 1]`.
    pub tau: Vec<f64>,
    pub sd: f64,
}

/// `X_ij = φ_sd(t_i - τ_j)` with `φ_sd` the centered Gaussian density.
pub fn build_spike_matrix(cfg: &SpikeConfig) -> Result<SpikeDesign> {
    let t = &cfg.times;
    if cfg.grid_size == 0 {
        return Err(invalid("grid_size", "must be at least 1"));
    }
    if t.len() < 2 {
        return Err(invalid("times", "need at least two observation times"));
    }
    if t.iter().any(|v| !v.is_finite()) || t.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("times", "must be finite and ascending"));
    }
    if !(cfg.kernel_sd_multiplier > 0.0) {
        return Err(invalid("kernel_sd_multiplier", "must be positive"));
    }
    let mut gaps: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let sd = cfg.kernel_sd_multiplier * median(&mut gaps);
    if !(sd > 0.0) {
        return Err(invalid("times", "median time gap is zero"));
    }
    let tau = linspace(0.0, 1.0, cfg.grid_size);
    let norm = 1.0 / (sd * libm::sqrt(2.0 * core::f64::consts::PI));
    let mut values = Vec::with_capacity(t.len() * tau.len());
    for &tj in &tau {
        values.extend(t.iter().map(|&ti| {
            let z = (ti - tj) / sd;
            norm * libm::exp(-0.5 * z * z)
        }));
    }
    Ok(SpikeDesign {
        x: DenseMatrix::new(t.len(), tau.len(), values)?,
        tau,
        sd,
    })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Maps ascending raw times affinely onto `[0, 1]`.
pub fn normalize_times(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.len() < 2 {
        return Err(invalid("times", "need at least two observation times"));
    }
    if raw.iter().any(|v| !v.is_finite()) || raw.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("times", "must be finite and ascending"));
    }
    let (lo, hi) = (raw[0], raw[raw.len() - 1]);
    if hi == lo {
        return Err(invalid("times", "all observation times are equal"));
    }
    Ok(raw.iter().map(|&v| (v - lo) / (hi - lo)).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTruthConfig {
    pub n: usize,
    pub grid_size: usize,
    pub k_spikes: usize,
    pub noise_sd: f64,
    pub seed: u64,
    pub kernel_sd_multiplier: f64,
}

impl SpikeTruthConfig {
    pub fn new(n: usize, grid_size: usize, k_spikes: usize, noise_sd: f64, seed: u64) -> Self {
        Self {
            n,
            grid_size,
            k_spikes,
            noise_sd,
            seed,
            kernel_sd_multiplier: 2.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpikeTruth {
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    pub beta: Vec<f64>,
    /// Grid indices of the true spikes, ascending.
    pub support: Vec<usize>,
    pub design: SpikeDesign,
}

/// `k_spikes` spikes with amplitudes `Unif(0.5, 2)` at distinct random grid
/// points, observed at `n` evenly spaced times with Gaussian noise.
pub fn gen_spike_truth(cfg: &SpikeTruthConfig) -> Result<SpikeTruth> {
    if cfg.k_spikes > cfg.grid_size {
        return Err(invalid("k_spikes", "exceeds the grid size"));
    }
    if !(cfg.noise_sd >= 0.0 && cfg.noise_sd.is_finite()) {
        return Err(invalid("noise_sd", "must be finite and non-negative"));
    }
    let times = linspace(0.0, 1.0, cfg.n);
    let design = build_spike_matrix(&SpikeConfig {
        times: times.clone(),
        grid_size: cfg.grid_size,
        kernel_sd_multiplier: cfg.kernel_sd_multiplier,
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut support = index::sample(&mut rng, cfg.grid_size, cfg.k_spikes).into_vec();
    support.sort_unstable();
    let mut beta = vec![0.0; cfg.grid_size];
    for &j in &support {
        beta[j] = rng.random_range(0.5..2.0);
    }
    let mut y = design.x.mul_vec(&beta);
    if cfg.noise_sd > 0.0 {
        let noise = Normal::new(0.0, cfg.noise_sd).map_err(|_| invalid("noise_sd", "invalid"))?;
        y.iter_mut().for_each(|v| *v += noise.sample(&mut rng));
    }
    Ok(SpikeTruth {
        times,
        y,
        beta,
        support,
        design,
    })
}

/// Number of true spikes with an estimated entry above `threshold` within
/// `window` grid cells.
pub fn count_recovered(truth: &[usize], estimate: &[f64], threshold: f64, window: usize) -> usize {
    truth
        .iter()
        .filter(|&&j| {
            let lo = j.saturating_sub(window);
            let hi = (j + window).min(estimate.len().saturating_sub(1));
            (lo..=hi).any(|i| estimate[i] > threshold)
        })
        .count()
}
