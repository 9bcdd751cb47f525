//! `polyls` command line.
//!
//! Exit codes: 0 on success, 1 on usage or input errors, 2 when the solver
//! stops without passing its KKT check.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polyls_core::polyhedron::Polyhedron;
use polyls_core::sparsify::{sparsify, sparsify_bounded, verify_local_uniqueness, ToleranceSet};
use polyls_core::synth::{gen_spike_truth, SimConfig, SpikeTruthConfig};
use polyls_core::{solve, Bounds, SolverConfig};

use crate::bench::{self, BenchOptions, BenchRecord, SolverKind};
use crate::io;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "polyls", version, about = "Polyhedron-constrained least squares")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a bounded-variable least-squares problem (NNLS by default).
    Solve(SolveArgs),
    /// Rewrite a representation x = Q w to bind as many constraints as possible.
    Sparsify(SparsifyArgs),
    /// Run a benchmark suite and write a CSV of results.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Design matrix CSV.
    #[arg(long)]
    pub x: PathBuf,
    /// Response vector CSV.
    #[arg(long)]
    pub y: PathBuf,
    /// Lower bound: a scalar for every coordinate or a vector CSV.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub lower: String,
    /// Upper bound: a scalar for every coordinate or a vector CSV.
    #[arg(long, default_value = "inf", allow_hyphen_values = true)]
    pub upper: String,
    #[arg(long, default_value_t = 1e-7)]
    pub kkt_tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub cd_tol: f64,
    /// Screen batch size (default min(n, p)).
    #[arg(long)]
    pub kappa: Option<usize>,
    /// Outer KKT rounds (default 10 p).
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Apply the sparsify post-pass to the solution.
    #[arg(long)]
    pub sparsify: bool,
    /// Where to write β (default standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolyhedronKind {
    Orthant,
    Box,
    /// Weights ≥ 0 summing to c.
    Simplex,
    /// Weights ≥ 0 summing to at most c.
    Isimplex,
}

#[derive(Debug, Args)]
pub struct SparsifyArgs {
    #[arg(long)]
    pub q: PathBuf,
    #[arg(long)]
    pub w: PathBuf,
    #[arg(long, value_enum)]
    pub polyhedron: PolyhedronKind,
    /// Simplex budget.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub lower: String,
    #[arg(long, default_value = "inf", allow_hyphen_values = true)]
    pub upper: String,
    #[arg(long, default_value_t = 1e-9)]
    pub binding_tol: f64,
    #[arg(long, default_value_t = 1e-9)]
    pub feas_tol: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(subcommand)]
    pub suite: Suite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum SolverName {
    Cd,
    CdSparsify,
    ProjectedGradient,
    Enumeration,
}

impl From<SolverName> for SolverKind {
    fn from(s: SolverName) -> Self {
        match s {
            SolverName::Cd => SolverKind::Cd,
            SolverName::CdSparsify => SolverKind::CdSparsify,
            SolverName::ProjectedGradient => SolverKind::ProjectedGradient,
            SolverName::Enumeration => SolverKind::Enumeration,
        }
    }
}

#[derive(Debug, Args)]
pub struct CommonBench {
    /// Comma-separated solver list.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [SolverName::Cd, SolverName::CdSparsify, SolverName::ProjectedGradient])]
    pub solvers: Vec<SolverName>,
    /// Record wall times as 0 so the CSV is reproducible byte for byte.
    #[arg(long)]
    pub no_timing: bool,
    #[arg(long, default_value_t = 1e-7)]
    pub kkt_tol: f64,
    /// Where to write the CSV (default standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Suite {
    /// Random sparse NNLS instances, one per mean on a grid over [-3σ, 3σ].
    Sim {
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 500)]
        p: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.2)]
        density: f64,
        #[command(flatten)]
        common: CommonBench,
    },
    /// Spike deconvolution of a `time,value` series, or of a synthetic one.
    Spike {
        /// `time,value` CSV; a synthetic spike train is used when absent.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 500)]
        p: usize,
        /// Synthetic series length.
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// Synthetic spike count.
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[arg(long, default_value_t = 0.01)]
        noise_sd: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2.0)]
        kernel_sd_multiplier: f64,
        #[command(flatten)]
        common: CommonBench,
    },
}

#[derive(Debug, thiserror::Error)]
enum Failure {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Core(#[from] polyls_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("writing output: {0}")]
    Write(#[from] std::io::Error),
    #[error("writing output: {0}")]
    Csv(#[from] csv::Error),
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let outcome = match cli.command {
        Command::Solve(a) => cmd_solve(a, stdout),
        Command::Sparsify(a) => cmd_sparsify(a, stdout),
        Command::Bench(a) => cmd_bench(a, stdout),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_INPUT
        }
    }
}

fn positive_tol(name: &str, v: f64) -> Result<(), Failure> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--{name} must be a positive number")))
    }
}

fn emit_vector(out: &Option<PathBuf>, v: &[f64], stdout: &mut dyn Write) -> Result<(), Failure> {
    match out {
        Some(path) => io::write_vector_file(path, v)?,
        None => io::write_vector(stdout, v)?,
    }
    Ok(())
}

fn cmd_solve(a: SolveArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    positive_tol("kkt-tol", a.kkt_tol)?;
    positive_tol("cd-tol", a.cd_tol)?;
    let x = io::read_matrix(&a.x)?;
    let y = io::read_vector(&a.y)?;
    let p = x.n_cols();
    let bounds = Bounds::new(io::read_bound(&a.lower, p)?, io::read_bound(&a.upper, p)?)?;
    let config = SolverConfig {
        kappa: a.kappa,
        kkt_tol: a.kkt_tol,
        cd_tol: a.cd_tol,
        max_iters: a.max_iters,
        ..SolverConfig::default()
    };

    let start = std::time::Instant::now();
    let result = solve(&x, &y, &bounds, &config)?;
    let beta = if a.sparsify {
        sparsify_bounded(&x, &bounds, &result.beta, &ToleranceSet::default())?.w
    } else {
        result.beta.clone()
    };
    let elapsed = start.elapsed().as_secs_f64();

    let fit = x.mul_vec(&beta);
    let objective = 0.5 * y.iter().zip(&fit).map(|(u, v)| (u - v) * (u - v)).sum::<f64>();
    emit_vector(&a.out, &beta, stdout)?;
    writeln!(
        stdout,
        "objective={} kkt={} positives={} time_s={elapsed}",
        io::fmt_num(objective),
        if result.kkt_passed { "pass" } else { "fail" },
        bench::count_positive(&beta)
    )?;
    Ok(if result.kkt_passed { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn cmd_sparsify(a: SparsifyArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    positive_tol("binding-tol", a.binding_tol)?;
    positive_tol("feas-tol", a.feas_tol)?;
    let q = io::read_matrix(&a.q)?;
    let w = io::read_vector(&a.w)?;
    let p = q.n_cols();
    if w.len() != p {
        return Err(Failure::Usage(format!(
            "w has {} entries but Q has {p} columns",
            w.len()
        )));
    }
    let polyhedron = match a.polyhedron {
        PolyhedronKind::Orthant => Polyhedron::orthant(p)?,
        PolyhedronKind::Box => Polyhedron::boxed(&io::read_bound(&a.lower, p)?, &io::read_bound(&a.upper, p)?)?,
        PolyhedronKind::Simplex => Polyhedron::simplex(p, a.c, true)?,
        PolyhedronKind::Isimplex => Polyhedron::simplex(p, a.c, false)?,
    };
    let tol = ToleranceSet {
        binding: a.binding_tol,
        feasibility: a.feas_tol,
        ..ToleranceSet::default()
    };
    let r = sparsify(&q, &polyhedron, &w, &tol)?;
    let unique = verify_local_uniqueness(&q, &polyhedron, &r);
    emit_vector(&a.out, &r.w, stdout)?;
    writeln!(
        stdout,
        "binding={} guarantee={} recon_err={} unique={unique}",
        r.binding.len(),
        r.guarantee,
        io::fmt_num(r.reconstruction_error)
    )?;
    Ok(EXIT_OK)
}

fn bench_options(common: &CommonBench) -> Result<BenchOptions, Failure> {
    positive_tol("kkt-tol", common.kkt_tol)?;
    let mut solvers: Vec<SolverKind> = common.solvers.iter().map(|&s| s.into()).collect();
    solvers.dedup();
    Ok(BenchOptions {
        solvers,
        solver: SolverConfig {
            kkt_tol: common.kkt_tol,
            ..SolverConfig::default()
        },
        timing: !common.no_timing,
        ..BenchOptions::default()
    })
}

fn emit_records(out: &Option<PathBuf>, records: &[BenchRecord], stdout: &mut dyn Write) -> Result<(), Failure> {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|source| io::Error::Io {
                path: path.clone(),
                source,
            })?;
            io::write_bench_csv(BufWriter::new(file), records)?;
        }
        None => io::write_bench_csv(&mut *stdout, records)?,
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs, stdout: &mut dyn Write) -> Result<i32, Failure> {
    match a.suite {
        Suite::Sim {
            n,
            p,
            seed,
            density,
            common,
        } => {
            let opts = bench_options(&common)?;
            let cfg = SimConfig {
                density,
                ..SimConfig::new(n, p, seed)
            };
            let records = bench::with_thread_cap(|| bench::run_sim(&cfg, &opts))?;
            emit_records(&common.out, &records, stdout)?;
        }
        Suite::Spike {
            data,
            p,
            n,
            k,
            noise_sd,
            seed,
            kernel_sd_multiplier,
            common,
        } => {
            let opts = bench_options(&common)?;
            let (instance, times, y) = match &data {
                Some(path) => {
                    let (t, v) = io::read_spike_csv(path)?;
                    ("spike_data".to_owned(), t, v)
                }
                None => {
                    let truth = gen_spike_truth(&SpikeTruthConfig {
                        kernel_sd_multiplier,
                        ..SpikeTruthConfig::new(n, p, k, noise_sd, seed)
                    })?;
                    (
                        format!("spike_synthetic_n{n}_p{p}_k{k}_seed{seed}"),
                        truth.times,
                        truth.y,
                    )
                }
            };
            let records = bench::run_spike(&instance, &times, &y, p, kernel_sd_multiplier, &opts)?;
            emit_records(&common.out, &records, stdout)?;
            if common.out.is_some() {
                for r in &records {
                    writeln!(
                        stdout,
                        "solver={} spikes={} kkt={}",
                        r.solver,
                        r.n_positive,
                        if r.kkt_passed { "pass" } else { "fail" }
                    )?;
                }
            }
        }
    }
    Ok(EXIT_OK)
}
