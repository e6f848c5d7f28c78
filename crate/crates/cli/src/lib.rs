//! `qot` command-line front end.

pub mod config;
pub mod error;
pub mod io;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use qot_core::checks::{run_suites, suites, Scale};
use qot_core::entropy::{entropy_flow, FlowOptions};
use qot_core::geodesic::{solve_w2_direct, solve_w2a_conic, Backend, ConicOptions, DirectOptions};
use qot_core::grid::Grid;
use qot_core::herm::{DensityMatrix, TangentVector};
use qot_core::lindblad::LindbladBasis;
use qot_core::metric::{MetricKind, MetricOperator};
use qot_core::random;
use qot_core::spatial::{solve_spatial_direct, solve_spatial_geodesic, spatial_entropy_flow, MatrixField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::JobConfig;
use crate::error::{CliError, CliResult};
use crate::io::{
    field_records, parse_basis, read_density, read_field, read_tangent, write_json, write_trace, MatrixRecord,
    TraceRow,
};

#[derive(Debug, Parser)]
#[command(name = "qot", version, about = "Matrix-valued optimal transport, geodesics and entropy flows")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transport distance between two density matrices (JSON report).
    Distance(JobArgs),
    /// Distance together with the discrete geodesic.
    Geodesic(JobArgs),
    /// Entropy gradient flow from --marginal0 (CSV trace).
    Flow(JobArgs),
    /// Metric inner product of tangent vectors at --marginal0.
    Innerprod(InnerArgs),
    /// Transport distance between two density fields on [0, 1].
    SpatialDistance(JobArgs),
    /// Entropy gradient flow of a density field (CSV trace).
    SpatialFlow(JobArgs),
    /// Run the seeded property suites.
    Check(CheckArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct JobArgs {
    /// Initial density (matrix record, or field file for spatial commands). Random from --seed if omitted.
    #[arg(long)]
    pub marginal0: Option<PathBuf>,
    /// Final density. Random from --seed if omitted.
    #[arg(long)]
    pub marginal1: Option<PathBuf>,
    /// `pauli`, `gellmann:<n>` or a JSON file of matrix records. Defaults to gellmann:<dim>.
    #[arg(long)]
    pub basis: Option<String>,
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<MetricKind>,
    #[arg(long, value_parser = parse_backend)]
    pub backend: Option<Backend>,
    /// Number of time steps T of the discrete path.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Weight of the matrix part against the spatial part.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "tfinal")]
    pub t_final: Option<f64>,
    /// Solver stopping tolerance.
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Keep every k-th flow step in the trace.
    #[arg(long)]
    pub record_every: Option<usize>,
    /// Grid points for random fields.
    #[arg(long = "grid")]
    pub grid_points: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path; stdout if omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON job configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct InnerArgs {
    #[command(flatten)]
    pub job: JobArgs,
    /// First tangent vector (traceless Hermitian record). Random from --seed if omitted.
    #[arg(long)]
    pub tangent: Option<PathBuf>,
    /// Second tangent vector; defaults to the first.
    #[arg(long)]
    pub tangent2: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CheckArgs {
    /// Comma-separated suite names.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
    /// Smaller instance counts.
    #[arg(long)]
    pub quick: bool,
    /// List suites and exit.
    #[arg(long)]
    pub list: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<MetricKind, String> {
    s.parse().map_err(|e: qot_core::Error| e.to_string())
}

fn parse_backend(s: &str) -> Result<Backend, String> {
    s.parse().map_err(|e: qot_core::Error| e.to_string())
}

impl JobArgs {
    fn config(&self, command: &str) -> CliResult<JobConfig> {
        let flags = JobConfig {
            command: None,
            basis: self.basis.clone(),
            kind: self.kind,
            backend: self.backend,
            steps: self.steps,
            gamma: self.gamma,
            dt: self.dt,
            t_final: self.t_final,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            record_every: self.record_every,
            grid_points: self.grid_points,
            seed: self.seed,
            marginal0: self.marginal0.clone(),
            marginal1: self.marginal1.clone(),
            out: self.out.clone(),
        };
        let cfg = match &self.config {
            Some(p) => JobConfig::load(p)?.merged(flags),
            None => flags,
        };
        cfg.validate(command)?;
        Ok(cfg)
    }
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> CliResult<i32> {
    match cli.command {
        Command::Distance(a) => cmd_distance(&a.config("distance")?, false),
        Command::Geodesic(a) => cmd_distance(&a.config("geodesic")?, true),
        Command::Flow(a) => cmd_flow(&a.config("flow")?),
        Command::Innerprod(a) => cmd_innerprod(&a.job.config("innerprod")?, a.tangent.as_deref(), a.tangent2.as_deref()),
        Command::SpatialDistance(a) => cmd_spatial_distance(&a.config("spatial-distance")?),
        Command::SpatialFlow(a) => cmd_spatial_flow(&a.config("spatial-flow")?),
        Command::Check(a) => cmd_check(&a),
    }
}

fn rng(cfg: &JobConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed())
}

fn basis_for(cfg: &JobConfig, dim: Option<usize>) -> CliResult<LindbladBasis> {
    match (&cfg.basis, dim) {
        (Some(spec), _) => parse_basis(spec),
        (None, Some(n)) => Ok(LindbladBasis::gell_mann(n)?),
        (None, None) => Ok(LindbladBasis::pauli()),
    }
}

/// Marginals from files, or drawn from the seed when absent.
fn load_pair(cfg: &JobConfig) -> CliResult<(LindbladBasis, DensityMatrix, DensityMatrix)> {
    let r0 = cfg.marginal0.as_deref().map(read_density).transpose()?;
    let r1 = cfg.marginal1.as_deref().map(read_density).transpose()?;
    let dim = r0.as_ref().or(r1.as_ref()).map(|r| r.dim());
    let basis = basis_for(cfg, dim)?;
    let mut rng = rng(cfg);
    let r0 = r0.unwrap_or_else(|| random::density(basis.dim(), &mut rng));
    let r1 = r1.unwrap_or_else(|| random::density(basis.dim(), &mut rng));
    Ok((basis, r0, r1))
}

fn load_field_pair(cfg: &JobConfig) -> CliResult<(LindbladBasis, MatrixField, MatrixField)> {
    let f0 = cfg.marginal0.as_deref().map(read_field).transpose()?;
    let f1 = cfg.marginal1.as_deref().map(read_field).transpose()?;
    let known = f0.as_ref().or(f1.as_ref());
    let basis = basis_for(cfg, known.map(|f| f.dim()))?;
    let grid = match known {
        Some(f) => f.grid().clone(),
        None => Grid::new(cfg.grid_points())?,
    };
    let mut rng = rng(cfg);
    let f0 = match f0 {
        Some(f) => f,
        None => random::density_field(&grid, basis.dim(), &mut rng)?,
    };
    let f1 = match f1 {
        Some(f) => f,
        None => random::density_field(&grid, basis.dim(), &mut rng)?,
    };
    Ok((basis, f0, f1))
}

fn conic_options(cfg: &JobConfig) -> ConicOptions {
    let mut o = ConicOptions::default();
    if let Some(t) = cfg.tolerance {
        o.tolerance = t;
    }
    if let Some(m) = cfg.max_iterations {
        o.max_iterations = m;
    }
    o
}

fn direct_options(cfg: &JobConfig) -> DirectOptions {
    let mut o = DirectOptions::default();
    if let Some(t) = cfg.tolerance {
        o.gradient_tolerance = t;
    }
    if let Some(m) = cfg.max_iterations {
        o.max_iterations = m;
    }
    o
}

fn conic_kind_check(cfg: &JobConfig) -> CliResult<()> {
    if cfg.backend() == Backend::Conic && cfg.kind() != MetricKind::AntiCommutator {
        return Err(CliError::Usage("the conic backend handles only --kind anticomm".into()));
    }
    Ok(())
}

fn not_converged(converged: bool, iterations: usize) -> i32 {
    if converged {
        0
    } else {
        eprintln!("qot: solver stopped after {iterations} iterations without converging");
        3
    }
}

#[derive(Serialize)]
struct GeodesicOutput<'a, R: Serialize> {
    report: &'a R,
    times: Vec<f64>,
    path: Vec<MatrixRecord>,
}

fn cmd_distance(cfg: &JobConfig, with_path: bool) -> CliResult<i32> {
    conic_kind_check(cfg)?;
    let (basis, r0, r1) = load_pair(cfg)?;
    let steps = cfg.steps();
    info!("{} backend, {} geometry, n = {}, T = {steps}", cfg.backend(), cfg.kind(), basis.dim());
    let (path, report) = match cfg.backend() {
        Backend::Conic => solve_w2a_conic(&basis, &r0, &r1, steps, &conic_options(cfg))?,
        Backend::Direct => solve_w2_direct(&basis, &r0, &r1, steps, cfg.kind(), &direct_options(cfg))?,
    };
    info!("distance {:.12} in {} iterations", report.distance, report.iterations);
    if with_path {
        let out = GeodesicOutput {
            report: &report,
            times: (0..=steps).map(|j| j as f64 / steps as f64).collect(),
            path: path.densities().iter().map(|r| MatrixRecord::from_matrix(r.as_matrix())).collect(),
        };
        write_json(cfg.out.as_deref(), &out)?;
    } else {
        write_json(cfg.out.as_deref(), &report)?;
    }
    Ok(not_converged(report.converged, report.iterations))
}

fn flow_options(cfg: &JobConfig) -> FlowOptions {
    let o = FlowOptions::new(cfg.t_final(), cfg.dt());
    match cfg.record_every {
        Some(k) => o.with_record_every(k),
        None => o,
    }
}

fn cmd_flow(cfg: &JobConfig) -> CliResult<i32> {
    let (basis, r0, _) = load_pair(cfg)?;
    let trace = entropy_flow(&basis, &r0, cfg.kind(), &flow_options(cfg))?;
    if trace.halvings() > 0 {
        warn!("step size halved {} times to keep the state positive with entropy non-decreasing", trace.halvings());
    }
    let dist = trace.distances_to_uniform();
    let rows: Vec<TraceRow> = (0..trace.times().len())
        .map(|i| TraceRow {
            t: trace.times()[i],
            entropy: trace.entropies()[i],
            trace_drift: trace.trace_drifts()[i],
            min_eig: trace.min_eigenvalues()[i],
            dist_to_uniform: dist[i],
        })
        .collect();
    info!("{} steps, final entropy {:.12}", trace.steps(), trace.entropies().last().copied().unwrap_or(f64::NAN));
    write_trace(cfg.out.as_deref(), &rows)?;
    Ok(0)
}

#[derive(Serialize)]
struct InnerOutput {
    kind: MetricKind,
    inner: f64,
    norm: f64,
    /// Potential λ solving the Poisson equation for the first tangent vector.
    potential: MatrixRecord,
}

fn cmd_innerprod(cfg: &JobConfig, t1: Option<&Path>, t2: Option<&Path>) -> CliResult<i32> {
    let (basis, rho, _) = load_pair(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed() ^ 0x5eed);
    let d1 = match t1 {
        Some(p) => read_tangent(p)?,
        None => random::traceless_hermitian(basis.dim(), &mut rng),
    };
    let d2: TangentVector = match t2 {
        Some(p) => read_tangent(p)?,
        None => d1.clone(),
    };
    let op = MetricOperator::new(&basis, &rho, cfg.kind())?;
    let out = InnerOutput {
        kind: cfg.kind(),
        inner: op.inner(&d1, &d2)?,
        norm: op.inner(&d1, &d1)?.sqrt(),
        potential: MatrixRecord::from_matrix(op.solve(&d1)?.lambda().as_matrix()),
    };
    write_json(cfg.out.as_deref(), &out)?;
    Ok(0)
}

fn cmd_spatial_distance(cfg: &JobConfig) -> CliResult<i32> {
    conic_kind_check(cfg)?;
    let (basis, f0, f1) = load_field_pair(cfg)?;
    let (steps, gamma) = (cfg.steps(), cfg.gamma());
    info!(
        "{} backend, {} geometry, n = {}, G = {}, T = {steps}, gamma = {gamma}",
        cfg.backend(),
        cfg.kind(),
        basis.dim(),
        f0.grid().points()
    );
    let (_, report) = match cfg.backend() {
        Backend::Conic => solve_spatial_geodesic(&basis, &f0, &f1, gamma, steps, &conic_options(cfg))?,
        Backend::Direct => solve_spatial_direct(&basis, &f0, &f1, gamma, steps, cfg.kind(), &direct_options(cfg))?,
    };
    write_json(cfg.out.as_deref(), &report)?;
    Ok(not_converged(report.converged, report.iterations))
}

fn cmd_spatial_flow(cfg: &JobConfig) -> CliResult<i32> {
    let (basis, f0, _) = load_field_pair(cfg)?;
    let trace = spatial_entropy_flow(&basis, &f0, cfg.gamma(), cfg.kind(), &flow_options(cfg))?;
    if trace.halvings() > 0 {
        warn!("step size halved {} times to keep the field positive with entropy non-decreasing", trace.halvings());
    }
    let dist = trace.distances_to_uniform();
    let rows: Vec<TraceRow> = (0..trace.times().len())
        .map(|i| TraceRow {
            t: trace.times()[i],
            entropy: trace.entropies()[i],
            trace_drift: trace.mass_drifts()[i],
            min_eig: trace.min_eigenvalues()[i],
            dist_to_uniform: dist[i],
        })
        .collect();
    write_trace(cfg.out.as_deref(), &rows)?;
    Ok(0)
}

/// Writes a field as a JSON array of records.
pub fn write_field(path: Option<&Path>, field: &MatrixField) -> CliResult<()> {
    write_json(path, &field_records(field))
}

#[derive(Serialize)]
struct CheckOutput<'a> {
    seed: u64,
    scale: Scale,
    passed: bool,
    outcomes: &'a [qot_core::checks::CheckOutcome],
}

fn cmd_check(args: &CheckArgs) -> CliResult<i32> {
    if args.list {
        for s in suites() {
            println!("{:<24} {}", s.name, s.description);
        }
        return Ok(0);
    }
    let scale = if args.quick { Scale::Quick } else { Scale::Full };
    let outcomes = run_suites(&args.only, args.seed, scale).map_err(CliError::Usage)?;
    for o in &outcomes {
        eprintln!(
            "{} {}/{}: {:.3e} (tolerance {:.1e})",
            if o.passed { "PASS" } else { "FAIL" },
            o.suite,
            o.check,
            o.value,
            o.tolerance
        );
    }
    let passed = outcomes.iter().all(|o| o.passed);
    write_json(
        args.out.as_deref(),
        &CheckOutput {
            seed: args.seed,
            scale,
            passed,
            outcomes: &outcomes,
        },
    )?;
    Ok(if passed { 0 } else { 1 })
}
