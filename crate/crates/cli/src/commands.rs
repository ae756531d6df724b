//! The subcommands as library functions. Each writes its files into an output directory
//! together with a `manifest.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use attractor_core::metrics::{confusion, mcc};
use attractor_core::{
    check_existence, edges_of, select_threshold, solve, EdgeSet, Existence, PrecisionEstimate, SolveError,
    SolverOptions, SolverWarning, SymMatrix, ThresholdGrid,
};
use attractor_sim::bench::{write_results_csv, write_results_json, write_timings_csv};
use attractor_sim::{make_instance, run_bench, BenchConfig, BenchResult, Setup, SetupSpec};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::graph::{to_dot, GraphFormat, WeightSource};
use crate::io::{self, name, CovarianceSpec, EdgeList, Layout};
use crate::manifest::{FileDigest, RunManifest};

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct CovarianceArgs {
    /// Whether input files hold observations or a covariance matrix
    #[arg(long, value_enum, default_value_t = Layout::Covariance)]
    pub layout: Layout,
    /// Use the uncentered second moment for data-layout input
    #[arg(long)]
    pub known_zero_mean: bool,
    /// Rescale the covariance to unit diagonal before solving
    #[arg(long)]
    pub correlation: bool,
}

impl CovarianceArgs {
    fn spec(&self) -> CovarianceSpec {
        CovarianceSpec { layout: self.layout, known_zero_mean: self.known_zero_mean, correlation: self.correlation }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1e-6)]
    pub kkt_tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_sweeps: usize,
}

impl SolverArgs {
    pub fn options(&self) -> SolverOptions<f64> {
        SolverOptions::default().with_kkt_tol(self.kkt_tol).with_max_sweeps(self.max_sweeps)
    }
}

impl Default for SolverArgs {
    fn default() -> Self {
        SolverArgs { kkt_tol: 1e-6, max_sweeps: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SolveArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub cov: CovarianceArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SparsifyArgs {
    /// Estimate to threshold, as written by `solve`
    #[arg(long)]
    pub omega: PathBuf,
    /// Training input the estimate was fitted on
    #[arg(long)]
    pub train: PathBuf,
    /// Held-out input scoring each threshold
    #[arg(long)]
    pub val: PathBuf,
    #[command(flatten)]
    pub cov: CovarianceArgs,
    /// Comma-separated quantile levels in [0, 1]; 0 keeps every negative entry
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// True edges (`edges.json` layout) to score the selection against
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SetupKind {
    Chain,
    Grid,
    Grid3,
    Random,
    Star,
    Decay,
    Dense,
    SingleEdge,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub setup: SetupKind,
    /// Dimension (all setups except the lattices)
    #[arg(long)]
    pub p: Option<usize>,
    /// Side length of the lattice setups
    #[arg(long)]
    pub side: Option<usize>,
    /// Edge probability of the random setup
    #[arg(long, default_value_t = 0.01)]
    pub density: f64,
    /// Place exactly round(density · p(p−1)/2) random edges
    #[arg(long)]
    pub exact_count: bool,
    /// Hub degree of the star setup
    #[arg(long)]
    pub d: Option<usize>,
    /// Correlation of the single-edge setup
    #[arg(long, default_value_t = 0.6)]
    pub rho: f64,
    /// Rows in each of the training and validation samples
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

impl SimulateArgs {
    pub fn to_setup(&self) -> Result<Setup, CliError> {
        let need = |v: Option<usize>, flag: &str| {
            v.ok_or_else(|| CliError::Invalid(format!("setup {:?} requires --{flag}", self.setup)))
        };
        let setup = match self.setup {
            SetupKind::Chain => Setup::Chain { p: need(self.p, "p")? },
            SetupKind::Grid => Setup::Grid2d { side: need(self.side, "side")? },
            SetupKind::Grid3 => Setup::Grid3d { side: need(self.side, "side")? },
            SetupKind::Random => {
                Setup::Random { p: need(self.p, "p")?, density: self.density, exact_count: self.exact_count }
            }
            SetupKind::Star => Setup::Star { p: need(self.p, "p")?, d: need(self.d, "d")? },
            SetupKind::Decay => Setup::Decay { p: need(self.p, "p")? },
            SetupKind::Dense => Setup::Dense { p: need(self.p, "p")? },
            SetupKind::SingleEdge => Setup::SingleEdge { p: need(self.p, "p")?, rho: self.rho },
        };
        setup.validate().map_err(|e| CliError::Invalid(e.to_string()))?;
        Ok(setup)
    }
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct BenchArgs {
    /// TOML or JSON benchmark configuration
    #[arg(long)]
    pub config: PathBuf,
    /// Worker threads; overrides the configuration and the environment
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ExportGraphArgs {
    #[arg(long)]
    pub edges: PathBuf,
    #[arg(long, value_enum, default_value_t = WeightSource::PartialCorrelation)]
    pub weights: WeightSource,
    #[arg(long, value_enum, default_value_t = GraphFormat::Dot)]
    pub format: GraphFormat,
    #[arg(long, default_value = "graph.dot")]
    pub output: PathBuf,
}

/// What a successful command produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    pub converged: bool,
    pub message: String,
}

impl Outcome {
    /// `0`, or `3` when the solver stopped at the sweep limit and the best iterate was written.
    pub fn exit_code(&self) -> u8 {
        if self.converged {
            0
        } else {
            3
        }
    }
}

fn existence_message(e: &Existence, labels: Option<&[String]>) -> String {
    match *e {
        Existence::PerfectCorrelation(j, k) => {
            format!("variables {} and {} are perfectly positively correlated", name(labels, j), name(labels, k))
        }
        Existence::NonpositiveDiagonal(j) => format!("variable {} has nonpositive variance", name(labels, j)),
        Existence::Ok => "ok".to_string(),
    }
}

fn solve_error(e: SolveError<f64>, labels: Option<&[String]>) -> CliError {
    match e {
        SolveError::ExistenceViolation(ex) => CliError::Existence(existence_message(&ex, labels)),
        other => CliError::Solver(other.to_string()),
    }
}

fn log_warnings(warnings: &[SolverWarning], labels: Option<&[String]>) {
    for w in warnings {
        let SolverWarning::NearPerfectCorrelation { j, k, correlation } = w;
        log::warn!(
            "variables {} and {} have correlation {correlation:.10}; the estimate is ill-conditioned",
            name(labels, *j),
            name(labels, *k)
        );
    }
}

/// Solves, falling back to the best iterate at the sweep limit. The flag is `false` then.
fn solve_or_best(
    s: &SymMatrix<f64>,
    opts: &SolverOptions<f64>,
    labels: Option<&[String]>,
) -> Result<(PrecisionEstimate<f64>, bool), CliError> {
    let existence = check_existence(s, opts.perfect_corr_tol);
    if existence != Existence::Ok {
        return Err(CliError::Existence(existence_message(&existence, labels)));
    }
    let (est, converged) = match solve(s, opts) {
        Ok(est) => (est, true),
        Err(SolveError::SweepLimitReached { best }) => {
            log::warn!("no convergence within {} sweeps (kkt residual {:e})", opts.max_sweeps, best.kkt_eps);
            (*best, false)
        }
        Err(e) => return Err(solve_error(e, labels)),
    };
    log_warnings(&est.warnings, labels);
    Ok((est, converged))
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn finish(
    mut manifest: RunManifest,
    dir: &Path,
    inputs: &[&Path],
    outputs: Vec<PathBuf>,
    started: Instant,
) -> Result<Vec<PathBuf>, CliError> {
    manifest.inputs = inputs.iter().map(|p| FileDigest::of(p)).collect::<Result<_, _>>()?;
    manifest.outputs = outputs.iter().map(|p| FileDigest::of(p)).collect::<Result<_, _>>()?;
    manifest.elapsed_seconds = started.elapsed().as_secs_f64();
    let path = dir.join("manifest.json");
    io::write_json(&path, &manifest)?;
    let mut all = outputs;
    all.push(path);
    Ok(all)
}

/// Fits `Ω̂` and writes `omega.csv`, `sigma.csv` and `edges.json`.
pub fn cmd_solve(args: &SolveArgs) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let opts = args.solver.options();
    let (s, labels) = io::load_covariance(&args.input, args.cov.spec())?;
    let (est, converged) = solve_or_best(&s, &opts, labels.as_deref())?;

    create_dir(&args.out_dir)?;
    let omega_path = args.out_dir.join("omega.csv");
    let sigma_path = args.out_dir.join("sigma.csv");
    let edges_path = args.out_dir.join("edges.json");
    io::write_symmetric(&omega_path, &est.omega, labels.as_deref())?;
    io::write_symmetric(&sigma_path, &est.sigma, labels.as_deref())?;
    let edges = EdgeList::from_omega(&est.omega, &edges_of(&est.omega, 0.0), labels.as_deref());
    io::write_json(&edges_path, &edges)?;

    let mut manifest = RunManifest::new("solve", args);
    manifest.summary = serde_json::json!({
        "p": s.dim(),
        "sweeps": est.sweeps,
        "kkt_eps": est.kkt_eps,
        "objective": est.objective,
        "converged": converged,
        "n_edges": edges.edges.len(),
    });
    let outputs = finish(manifest, &args.out_dir, &[&args.input], vec![omega_path, sigma_path, edges_path], started)?;
    let message = format!(
        "p = {}, {} edges, {} sweeps, kkt residual {:.3e}{}",
        s.dim(),
        edges.edges.len(),
        est.sweeps,
        est.kkt_eps,
        if converged { "" } else { " (not converged)" }
    );
    Ok(Outcome { outputs, converged, message })
}

/// Thresholds a fitted estimate at each grid level, refits on the training covariance and
/// keeps the level with the smallest validation loss.
pub fn cmd_sparsify(args: &SparsifyArgs) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let opts = args.solver.options();
    let (omega, labels) = io::read_symmetric(&args.omega)?;
    let (s_train, _) = io::load_covariance(&args.train, args.cov.spec())?;
    let (s_val, _) = io::load_covariance(&args.val, args.cov.spec())?;
    let grid = match &args.grid {
        Some(q) => ThresholdGrid::new(q.clone())
            .ok_or_else(|| CliError::Invalid("grid quantiles must be nonempty and lie in [0, 1]".into()))?,
        None => ThresholdGrid::standard(),
    };
    let existence = check_existence(&s_train, opts.perfect_corr_tol);
    if existence != Existence::Ok {
        return Err(CliError::Existence(existence_message(&existence, labels.as_deref())));
    }
    let sel = select_threshold(&omega, &s_val, &grid, &s_train, &opts).map_err(|e| CliError::Solver(e.to_string()))?;
    let selected = edges_of(&sel.refit_omega, 0.0);

    let truth_score = match &args.truth {
        Some(path) => {
            let truth = io::read_edges(path)?.edge_set();
            let c = confusion(&selected, &truth).map_err(|e| CliError::input(path, e))?;
            Some(mcc(&c))
        }
        None => None,
    };

    create_dir(&args.out_dir)?;
    let refit_path = args.out_dir.join("omega_refit.csv");
    let edges_path = args.out_dir.join("edges.json");
    let losses_path = args.out_dir.join("losses.csv");
    io::write_symmetric(&refit_path, &sel.refit_omega, labels.as_deref())?;
    io::write_json(&edges_path, &EdgeList::from_omega(&sel.refit_omega, &selected, labels.as_deref()))?;
    write_losses(&losses_path, &sel)?;

    let mut manifest = RunManifest::new("sparsify", args);
    manifest.summary = serde_json::json!({
        "t_star": sel.t_star,
        "q_star": sel.q_star,
        "n_edges": selected.len(),
        "mcc": truth_score,
    });
    let mut inputs: Vec<&Path> = vec![&args.omega, &args.train, &args.val];
    if let Some(t) = &args.truth {
        inputs.push(t);
    }
    let outputs = finish(manifest, &args.out_dir, &inputs, vec![refit_path, edges_path, losses_path], started)?;
    let mut message = format!("t* = {:.6} (q = {}), {} edges", sel.t_star, sel.q_star, selected.len());
    if let Some(m) = truth_score {
        write!(message, ", MCC vs truth {m:.4}").unwrap();
    }
    Ok(Outcome { outputs, converged: true, message })
}

fn write_losses(path: &Path, sel: &attractor_core::ThresholdSelection<f64>) -> Result<(), CliError> {
    let err = |e: csv::Error| CliError::input(path, e);
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["quantile", "threshold", "n_edges", "loss", "selected", "error"]).map_err(err)?;
    for g in &sel.per_t {
        let chosen = g.quantile == sel.q_star;
        w.write_record([
            g.quantile.to_string(),
            io::format_real(g.threshold),
            g.n_edges.to_string(),
            g.loss.map(io::format_real).unwrap_or_default(),
            chosen.to_string(),
            g.error.clone().unwrap_or_default(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Draws a synthetic instance: population matrices, true edges and train/validation samples.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let setup = args.to_setup()?;
    let inst =
        make_instance(&SetupSpec { setup, n: args.n }, args.seed).map_err(|e| CliError::Invalid(e.to_string()))?;

    create_dir(&args.out_dir)?;
    let d = &args.out_dir;
    let paths = ["sigma_star.csv", "omega_star.csv", "edges_star.json", "train.csv", "val.csv"].map(|f| d.join(f));
    io::write_symmetric(&paths[0], &inst.sigma_star, None)?;
    io::write_symmetric(&paths[1], &inst.omega_star, None)?;
    io::write_json(&paths[2], &EdgeList::from_omega(&inst.omega_star, &inst.edges_star, None))?;
    io::write_data(&paths[3], &inst.train, None)?;
    io::write_data(&paths[4], &inst.validation, None)?;

    let mut manifest = RunManifest::new("simulate", args);
    manifest.seed = Some(args.seed);
    manifest.summary = serde_json::json!({ "p": inst.omega_star.dim(), "n_edges": inst.edges_star.len() });
    let message = format!("p = {}, {} true edges, n = {}", inst.omega_star.dim(), inst.edges_star.len(), args.n);
    let outputs = finish(manifest, d, &[], paths.to_vec(), started)?;
    Ok(Outcome { outputs, converged: true, message })
}

pub fn read_bench_config(path: &Path) -> Result<BenchConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let cfg: BenchConfig = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| CliError::input(path, e))?
    } else {
        toml::from_str(&text).map_err(|e| CliError::input(path, e))?
    };
    cfg.validate().map_err(|e| CliError::input(path, e))?;
    Ok(cfg)
}

/// Runs the replication harness and writes `results.json`, `results.csv`, `summary.txt` and
/// `timings.csv` (the only file that varies between identical runs).
pub fn cmd_bench(args: &BenchArgs) -> Result<Outcome, CliError> {
    let started = Instant::now();
    let mut cfg = read_bench_config(&args.config)?;
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    let result = run_bench(&cfg).map_err(|e| CliError::Invalid(e.to_string()))?;

    create_dir(&args.out_dir)?;
    let d = &args.out_dir;
    let paths = ["results.json", "results.csv", "summary.txt", "timings.csv"].map(|f| d.join(f));
    write_results_json(&result, &paths[0]).map_err(|e| CliError::input(&paths[0], e))?;
    write_results_csv(&result, &paths[1]).map_err(|e| CliError::input(&paths[1], e))?;
    let summary = summary_text(&result);
    fs::write(&paths[2], &summary).map_err(|e| CliError::io(&paths[2], e))?;
    write_timings_csv(&result, &paths[3]).map_err(|e| CliError::input(&paths[3], e))?;

    let failed = result.records.iter().filter(|r| r.error.is_some()).count();
    let mut manifest = RunManifest::new("bench", args);
    manifest.seed = Some(cfg.seed);
    manifest.summary = serde_json::json!({ "records": result.records.len(), "failed": failed });
    let outputs = finish(manifest, d, &[&args.config], paths.to_vec(), started)?;
    Ok(Outcome { outputs, converged: true, message: summary })
}

/// Human-readable aggregate table.
pub fn summary_text(result: &BenchResult) -> String {
    let cfg = &result.config;
    let mut out = String::new();
    writeln!(
        out,
        "setup {} (p = {}), {} replications per n, base seed {}",
        cfg.setup.name(),
        cfg.setup.dim(),
        cfg.replications,
        cfg.seed
    )
    .unwrap();
    for &n in &cfg.n_values {
        writeln!(out, "\nn = {n}").unwrap();
        let failed = result.records.iter().filter(|r| r.n == n && r.error.is_some()).count();
        if failed > 0 {
            writeln!(out, "  {failed} replication(s) failed").unwrap();
        }
        writeln!(out, "  {:<15} {:>12} {:>12} {:>12} {:>12}", "metric", "mean", "median", "min", "max").unwrap();
        for metric in ["mcc", "spectral_error", "kl", "t_star", "sweeps"] {
            match result.aggregate(n, metric) {
                Some(a) => writeln!(
                    out,
                    "  {:<15} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
                    metric, a.mean, a.median, a.min, a.max
                )
                .unwrap(),
                None if metric == "mcc" && !cfg.setup.has_sparse_truth() => {
                    writeln!(out, "  {metric:<15} not reported: the true precision matrix is not sparse").unwrap()
                }
                None => writeln!(out, "  {metric:<15} no successful replications").unwrap(),
            }
        }
    }
    out
}

/// Renders an edge list as an undirected graph file.
pub fn cmd_export_graph(args: &ExportGraphArgs) -> Result<Outcome, CliError> {
    let list = io::read_edges(&args.edges)?;
    let text = match args.format {
        GraphFormat::Dot => to_dot(&list, args.weights),
    };
    if let Some(parent) = args.output.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(&args.output, text).map_err(|e| CliError::io(&args.output, e))?;
    Ok(Outcome {
        outputs: vec![args.output.clone()],
        converged: true,
        message: format!("{} nodes, {} edges", list.p, list.edges.len()),
    })
}

/// The edge set listed in an `edges.json` file.
pub fn read_edge_set(path: &Path) -> Result<EdgeSet, CliError> {
    Ok(io::read_edges(path)?.edge_set())
}
