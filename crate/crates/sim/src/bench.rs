//! Seeded replication harness: generate an instance, estimate, select a threshold on the
//! validation set, refit, and score against the ground truth.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use attractor_core::metrics::{confusion, kl_divergence, mcc, spectral_error};
use attractor_core::solver::{solve_observed, SweepRecord};
use attractor_core::sparsify::{keep_quantile, negative_magnitudes};
use attractor_core::{edges_of, select_threshold, SolveError, SolveObserver, SolverOptions, SymMatrix, ThresholdGrid};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::datagen::{make_instance, sample_covariance, MeanPolicy, Setup, SetupSpec};

/// Environment variable capping the worker count when `threads` is unset.
pub const THREADS_ENV: &str = "ATTRACTOR_THREADS";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid bench configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub setup: Setup,
    pub n_values: Vec<usize>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_quantiles")]
    pub quantiles: Vec<f64>,
    /// Add the oracle level that keeps exactly `|E*|` entries to the grid.
    #[serde(default = "default_true")]
    pub oracle_quantile: bool,
    #[serde(default = "default_kkt_tol")]
    pub kkt_tol: f64,
    #[serde(default = "default_max_sweeps")]
    pub max_sweeps: usize,
    #[serde(default)]
    pub mean_policy: MeanPolicy,
    /// Worker count; falls back to `ATTRACTOR_THREADS`, then to rayon's default.
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_replications() -> usize {
    50
}
fn default_quantiles() -> Vec<f64> {
    ThresholdGrid::standard().quantiles().to_vec()
}
fn default_true() -> bool {
    true
}
fn default_kkt_tol() -> f64 {
    1e-6
}
fn default_max_sweeps() -> usize {
    500
}

impl BenchConfig {
    pub fn new(setup: Setup, n_values: Vec<usize>) -> Self {
        Self {
            setup,
            n_values,
            replications: default_replications(),
            seed: 0,
            quantiles: default_quantiles(),
            oracle_quantile: true,
            kkt_tol: default_kkt_tol(),
            max_sweeps: default_max_sweeps(),
            mean_policy: MeanPolicy::KnownZero,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: &str| Err(BenchError::Config(m.to_string()));
        if self.replications == 0 {
            return bad("replications must be at least 1");
        }
        if self.n_values.is_empty() || self.n_values.contains(&0) {
            return bad("n_values must be a non-empty list of positive sizes");
        }
        if ThresholdGrid::new(self.quantiles.clone()).is_none_or(|g| g.quantiles().is_empty()) {
            return bad("quantiles must be a non-empty list in [0, 1]");
        }
        if !(self.kkt_tol > 0.0) || self.max_sweeps == 0 {
            return bad("kkt_tol must be positive and max_sweeps at least 1");
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1");
        }
        self.setup.validate().map_err(|e| BenchError::Config(e.to_string()))
    }

    fn solver_options(&self) -> SolverOptions<f64> {
        SolverOptions::default().with_kkt_tol(self.kkt_tol).with_max_sweeps(self.max_sweeps)
    }
}

/// Seed of one `(setup, n, replication)` tuple, independent of the other tuples in the run.
pub fn replication_seed(base: u64, setup: &Setup, n: usize, replication: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(setup.name().as_bytes());
    h.update((setup.dim() as u64).to_le_bytes());
    h.update((n as u64).to_le_bytes());
    h.update((replication as u64).to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub setup: String,
    pub p: usize,
    pub n: usize,
    pub replication: usize,
    pub seed: u64,
    /// `None` for non-sparse truths and failed replications.
    pub mcc: Option<f64>,
    /// MCC of the unthresholded estimate's support.
    pub mcc_initial: Option<f64>,
    pub spectral_error: Option<f64>,
    pub kl: Option<f64>,
    pub t_star: Option<f64>,
    pub q_star: Option<f64>,
    pub n_edges: Option<usize>,
    pub n_edges_true: usize,
    pub sweeps: Option<usize>,
    pub converged: Option<bool>,
    pub error: Option<String>,
    /// Solver time of the initial estimate; kept out of the serialized results so that
    /// seeded runs are byte-identical.
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub metric: String,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub config: BenchConfig,
    pub records: Vec<BenchRecord>,
    pub aggregates: Vec<Aggregate>,
}

impl BenchResult {
    pub fn aggregate(&self, n: usize, metric: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.n == n && a.metric == metric)
    }
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchResult, BenchError> {
    cfg.validate()?;
    let threads = cfg.threads.or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok())).unwrap_or(0);
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| BenchError::Config(e.to_string()))?;

    let tuples: Vec<(usize, usize)> =
        cfg.n_values.iter().flat_map(|&n| (0..cfg.replications).map(move |r| (n, r))).collect();
    let mut records: Vec<BenchRecord> =
        pool.install(|| tuples.par_iter().map(|&(n, r)| run_replication(cfg, n, r)).collect());
    records.sort_by_key(|rec| (rec.n, rec.replication));
    let aggregates = aggregate(&cfg.n_values, &records);
    Ok(BenchResult { config: cfg.clone(), records, aggregates })
}

fn run_replication(cfg: &BenchConfig, n: usize, replication: usize) -> BenchRecord {
    let seed = replication_seed(cfg.seed, &cfg.setup, n, replication);
    let mut rec = BenchRecord {
        setup: cfg.setup.name().to_string(),
        p: cfg.setup.dim(),
        n,
        replication,
        seed,
        mcc: None,
        mcc_initial: None,
        spectral_error: None,
        kl: None,
        t_star: None,
        q_star: None,
        n_edges: None,
        n_edges_true: 0,
        sweeps: None,
        converged: None,
        error: None,
        wall_time: Duration::ZERO,
    };
    if let Err(e) = fill_replication(cfg, n, seed, &mut rec) {
        log::warn!("replication {replication} (n = {n}) failed: {e}");
        rec.error = Some(e);
    }
    rec
}

fn fill_replication(cfg: &BenchConfig, n: usize, seed: u64, rec: &mut BenchRecord) -> Result<(), String> {
    let spec = SetupSpec { setup: cfg.setup.clone(), n };
    let inst = make_instance(&spec, seed).map_err(|e| e.to_string())?;
    rec.n_edges_true = inst.edges_star.len();
    let s_train = sample_covariance(&inst.train, cfg.mean_policy).map_err(|e| e.to_string())?;
    let s_val = sample_covariance(&inst.validation, cfg.mean_policy).map_err(|e| e.to_string())?;
    let opts = cfg.solver_options();

    let start = Instant::now();
    let est = match attractor_core::solve(&s_train, &opts) {
        Ok(est) => est,
        Err(SolveError::SweepLimitReached { best }) => *best,
        Err(e) => return Err(e.to_string()),
    };
    rec.wall_time = start.elapsed();
    rec.sweeps = Some(est.sweeps);
    rec.converged = Some(est.converged);

    let mut grid = ThresholdGrid::new(cfg.quantiles.clone()).expect("validated grid");
    if cfg.oracle_quantile && cfg.setup.has_sparse_truth() {
        let m = negative_magnitudes(&est.omega).len();
        grid = grid.with(keep_quantile(m, inst.edges_star.len())).expect("quantile in [0, 1]");
    }
    let sel = select_threshold(&est.omega, &s_val, &grid, &s_train, &opts).map_err(|e| e.to_string())?;
    rec.t_star = Some(sel.t_star);
    rec.q_star = Some(sel.q_star);
    rec.n_edges = Some(sel.edges.len());

    if cfg.setup.has_sparse_truth() {
        let score = |e| confusion(e, &inst.edges_star).map(|c| mcc(&c)).map_err(|e| e.to_string());
        rec.mcc = Some(score(&sel.edges)?);
        rec.mcc_initial = Some(score(&edges_of(&est.omega, 0.0))?);
    }
    rec.spectral_error = Some(spectral_error(&inst.omega_star, &sel.refit_omega).map_err(|e| e.to_string())?);
    rec.kl = Some(kl_divergence(&inst.omega_star, &inst.sigma_star, &sel.refit_omega).map_err(|e| e.to_string())?);
    Ok(())
}

const METRICS: [&str; 5] = ["mcc", "spectral_error", "kl", "t_star", "sweeps"];

fn metric_value(rec: &BenchRecord, metric: &str) -> Option<f64> {
    match metric {
        "mcc" => rec.mcc,
        "spectral_error" => rec.spectral_error,
        "kl" => rec.kl,
        "t_star" => rec.t_star,
        "sweeps" => rec.sweeps.map(|s| s as f64),
        _ => None,
    }
}

fn aggregate(n_values: &[usize], records: &[BenchRecord]) -> Vec<Aggregate> {
    let mut out = Vec::new();
    let mut ns: Vec<usize> = n_values.to_vec();
    ns.sort_unstable();
    ns.dedup();
    for n in ns {
        for metric in METRICS {
            let values: Vec<f64> =
                records.iter().filter(|r| r.n == n).filter_map(|r| metric_value(r, metric)).collect();
            if let Some(a) = summarize(&values) {
                out.push(Aggregate { n, metric: metric.to_string(), ..a });
            }
        }
    }
    out
}

/// Mean, median, min and max; `None` for an empty slice.
pub fn summarize(values: &[f64]) -> Option<Aggregate> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    let median = if k % 2 == 1 { v[k / 2] } else { 0.5 * (v[k / 2 - 1] + v[k / 2]) };
    Some(Aggregate {
        n: 0,
        metric: String::new(),
        count: k,
        mean: v.iter().sum::<f64>() / k as f64,
        median,
        min: v[0],
        max: v[k - 1],
    })
}

pub fn write_results_json(result: &BenchResult, path: &Path) -> Result<(), BenchError> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, result)?;
    f.write_all(b"\n")?;
    Ok(())
}

pub fn write_results_csv(result: &BenchResult, path: &Path) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    for rec in &result.records {
        w.serialize(rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Solver wall times, one row per replication.
pub fn write_timings_csv(result: &BenchResult, path: &Path) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["n", "replication", "seed", "solve_seconds"])?;
    for rec in &result.records {
        w.write_record([
            rec.n.to_string(),
            rec.replication.to_string(),
            rec.seed.to_string(),
            format!("{:.6}", rec.wall_time.as_secs_f64()),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub sweep: usize,
    pub wall_time: f64,
    pub kkt_eps: f64,
    pub objective: f64,
}

/// First sweep at which the KKT residual dropped to `level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub level: f64,
    pub sweep: Option<usize>,
    pub wall_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub points: Vec<TracePoint>,
    pub crossings: Vec<Crossing>,
    pub converged: bool,
}

struct TraceRecorder {
    start: Instant,
    points: Vec<TracePoint>,
}

impl SolveObserver<f64> for TraceRecorder {
    fn after_sweep(&mut self, r: &SweepRecord<f64>, _omega: &SymMatrix<f64>, _sigma: &SymMatrix<f64>) {
        self.points.push(TracePoint {
            sweep: r.sweep,
            wall_time: self.start.elapsed().as_secs_f64(),
            kkt_eps: r.kkt_eps,
            objective: r.objective,
        });
    }
}

/// Runs the solver to `opts.kkt_tol` and records every sweep and the first crossing of
/// each checkpoint level.
pub fn trace_convergence(
    s: &SymMatrix<f64>,
    opts: &SolverOptions<f64>,
    checkpoints: &[f64],
) -> Result<ConvergenceTrace, SolveError<f64>> {
    let mut rec = TraceRecorder { start: Instant::now(), points: Vec::new() };
    let converged = match solve_observed(s, opts, &mut rec) {
        Ok(_) => true,
        Err(SolveError::SweepLimitReached { .. }) => false,
        Err(e) => return Err(e),
    };
    let crossings = checkpoints
        .iter()
        .map(|&level| {
            let hit = rec.points.iter().find(|p| p.kkt_eps <= level);
            Crossing { level, sweep: hit.map(|p| p.sweep), wall_time: hit.map(|p| p.wall_time) }
        })
        .collect();
    Ok(ConvergenceTrace { points: rec.points, crossings, converged })
}

/// Least-squares line through `(sweep, ln kkt_eps)` over the points with positive residual:
/// `(slope, r²)`. `None` with fewer than two usable points.
pub fn log_linear_fit(trace: &ConvergenceTrace) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> =
        trace.points.iter().filter(|p| p.kkt_eps > 0.0).map(|p| (p.sweep as f64, p.kkt_eps.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some((slope, r2))
}

/// Per-n medians of a metric, in ascending n.
pub fn medians(result: &BenchResult, metric: &str) -> BTreeMap<usize, f64> {
    result.aggregates.iter().filter(|a| a.metric == metric).map(|a| (a.n, a.median)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_statistics() {
        let a = summarize(&[3.0, 1.0, 2.0, 10.0]).unwrap();
        assert_eq!((a.count, a.mean, a.median, a.min, a.max), (4, 4.0, 2.5, 1.0, 10.0));
        assert!(summarize(&[]).is_none());
    }

    #[test]
    fn seeds_depend_on_every_tuple_component() {
        let s = Setup::Chain { p: 10 };
        let base = replication_seed(1, &s, 100, 0);
        assert_ne!(base, replication_seed(2, &s, 100, 0));
        assert_ne!(base, replication_seed(1, &s, 200, 0));
        assert_ne!(base, replication_seed(1, &s, 100, 1));
        assert_ne!(base, replication_seed(1, &Setup::Chain { p: 11 }, 100, 0));
        assert_eq!(base, replication_seed(1, &s, 100, 0));
    }

    #[test]
    fn config_validation() {
        let mut cfg = BenchConfig::new(Setup::Chain { p: 5 }, vec![10]);
        assert!(cfg.validate().is_ok());
        cfg.replications = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = BenchConfig::new(Setup::Chain { p: 5 }, vec![]);
        assert!(cfg.validate().is_err());
        cfg.n_values = vec![10];
        cfg.quantiles = vec![1.5];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn trace_of_identity() {
        let t = trace_convergence(&SymMatrix::identity(4), &SolverOptions::default(), &[1e-1, 1e-8]).unwrap();
        assert!(t.converged);
        assert_eq!(t.points.len(), 1);
        assert_eq!(t.points[0].kkt_eps, 0.0);
        assert!(t.crossings.iter().all(|c| c.sweep == Some(1)));
    }
}
