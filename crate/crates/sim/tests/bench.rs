use attractor_core::metrics::{confusion, mcc};
use attractor_core::sparsify::negative_magnitudes;
use attractor_core::{edges_of, select_threshold, solve, SolverOptions, ThresholdGrid};
use attractor_sim::bench::{log_linear_fit, write_results_csv, write_results_json};
use attractor_sim::datagen::Setup;
use attractor_sim::{
    make_instance, run_bench, sample_covariance, trace_convergence, BenchConfig, MeanPolicy, SetupSpec,
};

#[test]
fn easy_chain_is_recovered_exactly() {
    let mut cfg = BenchConfig::new(Setup::Chain { p: 10 }, vec![10_000]);
    cfg.replications = 3;
    cfg.seed = 11;
    let res = run_bench(&cfg).unwrap();
    assert_eq!(res.records.len(), 3);
    let agg = res.aggregate(10_000, "mcc").unwrap();
    assert_eq!(agg.mean, 1.0);
    assert!(res.records.iter().all(|r| r.error.is_none()));
}

#[test]
fn record_count_and_aggregates_are_consistent() {
    let mut cfg = BenchConfig::new(Setup::Star { p: 12, d: 4 }, vec![50, 100]);
    cfg.replications = 4;
    let res = run_bench(&cfg).unwrap();
    assert_eq!(res.records.len(), 8);
    for n in [50, 100] {
        let vals: Vec<f64> = res.records.iter().filter(|r| r.n == n).filter_map(|r| r.kl).collect();
        let a = res.aggregate(n, "kl").unwrap();
        assert_eq!(a.count, vals.len());
        assert_eq!(a.mean, vals.iter().sum::<f64>() / vals.len() as f64);
        assert_eq!(a.min, vals.iter().copied().fold(f64::INFINITY, f64::min));
    }
}

#[test]
fn reruns_are_bit_identical() {
    let mut cfg = BenchConfig::new(Setup::Random { p: 30, density: 0.05, exact_count: false }, vec![40]);
    cfg.replications = 2;
    cfg.seed = 5;
    let a = run_bench(&cfg).unwrap();
    let b = run_bench(&cfg).unwrap();
    cfg.threads = Some(1);
    let serial = run_bench(&cfg).unwrap();
    let key = |r: &attractor_sim::BenchRecord| (r.seed, r.mcc, r.spectral_error, r.kl, r.t_star, r.sweeps);
    assert_eq!(a.records.iter().map(key).collect::<Vec<_>>(), serial.records.iter().map(key).collect::<Vec<_>>());

    let dir = tempfile::tempdir().unwrap();
    for (i, res) in [&a, &b].into_iter().enumerate() {
        write_results_json(res, &dir.path().join(format!("r{i}.json"))).unwrap();
        write_results_csv(res, &dir.path().join(format!("r{i}.csv"))).unwrap();
    }
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("r0.json"), read("r1.json"));
    assert_eq!(read("r0.csv"), read("r1.csv"));
}

#[test]
fn adding_sample_sizes_keeps_existing_records() {
    let mut cfg = BenchConfig::new(Setup::Chain { p: 8 }, vec![30]);
    cfg.replications = 2;
    let a = run_bench(&cfg).unwrap();
    cfg.n_values = vec![20, 30];
    let b = run_bench(&cfg).unwrap();
    let strip = |r: &attractor_sim::BenchRecord| (r.seed, r.mcc, r.kl, r.t_star);
    let old: Vec<_> = a.records.iter().map(strip).collect();
    let new: Vec<_> = b.records.iter().filter(|r| r.n == 30).map(strip).collect();
    assert_eq!(old, new);
}

#[test]
fn decay_has_no_mcc() {
    let mut cfg = BenchConfig::new(Setup::Decay { p: 10 }, vec![50]);
    cfg.replications = 2;
    let res = run_bench(&cfg).unwrap();
    assert!(res.records.iter().all(|r| r.mcc.is_none() && r.kl.is_some()));
    assert!(res.aggregate(50, "mcc").is_none());
}

#[test]
fn failures_are_recorded_not_fatal() {
    // n = 1 makes every pair of columns collinear
    let mut cfg = BenchConfig::new(Setup::Chain { p: 5 }, vec![1]);
    cfg.replications = 2;
    let res = run_bench(&cfg).unwrap();
    assert!(res.records.iter().all(|r| r.error.is_some()));
}

#[test]
fn config_round_trips_through_toml_and_json() {
    let text = r#"
        n_values = [100, 400]
        replications = 5
        seed = 3
        [setup]
        kind = "random"
        p = 50
    "#;
    let cfg: BenchConfig = toml::from_str(text).unwrap();
    assert_eq!(cfg.setup, Setup::Random { p: 50, density: 0.01, exact_count: false });
    assert_eq!(cfg.quantiles, ThresholdGrid::standard().quantiles());
    let back: BenchConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn dense_trace_crosses_checkpoints_in_order() {
    let inst = make_instance(&SetupSpec { setup: Setup::Dense { p: 32 }, n: 500 }, 1).unwrap();
    let s = sample_covariance(&inst.train, MeanPolicy::KnownZero).unwrap();
    let levels = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];
    let opts = SolverOptions::default().with_kkt_tol(1e-8).with_max_sweeps(5000);
    let t = trace_convergence(&s, &opts, &levels).unwrap();
    assert!(t.converged);
    let sweeps: Vec<usize> = t.crossings.iter().map(|c| c.sweep.unwrap()).collect();
    assert!(sweeps.windows(2).all(|w| w[0] <= w[1]));
    assert!(t.points.windows(2).all(|w| w[1].objective <= w[0].objective + 1e-10 && w[1].sweep > w[0].sweep));
}

#[test]
fn larger_chain_is_not_faster() {
    let opts = SolverOptions::default().with_kkt_tol(1e-6).with_max_sweeps(5000);
    let time = |p: usize| {
        let inst = make_instance(&SetupSpec { setup: Setup::Chain { p }, n: 40 }, 2).unwrap();
        let s = sample_covariance(&inst.train, MeanPolicy::KnownZero).unwrap();
        let t = trace_convergence(&s, &opts, &[1e-6]).unwrap();
        t.crossings[0].wall_time.unwrap()
    };
    assert!(time(128) >= time(64));
}

#[test]
fn log_residual_decreases_linearly() {
    let inst = make_instance(&SetupSpec { setup: Setup::Chain { p: 32 }, n: 40 }, 3).unwrap();
    let s = sample_covariance(&inst.train, MeanPolicy::KnownZero).unwrap();
    let t = trace_convergence(&s, &SolverOptions::default().with_kkt_tol(1e-10).with_max_sweeps(5000), &[]).unwrap();
    let (slope, r2) = log_linear_fit(&t).unwrap();
    assert!(slope < 0.0 && r2 >= 0.8, "slope {slope}, r2 {r2}");
}

#[test]
fn selection_beats_unthresholded_support_on_chain() {
    let grid = ThresholdGrid::standard().with(0.0).unwrap();
    let opts = SolverOptions::default();
    let mut wins = 0;
    for seed in 0..50 {
        let inst = make_instance(&SetupSpec { setup: Setup::Chain { p: 20 }, n: 200 }, seed).unwrap();
        let s_train = sample_covariance(&inst.train, MeanPolicy::KnownZero).unwrap();
        let s_val = sample_covariance(&inst.validation, MeanPolicy::KnownZero).unwrap();
        let est = solve(&s_train, &opts).unwrap();
        let sel = select_threshold(&est.omega, &s_val, &grid, &s_train, &opts).unwrap();
        let score = |e| mcc(&confusion(e, &inst.edges_star).unwrap());
        if score(&sel.edges) >= score(&edges_of(&est.omega, 0.0)) {
            wins += 1;
        }
    }
    assert!(wins >= 40, "{wins}/50");
}

#[test]
fn single_edge_support_is_recoverable() {
    let opts = SolverOptions::default();
    let mut hits = 0;
    for seed in 0..50 {
        let spec = SetupSpec { setup: Setup::SingleEdge { p: 50, rho: 0.6 }, n: 500 };
        let inst = make_instance(&spec, seed).unwrap();
        let s = sample_covariance(&inst.train, MeanPolicy::KnownZero).unwrap();
        let omega = solve(&s, &opts).unwrap().omega;
        let mut levels = vec![0.0];
        levels.extend(negative_magnitudes(&omega));
        if levels.iter().any(|&t| edges_of(&omega, t) == inst.edges_star) {
            hits += 1;
        }
    }
    assert!(hits >= 45, "{hits}/50");
}
