use csfuse::detectors::{CopulaFamily, DetectorKind};
use csfuse::harness::{
    calibrate_threshold, collect_scores, emit, roc_from_scores, run_bench, run_bounds, run_calibrate, run_roc,
    DetectorConfig, ExperimentConfig, Plan, RocCurve,
};
use csfuse::rng::rng_from;
use csfuse::scenarios::{Hypothesis, ScenarioId, ScenarioParams, ScenarioSpec};
use rand_distr::{Distribution, StandardNormal};

fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(
        ScenarioSpec::new(ScenarioId::Case2, 50, ScenarioParams::default()),
        vec![
            DetectorConfig::new(DetectorKind::CompressedGa).with_c_r(&[0.2, 0.5]),
            DetectorConfig::new(DetectorKind::Product),
            DetectorConfig::new(DetectorKind::CompressedCov).with_c_r(&[0.2]).with_t(&[5]),
        ],
    );
    cfg.trials = 200;
    cfg.seed = 42;
    cfg
}

fn csv_bytes(curves: &[RocCurve]) -> Vec<u8> {
    let mut out = Vec::new();
    emit::roc_csv(&mut out, curves).unwrap();
    out
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn roc_is_deterministic_across_runs_and_thread_counts() {
    let cfg = small_config();
    let a = csv_bytes(&in_pool(1, || run_roc(&cfg)).unwrap());
    let b = csv_bytes(&in_pool(1, || run_roc(&cfg)).unwrap());
    let c = csv_bytes(&in_pool(3, || run_roc(&cfg)).unwrap());
    assert_eq!(a, b);
    assert_eq!(a, c);
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(a, csv_bytes(&run_roc(&other).unwrap()));
}

#[test]
fn curves_are_well_formed() {
    let curves = run_roc(&small_config()).unwrap();
    assert_eq!(curves.len(), 4);
    for c in &curves {
        assert!((0.0..=1.0).contains(&c.auc));
        assert!(c.points.windows(2).all(|w| w[0].threshold <= w[1].threshold));
        assert!(c.points.windows(2).all(|w| w[1].pf <= w[0].pf && w[1].pd <= w[0].pd));
        assert!(c.points.iter().all(|p| (0.0..=1.0).contains(&p.pf) && (0.0..=1.0).contains(&p.pd)));
    }
}

fn full_scale(detectors: Vec<DetectorConfig>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(ScenarioSpec::new(ScenarioId::Case2, 1000, ScenarioParams::default()), detectors);
    cfg.fixed_projection = true;
    cfg
}

#[test]
fn dependence_aware_detectors_beat_chance_at_full_scale() {
    let cfg = full_scale(vec![
        DetectorConfig::new(DetectorKind::CompressedGa).with_c_r(&[0.1]),
        DetectorConfig::new(DetectorKind::Copula(CopulaFamily::Gaussian)),
    ]);
    for c in run_roc(&cfg).unwrap() {
        for p in &c.points {
            assert!(p.pd >= p.pf - 0.05, "{} at pf={} has pd={}", c.detector, p.pf, p.pd);
        }
    }
}

#[test]
fn product_roc_crosses_chance_because_h1_scores_are_tighter() {
    // The negative dependence under H1 shrinks the spread of the product
    // score, so its upper H0 tail outruns H1 at small false-alarm rates.
    let cfg = full_scale(vec![DetectorConfig::new(DetectorKind::Product)]);
    let scores = collect_scores(&Plan::new(&cfg).unwrap(), cfg.trials, &[Hypothesis::H0, Hypothesis::H1]).unwrap();
    let sd = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
    };
    assert!(sd(&scores[0][0]) > 2.0 * sd(&scores[0][1]));
    let curve = &run_roc(&cfg).unwrap()[0];
    assert!(curve.auc > 0.7);
    assert!(curve.points.iter().any(|p| p.pd < p.pf - 0.05));
}

#[test]
fn pure_noise_scores_sit_on_the_chance_line() {
    let mut rng = rng_from(3);
    let mut draw = || -> Vec<f64> { (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect() };
    let (h0, h1) = (draw(), draw());
    let (_, auc) = roc_from_scores(&h0, &h1, 512);
    assert!((auc - 0.5).abs() <= 0.05, "AUC {auc}");
}

#[test]
fn fixed_projection_changes_only_the_projection() {
    let mut cfg = small_config();
    cfg.detectors.truncate(2);
    let per_trial = run_roc(&cfg).unwrap();
    cfg.fixed_projection = true;
    let fixed = run_roc(&cfg).unwrap();
    // u:product never sees a projection.
    assert_eq!(per_trial[2], fixed[2]);
    assert_ne!(per_trial[0].points, fixed[0].points);
}

#[test]
fn incompatible_configs_fail_before_any_trial() {
    let mut cfg = small_config();
    cfg.detectors = vec![DetectorConfig::new(DetectorKind::CompressedCov).with_c_r(&[0.2]).with_t(&[1])];
    assert!(Plan::new(&cfg).is_err());

    let mut cfg = small_config();
    cfg.trials = 10;
    assert!(cfg.validate().is_err());

    let mut cfg = small_config();
    cfg.detectors[0].c_r = vec![1.5];
    assert!(cfg.validate().is_err());

    let text = r#"{"scenario": {"id": "case2", "n": 10}, "detectors": [{"name": "c:nope"}]}"#;
    assert!(ExperimentConfig::from_json(text).is_err());
    let text = r#"{"scenario": {"id": "case9", "n": 10}, "detectors": [{"name": "c:GA"}]}"#;
    assert!(ExperimentConfig::from_json(text).is_err());
}

#[test]
fn calibrated_threshold_holds_on_held_out_trials() {
    let cfg = ExperimentConfig::new(
        ScenarioSpec::new(ScenarioId::Case2, 40, ScenarioParams::default()),
        vec![DetectorConfig::new(DetectorKind::CompressedGa).with_c_r(&[0.25])],
    );
    // Per-trial projections: both runs sample the same random ensemble.
    let (cal_n, test_n) = (20_000, 5_000);
    let scores = |seed: u64, trials: usize| {
        let mut c = cfg.clone();
        c.seed = seed;
        c.trials = trials;
        collect_scores(&Plan::new(&c).unwrap(), trials, &[Hypothesis::H0]).unwrap().remove(0).remove(0)
    };
    let (cal, test) = (scores(1, cal_n), scores(2, test_n));
    for alpha in [0.01, 0.05, 0.1] {
        let th = calibrate_threshold(&cal, alpha).unwrap();
        let pf = test.iter().filter(|v| **v > th.threshold).count() as f64 / test_n as f64;
        let sigma = (alpha * (1.0 - alpha) / test_n as f64).sqrt();
        assert!((pf - alpha).abs() <= 3.0 * sigma, "alpha {alpha}: held-out pf {pf}");
    }
}

#[test]
fn calibrate_reports_every_alpha_and_analytic_energy_thresholds() {
    let mut cfg = ExperimentConfig::new(
        ScenarioSpec::new(ScenarioId::Case2, 30, ScenarioParams::default()),
        vec![
            DetectorConfig::new(DetectorKind::UncompressedEnergy).with_t(&[4]),
            DetectorConfig::new(DetectorKind::CompressedCov).with_c_r(&[0.3]).with_t(&[4]),
        ],
    );
    cfg.trials = 2000;
    let records = run_calibrate(&cfg).unwrap();
    assert_eq!(records.len(), 2 * cfg.alpha.len());
    for r in &records {
        assert_eq!(r.analytic_threshold.is_some(), r.detector == "u:energy");
        assert!(r.calibration.ci_low <= r.calibration.achieved_pf && r.calibration.achieved_pf <= r.calibration.ci_high);
    }
}

#[test]
fn bounds_rows_are_consistent() {
    let mut cfg = small_config();
    cfg.detectors.truncate(2);
    let result = run_bounds(&cfg).unwrap();
    for row in &result.rows {
        let r = &row.report;
        assert!(r.d_b.is_finite());
        assert_eq!(r.p_ub, 0.5 * (-r.d_b).exp());
        if r.stderr.is_none() && r.approach == "c:GA" {
            assert!(r.d_b >= 0.0);
        }
    }
    assert_eq!(result.compare.len(), 2);
    let ga: Vec<f64> = result.rows.iter().filter(|r| r.report.approach == "c:GA").map(|r| r.report.d_b).collect();
    assert!(ga[1] > ga[0], "distance should grow with c_r: {ga:?}");
}

#[test]
fn bench_emits_one_row_per_setting() {
    let mut cfg = small_config();
    cfg.bench_evals = 20;
    cfg.bench_warmup = 2;
    let rows = run_bench(&cfg).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.mean_seconds > 0.0 && r.evals == 20));
}

#[test]
fn files_are_written_with_fixed_headers() {
    let dir = tempfile::tempdir().unwrap();
    let curves = run_roc(&small_config()).unwrap();
    emit::write_roc(dir.path(), &curves).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("roc.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "detector,scenario,N,M,c_r,T,trials,seed,threshold,pf,pd");
    assert_eq!(lines.count(), curves.iter().map(|c| c.points.len()).sum::<usize>());
    let svg = std::fs::read_to_string(dir.path().join("roc.svg")).unwrap();
    assert!(svg.starts_with("<svg") && !svg.contains("href"));

    let missing = dir.path().join("file").join("sub");
    std::fs::write(dir.path().join("file"), b"x").unwrap();
    assert!(emit::write_roc(&missing, &curves).is_err());
}
