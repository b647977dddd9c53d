//! Monte Carlo ROC curves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::plan::Plan;
use crate::error::{Error, Result};
use crate::scenarios::Hypothesis;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub pf: f64,
    pub pd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub detector: String,
    pub scenario: String,
    pub n: usize,
    pub m: usize,
    pub c_r: f64,
    pub t: usize,
    pub trials: usize,
    pub seed: u64,
    /// Sorted by threshold; `pf` and `pd` are non-increasing along the list.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Runs every trial of `plan` for the given hypotheses in parallel and
/// returns `[setting][hypothesis][trial]`, in trial-index order.
pub fn collect_scores(plan: &Plan, trials: usize, hyps: &[Hypothesis]) -> Result<Vec<Vec<Vec<f64>>>> {
    let per_trial: Vec<Vec<Vec<f64>>> = (0..trials)
        .into_par_iter()
        .map(|k| plan.score_trial(k, hyps))
        .collect::<Result<_>>()?;
    let settings = plan.settings().len();
    let mut out = vec![vec![Vec::with_capacity(trials); hyps.len()]; settings];
    for trial in &per_trial {
        for (hi, row) in trial.iter().enumerate() {
            for (si, &v) in row.iter().enumerate() {
                if v.is_nan() {
                    return Err(Error::Numerical(format!("{} produced a NaN score", plan.settings()[si].kind)));
                }
                out[si][hi].push(v);
            }
        }
    }
    Ok(out)
}

pub fn run_roc(cfg: &ExperimentConfig) -> Result<Vec<RocCurve>> {
    let plan = Plan::new(cfg)?;
    let scores = collect_scores(&plan, cfg.trials, &[Hypothesis::H0, Hypothesis::H1])?;
    Ok(plan
        .settings()
        .iter()
        .zip(scores)
        .map(|(s, mut sc)| {
            let h1 = sc.pop().expect("two hypotheses");
            let h0 = sc.pop().expect("two hypotheses");
            let (points, auc) = roc_from_scores(&h0, &h1, cfg.threshold_levels);
            RocCurve {
                detector: s.kind.name().to_string(),
                scenario: cfg.scenario.id.to_string(),
                n: cfg.scenario.n,
                m: s.m,
                c_r: s.c_r,
                t: s.t,
                trials: cfg.trials,
                seed: cfg.seed,
                points,
                auc,
            }
        })
        .collect())
}

/// Sweeps `levels` quantile-spaced thresholds of the pooled scores. A score
/// equal to the threshold decides H0.
pub fn roc_from_scores(h0: &[f64], h1: &[f64], levels: usize) -> (Vec<RocPoint>, f64) {
    let mut s0 = h0.to_vec();
    let mut s1 = h1.to_vec();
    s0.sort_by(f64::total_cmp);
    s1.sort_by(f64::total_cmp);
    let mut pooled: Vec<f64> = s0.iter().chain(&s1).copied().collect();
    pooled.sort_by(f64::total_cmp);
    if pooled.is_empty() {
        return (Vec::new(), 0.5);
    }
    let last = pooled.len() - 1;
    let mut thresholds: Vec<f64> = (0..levels)
        .map(|i| pooled[((i as f64) * last as f64 / (levels - 1).max(1) as f64).round() as usize])
        .collect();
    thresholds.dedup_by(|a, b| a.total_cmp(b).is_eq());
    let exceed = |sorted: &[f64], tau: f64| -> f64 {
        if sorted.is_empty() {
            return 0.0;
        }
        let at_or_below = sorted.partition_point(|v| v.total_cmp(&tau).is_le());
        (sorted.len() - at_or_below) as f64 / sorted.len() as f64
    };
    let points: Vec<RocPoint> = thresholds
        .into_iter()
        .map(|threshold| RocPoint {
            threshold,
            pf: exceed(&s0, threshold),
            pd: exceed(&s1, threshold),
        })
        .collect();
    let auc = auc(&points);
    (points, auc)
}

/// Trapezoid area under `points` with the `(0,0)` and `(1,1)` anchors.
pub fn auc(points: &[RocPoint]) -> f64 {
    let mut path: Vec<(f64, f64)> = Vec::with_capacity(points.len() + 2);
    path.push((1.0, 1.0));
    path.extend(points.iter().map(|p| (p.pf, p.pd)));
    path.push((0.0, 0.0));
    path.windows(2)
        .map(|w| (w[0].0 - w[1].0).abs() * 0.5 * (w[0].1 + w[1].1))
        .sum()
}

/// Exact Mann-Whitney AUC with ties counted as one half. Used as an oracle.
pub fn mann_whitney_auc(h0: &[f64], h1: &[f64]) -> f64 {
    let mut s0 = h0.to_vec();
    s0.sort_by(f64::total_cmp);
    let mut total = 0.0;
    for &v in h1 {
        let below = s0.partition_point(|x| *x < v);
        let at_or_below = s0.partition_point(|x| *x <= v);
        total += below as f64 + 0.5 * (at_or_below - below) as f64;
    }
    total / (h0.len() as f64 * h1.len() as f64)
}
