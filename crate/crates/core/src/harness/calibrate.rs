//! Simulation-based threshold calibration under H0.

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::plan::Plan;
use super::roc::collect_scores;
use crate::detectors::{energy_threshold, DetectorKind, Domain};
use crate::error::{Error, Result};
use crate::scenarios::{Hypothesis, ScenarioId};

/// Minimum expected number of exceedances for a usable empirical quantile.
pub const MIN_EXCEEDANCES: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub alpha: f64,
    pub threshold: f64,
    /// Fraction of the calibration scores strictly above the threshold.
    pub achieved_pf: f64,
    /// Normal-approximation 95% interval for the achieved false-alarm rate.
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: usize,
}

/// Empirical `(1-α)` quantile: the `⌊αn⌋` largest scores lie strictly above
/// the returned threshold (fewer with ties). `α = 1` returns a value below
/// every score.
pub fn calibrate_threshold(h0_scores: &[f64], alpha: f64) -> Result<Calibration> {
    let n = h0_scores.len();
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Calibration(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if (n as f64) * alpha < MIN_EXCEEDANCES {
        return Err(Error::Calibration(format!(
            "trials * alpha = {} < {MIN_EXCEEDANCES}; the quantile is unreliable",
            n as f64 * alpha
        )));
    }
    let mut sorted = h0_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = (alpha * n as f64).floor() as usize;
    let threshold = if k >= n {
        let min = sorted[0];
        min - min.abs().max(1.0)
    } else {
        sorted[n - k - 1]
    };
    let above = sorted.len() - sorted.partition_point(|v| *v <= threshold);
    let p = above as f64 / n as f64;
    let half = 1.96 * (p * (1.0 - p) / n as f64).sqrt();
    Ok(Calibration {
        alpha,
        threshold,
        achieved_pf: p,
        ci_low: (p - half).max(0.0),
        ci_high: (p + half).min(1.0),
        trials: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub detector: String,
    pub scenario: String,
    pub n: usize,
    pub m: usize,
    pub c_r: f64,
    pub t: usize,
    pub seed: u64,
    pub calibration: Calibration,
    /// Closed-form energy threshold, when one exists for the scenario.
    pub analytic_threshold: Option<f64>,
}

/// Calibrates every setting of `cfg` at every `cfg.alpha`.
pub fn run_calibrate(cfg: &ExperimentConfig) -> Result<Vec<CalibrationRecord>> {
    let plan = Plan::new(cfg)?;
    let scores = collect_scores(&plan, cfg.trials, &[Hypothesis::H0])?;
    let mut out = Vec::new();
    for (s, sc) in plan.settings().iter().zip(&scores) {
        for &alpha in &cfg.alpha {
            let calibration = calibrate_threshold(&sc[0], alpha)?;
            let analytic_threshold = match (s.kind, cfg.scenario.id) {
                (DetectorKind::UncompressedEnergy | DetectorKind::CompressedEnergy, ScenarioId::Case2) if alpha < 1.0 => {
                    let domain = if s.kind.is_compressed() { Domain::Compressed } else { Domain::Uncompressed };
                    let p = cfg.scenario.params;
                    Some(energy_threshold(domain, alpha, 1.0 / p.inv_lambda0, p.a0, s.m, s.t, s.energy_variance)?.value)
                }
                _ => None,
            };
            out.push(CalibrationRecord {
                detector: s.kind.name().to_string(),
                scenario: cfg.scenario.id.to_string(),
                n: cfg.scenario.n,
                m: s.m,
                c_r: s.c_r,
                t: s.t,
                seed: cfg.seed,
                calibration,
                analytic_threshold,
            });
        }
    }
    Ok(out)
}

/// One calibration at one point of the H0 parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceCell {
    pub a0: f64,
    pub inv_lambda0: f64,
    pub record: CalibrationRecord,
}

/// Recalibrates every setting of `cfg` over the `a0 × 1/λ0` grid. Only H0
/// parameters change between cells, so each cell reuses the master seed.
pub fn threshold_surface(cfg: &ExperimentConfig, a0: &[f64], inv_lambda0: &[f64]) -> Result<Vec<SurfaceCell>> {
    let mut cells = Vec::with_capacity(a0.len() * inv_lambda0.len());
    for &a in a0 {
        for &il in inv_lambda0 {
            let mut c = cfg.clone();
            c.scenario.params.a0 = a;
            c.scenario.params.inv_lambda0 = il;
            cells.extend(run_calibrate(&c)?.into_iter().map(|record| SurfaceCell {
                a0: a,
                inv_lambda0: il,
                record,
            }));
        }
    }
    Ok(cells)
}

/// `(max - min) / mean` of `values`.
pub fn relative_spread(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (hi - lo) / mean.abs()
}
