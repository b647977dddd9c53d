//! Bhattacharyya distances and error bounds for the configured approaches.

use serde::{Deserialize, Serialize};

use super::config::{compressed_dim, ExperimentConfig};
use super::plan::Plan;
use crate::analysis::{
    bhatt_gaussian_compressed, bhatt_mc, compare_rule, rho_b, sensor_moments, DistanceMethod, DistanceReport,
    McApproach, Recommendation, RhoB, MIN_MC_TRIALS,
};
use crate::detectors::DetectorKind;
use crate::error::{Error, Result};
use crate::linops::BlockProjection;
use crate::rng;
use crate::scenarios::closed_form_stats;

/// Seed tag of the Monte Carlo distance estimates.
pub const TAG_DISTANCE: u64 = 0x44_53_54;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    /// `1.0` for uncompressed approaches.
    pub c_r: f64,
    pub report: DistanceReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareAtRate {
    pub c_r: f64,
    pub recommendation: Recommendation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsResult {
    pub rows: Vec<BoundRow>,
    pub rho_b: RhoB,
    /// One comparison per compressed rate, present when `c:GA` is configured.
    pub compare: Vec<CompareAtRate>,
}

/// Closed-form `c:GA` distances per `c_r`, Monte Carlo distances for the
/// product and copula detectors, and `c_r·ρ_B` in both forms.
pub fn run_bounds(cfg: &ExperimentConfig) -> Result<BoundsResult> {
    let plan = Plan::new(cfg)?;
    let spec = plan.spec();
    let stats = closed_form_stats(spec)?;
    let rho = rho_b(&sensor_moments(&stats), spec.n);
    let mc_trials = cfg.trials.max(MIN_MC_TRIALS);

    let mut ga_rows = Vec::new();
    let mut other = Vec::new();
    let mut rates = Vec::new();
    for d in &cfg.detectors {
        match d.name {
            DetectorKind::CompressedGa => {
                for &c_r in &d.c_r {
                    if rates.contains(&c_r) {
                        continue;
                    }
                    rates.push(c_r);
                    let m = compressed_dim(spec.n, c_r);
                    let bp = BlockProjection::<f64>::random(m, spec.n, spec.sensors(), plan.projection_seed(m, None))?;
                    ga_rows.push(BoundRow {
                        c_r,
                        report: bhatt_gaussian_compressed(&stats, &bp)?,
                    });
                }
            }
            DetectorKind::Product => {
                let seed = rng::derive(cfg.seed, &[TAG_DISTANCE, 0]);
                other.push(BoundRow {
                    c_r: 1.0,
                    report: bhatt_mc(&McApproach::Product, spec, mc_trials, seed)?,
                });
            }
            DetectorKind::Copula(family) => {
                let cop = plan
                    .copula(family)
                    .ok_or_else(|| Error::Config(format!("{family} copula missing")))?
                    .cop1()
                    .clone();
                let seed = rng::derive(cfg.seed, &[TAG_DISTANCE, 1 + family as u64]);
                other.push(BoundRow {
                    c_r: 1.0,
                    report: bhatt_mc(&McApproach::Copula(cop), spec, mc_trials, seed)?,
                });
            }
            _ => log::warn!("{} has no Bhattacharyya distance; skipped", d.name),
        }
    }

    let mut compare = Vec::new();
    for ga in &ga_rows {
        let mut reports = vec![ga.report.clone()];
        reports.extend(other.iter().map(|r| r.report.clone()));
        compare.push(CompareAtRate {
            c_r: ga.c_r,
            recommendation: compare_rule(&reports, cfg.epsilon_b)?,
        });
    }

    let mut rows = ga_rows;
    for &c_r in &rates {
        for (label, value) in [("rho_b-corrected", rho.corrected), ("rho_b-printed", rho.printed)] {
            rows.push(BoundRow {
                c_r,
                report: DistanceReport::new(label, c_r * value, DistanceMethod::ClosedForm, None),
            });
        }
    }
    rows.extend(other);
    Ok(BoundsResult { rows, rho_b: rho, compare })
}
