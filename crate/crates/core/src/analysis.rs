//! Bhattacharyya distances, error bounds and the compressed-vs-uncompressed
//! comparison rule.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detectors::{CopulaLlr, CopulaSpec, ProductLlr};
use crate::error::{Error, Result};
use crate::linops::{compress_block_scalar, BlockProjection};
use crate::rng;
use crate::scalar::Scalar;
use crate::scenarios::{sample, Hypothesis, HypothesisStats, ScenarioSpec};

pub const BOOTSTRAP_RESAMPLES: usize = 200;
pub const MIN_MC_TRIALS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DistanceMethod {
    ClosedForm,
    MonteCarlo { trials: usize, seed: u64 },
}

impl DistanceMethod {
    pub fn label(&self) -> String {
        match self {
            DistanceMethod::ClosedForm => "closed-form".to_string(),
            DistanceMethod::MonteCarlo { trials, seed } => format!("monte-carlo({trials},{seed})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub approach: String,
    pub d_b: f64,
    /// `½e^{-d_b}`.
    pub p_ub: f64,
    pub method: DistanceMethod,
    pub stderr: Option<f64>,
}

impl DistanceReport {
    pub fn new(approach: impl Into<String>, d_b: f64, method: DistanceMethod, stderr: Option<f64>) -> Self {
        Self {
            approach: approach.into(),
            d_b,
            p_ub: 0.5 * (-d_b).exp(),
            method,
            stderr,
        }
    }
}

/// Gaussian Bhattacharyya distance between the compressed hypotheses,
/// `⅛ΔμᵀΓ⁻¹Δμ + ½log(|Γ| / √(|C¹||C⁰|))`, `Γ = ½(C¹ + C⁰)`.
pub fn bhatt_gaussian_compressed<S: Scalar>(stats: &HypothesisStats, bp: &BlockProjection<S>) -> Result<DistanceReport> {
    let (mu0, c0) = compress_block_scalar(bp, &stats.h0.mean, &stats.h0.cov)?;
    let (mu1, c1) = compress_block_scalar(bp, &stats.h1.mean, &stats.h1.cov)?;
    let d_b = gaussian_bhattacharyya(&mu0, &c0, &mu1, &c1)?;
    Ok(DistanceReport::new("c:GA", d_b, DistanceMethod::ClosedForm, None))
}

/// Bhattacharyya distance between two multivariate normals.
pub fn gaussian_bhattacharyya<S: Scalar>(mu0: &DVector<S>, c0: &DMatrix<S>, mu1: &DVector<S>, c1: &DMatrix<S>) -> Result<f64> {
    let logdet = |c: &DMatrix<S>, what: &str| -> Result<(nalgebra::Cholesky<S, nalgebra::Dyn>, f64)> {
        let chol = c
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Numerical(format!("{what} is not positive definite")))?;
        let ld = chol.l_dirty().diagonal().iter().map(|v| v.to_f64_lossy().ln()).sum::<f64>() * 2.0;
        Ok((chol, ld))
    };
    let gamma = (c0 + c1) * S::lit(0.5);
    let (chol_g, ld_g) = logdet(&gamma, "Gamma")?;
    let (_, ld0) = logdet(c0, "C0")?;
    let (_, ld1) = logdet(c1, "C1")?;
    let diff = mu1 - mu0;
    let quad = diff.dot(&chol_g.solve(&diff)).to_f64_lossy();
    let d = quad / 8.0 + 0.5 * (ld_g - 0.5 * ld1 - 0.5 * ld0);
    // The log-det term is ≥ 0 mathematically; clip rounding-level negatives.
    Ok(d.max(0.0))
}

/// Per-sensor first and second moments for the diagonal setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorMoments {
    pub sigma0_sq: f64,
    pub sigma1_sq: f64,
    pub beta0: f64,
    pub beta1: f64,
}

impl SensorMoments {
    /// Per-coordinate Gaussian Bhattacharyya distance.
    pub fn per_dimension(&self) -> f64 {
        let s = self.sigma1_sq + self.sigma0_sq;
        let db = self.beta1 - self.beta0;
        0.5 * (s / 2.0).ln() - 0.25 * (self.sigma1_sq * self.sigma0_sq).ln() + db * db / (4.0 * s)
    }
}

/// Both forms of the `ρ_B` scale factor: `c_r·ρ_B` approximates the
/// compressed distance in the uncorrelated setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoB {
    /// `N·Σ_j` of the per-coordinate Gaussian distance. Zero for identical hypotheses.
    pub corrected: f64,
    /// `(N/2)Σ_j[log(σ₁²+σ₀²) - log(σ₁²σ₀²) + Δβ²/(2(σ₁²+σ₀²))]`, kept for comparison.
    pub printed: f64,
}

pub fn rho_b(sensors: &[SensorMoments], n: usize) -> RhoB {
    let n = n as f64;
    let corrected = n * sensors.iter().map(SensorMoments::per_dimension).sum::<f64>();
    let printed = n / 2.0
        * sensors
            .iter()
            .map(|m| {
                let s = m.sigma1_sq + m.sigma0_sq;
                let db = m.beta1 - m.beta0;
                s.ln() - (m.sigma1_sq * m.sigma0_sq).ln() + db * db / (2.0 * s)
            })
            .sum::<f64>();
    RhoB { corrected, printed }
}

/// Sensor moments from block-scalar statistics, ignoring cross blocks.
pub fn sensor_moments(stats: &HypothesisStats) -> Vec<SensorMoments> {
    (0..stats.l())
        .map(|j| SensorMoments {
            sigma0_sq: stats.h0.cov[j][j],
            sigma1_sq: stats.h1.cov[j][j],
            beta0: stats.h0.mean[j],
            beta1: stats.h1.mean[j],
        })
        .collect()
}

/// Uncompressed approach whose distance is estimated by Monte Carlo.
#[derive(Debug, Clone, PartialEq)]
pub enum McApproach {
    Product,
    Copula(CopulaSpec),
}

type Scorer = Box<dyn Fn(&[f64]) -> Result<f64> + Sync>;

/// `-log E_{f₀}[exp(½·LLR(x))]` over `trials` H0 draws, in log space.
pub fn bhatt_mc(approach: &McApproach, spec: &ScenarioSpec, trials: usize, seed: u64) -> Result<DistanceReport> {
    if trials < MIN_MC_TRIALS {
        return Err(Error::Config(format!("Monte Carlo distance needs at least {MIN_MC_TRIALS} trials, got {trials}")));
    }
    let (name, scorer): (String, Scorer) = match approach {
        McApproach::Product => {
            let p = ProductLlr::new(spec)?;
            ("u:product".into(), Box::new(move |x| p.score(x)))
        }
        McApproach::Copula(cop) => {
            let c = CopulaLlr::new(spec, cop.clone(), None)?;
            (format!("u:copula-{}", cop.name()), Box::new(move |x| c.score(x).map(|s| s.value)))
        }
    };
    let half_llr: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let x = sample(spec, Hypothesis::H0, rng::derive(seed, &[Hypothesis::H0.tag(), k as u64]))?;
            Ok(0.5 * scorer(x.as_slice())?)
        })
        .collect::<Result<Vec<_>>>()?;
    let d_b = -log_mean_exp(&half_llr)?;
    let mut brng = rng::rng_from(rng::derive(seed, &[rng::TAG_BOOTSTRAP]));
    let mut resample = vec![0.0; trials];
    let mut boots = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for _ in 0..BOOTSTRAP_RESAMPLES {
        for slot in resample.iter_mut() {
            *slot = half_llr[brng.random_range(0..trials)];
        }
        boots.push(-log_mean_exp(&resample)?);
    }
    let mean = boots.iter().sum::<f64>() / boots.len() as f64;
    let se = (boots.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (boots.len() - 1) as f64).sqrt();
    Ok(DistanceReport::new(name, d_b, DistanceMethod::MonteCarlo { trials, seed }, Some(se)))
}

/// `log((1/n) Σ exp(v_i))` with max-shift.
pub fn log_mean_exp(v: &[f64]) -> Result<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    if !max.is_finite() {
        return Err(Error::Numerical("integrand has no mass in any trial; increase the trial count".into()));
    }
    let sum: f64 = v.iter().map(|x| (x - max).exp()).sum();
    Ok(max + (sum / v.len() as f64).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dominance {
    pub approach: String,
    /// `D_B^{c:GA} - D_B^{other}`.
    pub margin: f64,
    /// Margin is at least three combined standard errors (≥ 0 for closed forms).
    pub ga_dominates: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub epsilon_b: f64,
    /// `-log(2ε_B)`.
    pub required_distance: f64,
    pub ga_distance: f64,
    pub comparisons: Vec<Dominance>,
    /// `D_B^{c:GA} ≥ -log(2ε_B)`.
    pub ga_meets_target: bool,
}

/// Compares the `c:GA` report against every other report.
pub fn compare_rule(reports: &[DistanceReport], epsilon_b: f64) -> Result<Recommendation> {
    let ga = reports
        .iter()
        .find(|r| r.approach == "c:GA")
        .ok_or_else(|| Error::Config("compare_rule needs a c:GA report".into()))?;
    let ga_se = ga.stderr.unwrap_or(0.0);
    let comparisons = reports
        .iter()
        .filter(|r| r.approach != "c:GA")
        .map(|r| {
            let margin = ga.d_b - r.d_b;
            let se = (ga_se.powi(2) + r.stderr.unwrap_or(0.0).powi(2)).sqrt();
            Dominance {
                approach: r.approach.clone(),
                margin,
                ga_dominates: margin >= 3.0 * se,
            }
        })
        .collect();
    let required_distance = -(2.0 * epsilon_b).ln();
    Ok(Recommendation {
        epsilon_b,
        required_distance,
        ga_distance: ga.d_b,
        comparisons,
        ga_meets_target: ga.d_b >= required_distance,
    })
}
