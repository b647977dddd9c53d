//! Synthetic multimodal scenarios: three fusion cases built from a Gaussian,
//! an exponential and a `Beta(a, 1)` sensor, plus a two-sensor
//! signal-in-noise model.
//!
//! Data vectors are laid out sensor-major: coordinates `[j·N, (j+1)·N)`
//! belong to sensor `j`.

pub mod marginal;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, Exp, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng, TAG_H0, TAG_H1};

pub use marginal::Marginal;

const CROSS_MC_DRAWS: usize = 1_000_000;
const CROSS_MC_SEED: u64 = 0x00c0_ffee_2023;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioId {
    /// Gaussian + exponential sensors: dependent but uncorrelated.
    Case1,
    /// Exponential + beta sensors: dependent and correlated.
    Case2,
    /// All three sensors.
    Case3,
    /// Two noisy sensors observing dependent signals.
    Example2,
}

impl ScenarioId {
    pub fn sensor_count(self) -> usize {
        match self {
            ScenarioId::Case1 | ScenarioId::Case2 | ScenarioId::Example2 => 2,
            ScenarioId::Case3 => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioId::Case1 => "case1",
            ScenarioId::Case2 => "case2",
            ScenarioId::Case3 => "case3",
            ScenarioId::Example2 => "example2",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "case1" => Ok(ScenarioId::Case1),
            "case2" => Ok(ScenarioId::Case2),
            "case3" => Ok(ScenarioId::Case3),
            "example2" => Ok(ScenarioId::Example2),
            other => Err(Error::Config(format!("unknown scenario id '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hypothesis {
    H0,
    H1,
}

impl Hypothesis {
    pub fn tag(self) -> u64 {
        match self {
            Hypothesis::H0 => TAG_H0,
            Hypothesis::H1 => TAG_H1,
        }
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hypothesis::H0 => "h0",
            Hypothesis::H1 => "h1",
        })
    }
}

impl FromStr for Hypothesis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "h0" => Ok(Hypothesis::H0),
            "h1" => Ok(Hypothesis::H1),
            other => Err(Error::Config(format!("unknown hypothesis '{other}' (expected h0 or h1)"))),
        }
    }
}

/// Marginal parameters. Fields a scenario does not use are ignored.
///
/// Under H1 the Gaussian sensor's variance is tied to the exponential rate
/// (`σ₁² = 1/(2λ₁)`), and in the signal-in-noise model `1/λ₁ = 2σ_s²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub sigma0_sq: f64,
    pub inv_lambda0: f64,
    pub inv_lambda1: f64,
    pub a0: f64,
    pub a1: f64,
    pub sigma_v_sq: f64,
    pub sigma_s_sq: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            sigma0_sq: 5.0,
            inv_lambda0: 10.0,
            inv_lambda1: 10.2,
            a0: 9.8,
            a1: 10.0,
            sigma_v_sq: 2.0,
            sigma_s_sq: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub id: ScenarioId,
    pub n: usize,
    /// Sensor count; must match the scenario when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(default)]
    pub params: ScenarioParams,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(id: ScenarioId, n: usize, params: ScenarioParams) -> Self {
        Self {
            id,
            n,
            l: None,
            params,
            seed: 0,
        }
    }

    pub fn sensors(&self) -> usize {
        self.id.sensor_count()
    }

    pub fn dim(&self) -> usize {
        self.n * self.sensors()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("scenario n must be positive".into()));
        }
        if let Some(l) = self.l {
            if l != self.sensors() {
                return Err(Error::Config(format!(
                    "scenario {} has {} sensors, config says l={l}",
                    self.id,
                    self.sensors()
                )));
            }
        }
        let p = &self.params;
        let positive: &[(&str, f64)] = match self.id {
            ScenarioId::Case1 => &[("sigma0_sq", p.sigma0_sq), ("inv_lambda0", p.inv_lambda0), ("inv_lambda1", p.inv_lambda1)],
            ScenarioId::Case2 => &[("inv_lambda0", p.inv_lambda0), ("inv_lambda1", p.inv_lambda1), ("a0", p.a0), ("a1", p.a1)],
            ScenarioId::Case3 => &[
                ("sigma0_sq", p.sigma0_sq),
                ("inv_lambda0", p.inv_lambda0),
                ("inv_lambda1", p.inv_lambda1),
                ("a0", p.a0),
                ("a1", p.a1),
            ],
            ScenarioId::Example2 => &[("sigma_v_sq", p.sigma_v_sq), ("sigma_s_sq", p.sigma_s_sq)],
        };
        for (name, v) in positive {
            if !(v.is_finite() && *v > 0.0) {
                return Err(Error::Config(format!("scenario parameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// Variance of the Gaussian sensor under H1.
    pub fn sigma1_sq(&self) -> f64 {
        self.params.inv_lambda1 / 2.0
    }

    /// Marginal of sensor `sensor` (0-based) under `h`.
    pub fn marginal(&self, sensor: usize, h: Hypothesis) -> Result<Marginal> {
        let p = &self.params;
        let gaussian = |var| Marginal::Gaussian { mean: 0.0, variance: var };
        let exp = |inv| Marginal::Exponential { rate: 1.0 / inv };
        let beta = |a| Marginal::Beta { a };
        let m = match (self.id, sensor, h) {
            (ScenarioId::Case1 | ScenarioId::Case3, 0, Hypothesis::H0) => gaussian(p.sigma0_sq),
            (ScenarioId::Case1 | ScenarioId::Case3, 0, Hypothesis::H1) => gaussian(self.sigma1_sq()),
            (ScenarioId::Case1, 1, Hypothesis::H0) | (ScenarioId::Case2, 0, Hypothesis::H0) | (ScenarioId::Case3, 1, Hypothesis::H0) => {
                exp(p.inv_lambda0)
            }
            (ScenarioId::Case1, 1, Hypothesis::H1) | (ScenarioId::Case2, 0, Hypothesis::H1) | (ScenarioId::Case3, 1, Hypothesis::H1) => {
                exp(p.inv_lambda1)
            }
            (ScenarioId::Case2, 1, Hypothesis::H0) | (ScenarioId::Case3, 2, Hypothesis::H0) => beta(p.a0),
            (ScenarioId::Case2, 1, Hypothesis::H1) | (ScenarioId::Case3, 2, Hypothesis::H1) => beta(p.a1),
            (ScenarioId::Example2, 0 | 1, Hypothesis::H0) => gaussian(p.sigma_v_sq),
            (ScenarioId::Example2, 0, Hypothesis::H1) => Marginal::ExponentialPlusGaussian {
                rate: 1.0 / (2.0 * p.sigma_s_sq),
                noise_var: p.sigma_v_sq,
            },
            (ScenarioId::Example2, 1, Hypothesis::H1) => Marginal::ScaledChi3PlusGaussian {
                scale: p.sigma_s_sq,
                noise_var: p.sigma_v_sq,
            },
            _ => {
                return Err(Error::InvalidDimension(format!(
                    "scenario {} has no sensor {sensor}",
                    self.id
                )))
            }
        };
        Ok(m)
    }
}

/// Means and covariances whose `N × N` blocks are all scalar multiples of
/// the identity (or of the all-ones vector for means).
#[derive(Debug, Clone, PartialEq)]
pub struct BlockScalarMoments {
    /// Per-sensor mean `b_j`; the full mean is `b_j·1` on block `j`.
    pub mean: Vec<f64>,
    /// `L × L` grid; block `(j, k)` of the covariance is `cov[j][k]·I_N`.
    pub cov: Vec<Vec<f64>>,
}

impl BlockScalarMoments {
    pub fn l(&self) -> usize {
        self.mean.len()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.l()).all(|j| (0..self.l()).all(|k| j == k || self.cov[j][k] == 0.0))
    }

    pub fn beta(&self, n: usize) -> DVector<f64> {
        DVector::from_fn(n * self.l(), |i, _| self.mean[i / n])
    }

    /// Dense `NL × NL` covariance. Meant for oracles and small instances.
    pub fn dense_cov(&self, n: usize) -> DMatrix<f64> {
        let l = self.l();
        DMatrix::from_fn(n * l, n * l, |i, j| {
            if i % n == j % n {
                self.cov[i / n][j / n]
            } else {
                0.0
            }
        })
    }
}

/// Uncompressed first and second moments under both hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisStats {
    pub n: usize,
    pub h0: BlockScalarMoments,
    pub h1: BlockScalarMoments,
}

impl HypothesisStats {
    pub fn l(&self) -> usize {
        self.h0.l()
    }

    pub fn get(&self, h: Hypothesis) -> &BlockScalarMoments {
        match h {
            Hypothesis::H0 => &self.h0,
            Hypothesis::H1 => &self.h1,
        }
    }

    pub fn beta(&self, h: Hypothesis) -> DVector<f64> {
        self.get(h).beta(self.n)
    }

    pub fn dense_cov(&self, h: Hypothesis) -> DMatrix<f64> {
        self.get(h).dense_cov(self.n)
    }
}

/// Draws one length-`N·L` observation.
pub fn sample(spec: &ScenarioSpec, h: Hypothesis, seed: u64) -> Result<DVector<f64>> {
    let mut out = DVector::zeros(spec.dim());
    sample_into(spec, h, &mut rng::rng_from(seed), out.as_mut_slice())?;
    Ok(out)
}

/// Draws `t` independent observations (frames) from seeds derived from `seed`.
pub fn sample_frames(spec: &ScenarioSpec, h: Hypothesis, seed: u64, t: usize) -> Result<Vec<DVector<f64>>> {
    (0..t)
        .map(|i| sample(spec, h, rng::derive(seed, &[rng::TAG_FRAME, i as u64])))
        .collect()
}

/// Fills `out` (length `N·L`) from `rng`. Per time index the latent draws are
/// consumed in a fixed order so one seed determines the whole vector.
pub fn sample_into(spec: &ScenarioSpec, h: Hypothesis, rng: &mut Rng, out: &mut [f64]) -> Result<()> {
    spec.validate()?;
    let n = spec.n;
    if out.len() != spec.dim() {
        return Err(Error::InvalidDimension(format!(
            "output buffer has length {}, scenario needs {}",
            out.len(),
            spec.dim()
        )));
    }
    let p = spec.params;
    let normal = |var: f64| Normal::new(0.0, var.sqrt()).map_err(|e| Error::Config(e.to_string()));
    let exp = |inv: f64| Exp::new(1.0 / inv).map_err(|e| Error::Config(e.to_string()));
    let gamma = |shape: f64, scale: f64| Gamma::new(shape, scale).map_err(|e| Error::Config(e.to_string()));
    match (spec.id, h) {
        (ScenarioId::Case1 | ScenarioId::Case2 | ScenarioId::Case3, Hypothesis::H0) => {
            let g = normal(p.sigma0_sq)?;
            let e = exp(p.inv_lambda0)?;
            let with_gauss = spec.id != ScenarioId::Case2;
            let with_beta = spec.id != ScenarioId::Case1;
            let inv_a0 = 1.0 / p.a0;
            for i in 0..n {
                let mut j = 0;
                if with_gauss {
                    out[i] = g.sample(rng);
                    j += 1;
                }
                out[j * n + i] = e.sample(rng);
                j += 1;
                if with_beta {
                    // Beta(a, 1) by inverse cdf; open interval keeps the value strictly inside (0, 1).
                    let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
                    out[j * n + i] = u.powf(inv_a0);
                }
            }
        }
        (ScenarioId::Case1 | ScenarioId::Case2 | ScenarioId::Case3, Hypothesis::H1) => {
            let g = normal(spec.sigma1_sq())?;
            let gam = gamma(p.a1, p.inv_lambda1)?;
            let with_gauss = spec.id != ScenarioId::Case2;
            let with_beta = spec.id != ScenarioId::Case1;
            for i in 0..n {
                let x1: f64 = g.sample(rng);
                let w: f64 = g.sample(rng);
                let x2 = x1 * x1 + w * w;
                let mut j = 0;
                if with_gauss {
                    out[i] = x1;
                    j += 1;
                }
                out[j * n + i] = x2;
                j += 1;
                if with_beta {
                    let u: f64 = gam.sample(rng);
                    out[j * n + i] = u / (u + x2);
                }
            }
        }
        (ScenarioId::Example2, Hypothesis::H0) => {
            let v = normal(p.sigma_v_sq)?;
            for i in 0..n {
                out[i] = v.sample(rng);
                out[n + i] = v.sample(rng);
            }
        }
        (ScenarioId::Example2, Hypothesis::H1) => {
            let latent = normal(p.sigma_s_sq)?;
            let v = normal(p.sigma_v_sq)?;
            for i in 0..n {
                let s: f64 = latent.sample(rng);
                let w: f64 = latent.sample(rng);
                let u1: f64 = latent.sample(rng);
                let u2: f64 = latent.sample(rng);
                let s2 = s * s;
                out[i] = s2 + w * w + v.sample(rng);
                out[n + i] = s2 + u1 * u1 + u2 * u2 + v.sample(rng);
            }
        }
    }
    Ok(())
}

/// Closed-form uncompressed moments.
pub fn closed_form_stats(spec: &ScenarioSpec) -> Result<HypothesisStats> {
    spec.validate()?;
    let p = spec.params;
    let exp_var = |inv: f64| inv * inv;
    let beta_mean = |a: f64| a / (a + 1.0);
    let beta_var = |a: f64| a / ((a + 1.0).powi(2) * (a + 2.0));
    let diag = |v: &[f64]| -> Vec<Vec<f64>> {
        (0..v.len())
            .map(|j| (0..v.len()).map(|k| if j == k { v[j] } else { 0.0 }).collect())
            .collect()
    };
    let (h0, h1) = match spec.id {
        ScenarioId::Case1 => (
            BlockScalarMoments {
                mean: vec![0.0, p.inv_lambda0],
                cov: diag(&[p.sigma0_sq, exp_var(p.inv_lambda0)]),
            },
            BlockScalarMoments {
                mean: vec![0.0, p.inv_lambda1],
                cov: diag(&[spec.sigma1_sq(), exp_var(p.inv_lambda1)]),
            },
        ),
        ScenarioId::Case2 => {
            let cross = exp_beta_cross_covariance(p.inv_lambda1, p.a1);
            let mut cov1 = diag(&[exp_var(p.inv_lambda1), beta_var(p.a1)]);
            cov1[0][1] = cross;
            cov1[1][0] = cross;
            (
                BlockScalarMoments {
                    mean: vec![p.inv_lambda0, beta_mean(p.a0)],
                    cov: diag(&[exp_var(p.inv_lambda0), beta_var(p.a0)]),
                },
                BlockScalarMoments {
                    mean: vec![p.inv_lambda1, beta_mean(p.a1)],
                    cov: cov1,
                },
            )
        }
        ScenarioId::Case3 => {
            let cross = exp_beta_cross_covariance(p.inv_lambda1, p.a1);
            let mut cov1 = diag(&[spec.sigma1_sq(), exp_var(p.inv_lambda1), beta_var(p.a1)]);
            cov1[1][2] = cross;
            cov1[2][1] = cross;
            (
                BlockScalarMoments {
                    mean: vec![0.0, p.inv_lambda0, beta_mean(p.a0)],
                    cov: diag(&[p.sigma0_sq, exp_var(p.inv_lambda0), beta_var(p.a0)]),
                },
                BlockScalarMoments {
                    mean: vec![0.0, p.inv_lambda1, beta_mean(p.a1)],
                    cov: cov1,
                },
            )
        }
        ScenarioId::Example2 => {
            let (sv, ss) = (p.sigma_v_sq, p.sigma_s_sq);
            let inv_lambda1 = 2.0 * ss;
            let cross = 2.0 * ss * ss;
            (
                BlockScalarMoments {
                    mean: vec![0.0, 0.0],
                    cov: diag(&[sv, sv]),
                },
                BlockScalarMoments {
                    mean: vec![inv_lambda1, 3.0 * ss],
                    cov: vec![vec![sv + inv_lambda1 * inv_lambda1, cross], vec![cross, sv + 6.0 * ss * ss]],
                },
            )
        }
    };
    Ok(HypothesisStats { n: spec.n, h0, h1 })
}

/// `Cov(x₂, x₃)` under H1 for `x₂ ~ Exp(λ₁)` and `x₃ = u/(u + x₂)`,
/// `u ~ Gamma(a₁, 1/λ₁)`: `E{x₂ u/(u + x₂)} - a₁/(λ₁(a₁ + 1))`, with the
/// expectation estimated by Monte Carlo once per parameter pair and cached.
pub fn exp_beta_cross_covariance(inv_lambda1: f64, a1: f64) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), f64>>> = OnceLock::new();
    let key = (inv_lambda1.to_bits(), a1.to_bits());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().expect("cache lock").get(&key) {
        return *v;
    }
    let v = cross_expectation_mc(inv_lambda1, a1, CROSS_MC_DRAWS, CROSS_MC_SEED) - a1 * inv_lambda1 / (a1 + 1.0);
    cache.lock().expect("cache lock").insert(key, v);
    v
}

/// Monte Carlo estimate of `E{x u/(u + x)}` with `x = g₁² + g₂²`,
/// `g_i ~ N(0, 1/(2λ₁))`, `u ~ Gamma(a₁, 1/λ₁)`.
pub fn cross_expectation_mc(inv_lambda1: f64, a1: f64, draws: usize, seed: u64) -> f64 {
    let mut rng = rng::rng_from(seed);
    let g = Normal::new(0.0, (inv_lambda1 / 2.0).sqrt()).expect("positive variance");
    let gam = Gamma::new(a1, inv_lambda1).expect("positive gamma parameters");
    let mut acc = 0.0;
    for _ in 0..draws {
        let x1: f64 = g.sample(&mut rng);
        let w: f64 = g.sample(&mut rng);
        let x = x1 * x1 + w * w;
        let u: f64 = gam.sample(&mut rng);
        acc += x * u / (u + x);
    }
    acc / draws as f64
}

/// Density of sensor `sensor` under `h` at `x`.
pub fn marginal_pdf(spec: &ScenarioSpec, sensor: usize, h: Hypothesis, x: f64) -> Result<f64> {
    spec.marginal(sensor, h)?.pdf(x)
}

pub fn marginal_cdf(spec: &ScenarioSpec, sensor: usize, h: Hypothesis, x: f64) -> Result<f64> {
    spec.marginal(sensor, h)?.cdf(x)
}
