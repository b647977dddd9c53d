//! Copula densities, Kendall's-τ fitting and the copula LLR.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::product::ProductLlr;
use crate::error::{Error, Result};
use crate::rng;
use crate::scenarios::marginal::std_normal_quantile;
use crate::scenarios::{sample, Hypothesis, Marginal, ScenarioSpec};

/// Probability-integral values are clamped into `[U_CLAMP, 1 - U_CLAMP]`.
pub const U_CLAMP: f64 = 1e-12;
/// `|τ̂|` is capped here before inversion.
pub const TAU_GUARD: f64 = 0.999;
const RHO_GUARD: f64 = 1.0 - 1e-6;
const MIN_FIT_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CopulaFamily {
    Gaussian,
    Clayton,
    Gumbel,
}

impl CopulaFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            CopulaFamily::Gaussian => "gaussian",
            CopulaFamily::Clayton => "clayton",
            CopulaFamily::Gumbel => "gumbel",
        }
    }
}

impl fmt::Display for CopulaFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CopulaFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(CopulaFamily::Gaussian),
            "clayton" => Ok(CopulaFamily::Clayton),
            "gumbel" => Ok(CopulaFamily::Gumbel),
            other => Err(Error::Config(format!("unknown copula family '{other}'"))),
        }
    }
}

/// Gaussian copula with cached `R⁻¹ - I` and `log|R|`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCopula {
    corr: DMatrix<f64>,
    precision_minus_identity: DMatrix<f64>,
    logdet: f64,
}

impl GaussianCopula {
    pub fn new(corr: DMatrix<f64>) -> Result<Self> {
        let d = corr.nrows();
        if d < 2 || corr.ncols() != d {
            return Err(Error::InvalidDimension(format!("correlation matrix must be square with d >= 2, got {:?}", corr.shape())));
        }
        for i in 0..d {
            if (corr[(i, i)] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidCovariance("correlation matrix needs a unit diagonal".into()));
            }
            for j in 0..d {
                if i != j && corr[(i, j)].abs() >= 1.0 {
                    return Err(Error::InvalidCovariance(format!("|rho| must be < 1, got {}", corr[(i, j)])));
                }
            }
        }
        let chol = corr
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidCovariance("correlation matrix is not positive definite".into()))?;
        let logdet = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let precision_minus_identity = chol.inverse() - DMatrix::identity(d, d);
        Ok(Self {
            corr,
            precision_minus_identity,
            logdet,
        })
    }

    pub fn corr(&self) -> &DMatrix<f64> {
        &self.corr
    }

    fn ln_density(&self, u: &[f64]) -> f64 {
        let z = DVector::from_iterator(u.len(), u.iter().map(|&v| std_normal_quantile(v)));
        -0.5 * self.logdet - 0.5 * z.dot(&(&self.precision_minus_identity * &z))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CopulaSpec {
    Independence { dim: usize },
    Gaussian(GaussianCopula),
    /// Bivariate, `θ > 0`.
    Clayton { theta: f64 },
    /// Bivariate, `θ ≥ 1`.
    Gumbel { theta: f64 },
}

impl CopulaSpec {
    pub fn gaussian_bivariate(rho: f64) -> Result<Self> {
        Ok(CopulaSpec::Gaussian(GaussianCopula::new(DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]))?))
    }

    pub fn clayton(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::Fit {
                family: "clayton".into(),
                reason: format!("theta must be positive, got {theta}"),
            });
        }
        Ok(CopulaSpec::Clayton { theta })
    }

    pub fn gumbel(theta: f64) -> Result<Self> {
        if !(theta >= 1.0 && theta.is_finite()) {
            return Err(Error::Fit {
                family: "gumbel".into(),
                reason: format!("theta must be >= 1, got {theta}"),
            });
        }
        Ok(CopulaSpec::Gumbel { theta })
    }

    pub fn dim(&self) -> usize {
        match self {
            CopulaSpec::Independence { dim } => *dim,
            CopulaSpec::Gaussian(g) => g.corr.nrows(),
            CopulaSpec::Clayton { .. } | CopulaSpec::Gumbel { .. } => 2,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CopulaSpec::Independence { .. } => "independence",
            CopulaSpec::Gaussian(_) => "gaussian",
            CopulaSpec::Clayton { .. } => "clayton",
            CopulaSpec::Gumbel { .. } => "gumbel",
        }
    }

    /// Log copula density at `u`, entries assumed already clamped into (0, 1).
    pub fn ln_density(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.dim());
        match self {
            CopulaSpec::Independence { .. } => 0.0,
            CopulaSpec::Gaussian(g) => g.ln_density(u),
            CopulaSpec::Clayton { theta } => clayton_ln_density(u[0], u[1], *theta),
            CopulaSpec::Gumbel { theta } => gumbel_ln_density(u[0], u[1], *theta),
        }
    }
}

fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `c(u,v) = (1+θ)(uv)^{-1-θ}(u^{-θ} + v^{-θ} - 1)^{-2-1/θ}`.
fn clayton_ln_density(u: f64, v: f64, theta: f64) -> f64 {
    let (lu, lv) = (u.ln(), v.ln());
    let a = -theta * lu;
    let b = -theta * lv;
    let m = a.max(b);
    // ln(e^a + e^b - 1) with both a, b ≥ 0.
    let s = m + ((a - m).exp() + (b - m).exp() - (-m).exp()).ln();
    (1.0 + theta).ln() - (1.0 + theta) * (lu + lv) - (2.0 + 1.0 / theta) * s
}

/// With `x = -ln u`, `y = -ln v`, `A = x^θ + y^θ`:
/// `c = C(u,v)/(uv) · (xy)^{θ-1} · A^{1/θ-2} · (A^{1/θ} + θ - 1)`.
fn gumbel_ln_density(u: f64, v: f64, theta: f64) -> f64 {
    let x = -u.ln();
    let y = -v.ln();
    let (lx, ly) = (x.ln(), y.ln());
    let ln_a = log_add_exp(theta * lx, theta * ly);
    let a_root = (ln_a / theta).exp();
    -a_root + x + y + (theta - 1.0) * (lx + ly) + (1.0 / theta - 2.0) * ln_a + (a_root + theta - 1.0).ln()
}

/// Kendall's τ-b between two columns, O(T²).
pub fn kendall_tau(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (mut concordant, mut discordant, mut ties_a, mut ties_b) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        let (ai, bi) = (a[i], b[i]);
        for j in (i + 1)..n {
            let da = a[j] - ai;
            let db = b[j] - bi;
            if da == 0.0 && db == 0.0 {
                continue;
            } else if da == 0.0 {
                ties_a += 1;
            } else if db == 0.0 {
                ties_b += 1;
            } else if (da > 0.0) == (db > 0.0) {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let n1 = (concordant + discordant + ties_a) as f64;
    let n2 = (concordant + discordant + ties_b) as f64;
    if n1 == 0.0 || n2 == 0.0 {
        return 0.0;
    }
    (concordant - discordant) as f64 / (n1 * n2).sqrt()
}

/// Fits `family` to `u` (rows are observations) by inverting Kendall's τ.
pub fn fit_copula(u: &DMatrix<f64>, family: CopulaFamily) -> Result<CopulaSpec> {
    let (t, d) = u.shape();
    if t < MIN_FIT_ROWS {
        return Err(Error::InsufficientData(format!("copula fit needs at least {MIN_FIT_ROWS} rows, got {t}")));
    }
    if u.iter().any(|&v| !(v > 0.0 && v < 1.0)) {
        return Err(Error::Fit {
            family: family.to_string(),
            reason: "pseudo-observations must lie strictly inside (0, 1)".into(),
        });
    }
    if d < 2 || (family != CopulaFamily::Gaussian && d != 2) {
        return Err(Error::Fit {
            family: family.to_string(),
            reason: format!("dimension {d} not supported (gaussian: d >= 2, archimedean: d = 2)"),
        });
    }
    let cols: Vec<Vec<f64>> = (0..d).map(|j| u.column(j).iter().copied().collect()).collect();
    let tau = |i: usize, j: usize| kendall_tau(&cols[i], &cols[j]).clamp(-TAU_GUARD, TAU_GUARD);
    match family {
        CopulaFamily::Gaussian => {
            let mut corr = DMatrix::identity(d, d);
            for i in 0..d {
                for j in (i + 1)..d {
                    let rho = (PI * tau(i, j) / 2.0).sin().clamp(-RHO_GUARD, RHO_GUARD);
                    corr[(i, j)] = rho;
                    corr[(j, i)] = rho;
                }
            }
            Ok(CopulaSpec::Gaussian(GaussianCopula::new(nearest_correlation(corr))?))
        }
        CopulaFamily::Clayton => {
            let t = tau(0, 1);
            if t <= 0.0 {
                return Err(Error::Fit {
                    family: "clayton".into(),
                    reason: format!("Kendall tau {t:.4} is outside (0, 1)"),
                });
            }
            CopulaSpec::clayton(2.0 * t / (1.0 - t))
        }
        CopulaFamily::Gumbel => {
            let t = tau(0, 1);
            if t < 0.0 {
                return Err(Error::Fit {
                    family: "gumbel".into(),
                    reason: format!("Kendall tau {t:.4} is outside [0, 1)"),
                });
            }
            CopulaSpec::gumbel(1.0 / (1.0 - t))
        }
    }
}

/// Clips eigenvalues of a pairwise correlation estimate and rescales to a unit diagonal.
fn nearest_correlation(corr: DMatrix<f64>) -> DMatrix<f64> {
    if corr.clone().cholesky().is_some() {
        return corr;
    }
    let d = corr.nrows();
    let eig = corr.symmetric_eigen();
    let clipped = DVector::from_iterator(d, eig.eigenvalues.iter().map(|&v| v.max(1e-6)));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    let scale = DVector::from_iterator(d, (0..d).map(|i| rebuilt[(i, i)].sqrt()));
    DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rebuilt[(i, j)] / (scale[i] * scale[j]) })
}

/// Draws H1 data from `spec` until `rows` time indices are collected and
/// fits `family` to their H1 probability-integral transforms.
pub fn fit_from_scenario(spec: &ScenarioSpec, family: CopulaFamily, rows: usize, seed: u64) -> Result<CopulaSpec> {
    let l = spec.sensors();
    let marginals = (0..l)
        .map(|j| spec.marginal(j, Hypothesis::H1))
        .collect::<Result<Vec<_>>>()?;
    let draws = rows.div_ceil(spec.n).max(1);
    let mut data = Vec::with_capacity(draws * spec.n * l);
    for k in 0..draws {
        let x = sample(spec, Hypothesis::H1, rng::derive(seed, &[rng::TAG_FIT, k as u64]))?;
        for i in 0..spec.n {
            for (j, m) in marginals.iter().enumerate() {
                data.push(m.cdf(x[j * spec.n + i])?.clamp(U_CLAMP, 1.0 - U_CLAMP));
            }
        }
    }
    let total = draws * spec.n;
    let take = rows.min(total);
    let u = DMatrix::from_row_slice(total, l, &data).rows(0, take).into_owned();
    fit_copula(&u, family)
}

/// Copula LLR score plus the number of clamped probability-integral values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CopulaScore {
    pub value: f64,
    pub clamped: usize,
}

/// Product-term LLR plus `Σ_n log c₁(u_n) - log c₀(u_n)`.
#[derive(Debug, Clone)]
pub struct CopulaLlr {
    product: ProductLlr,
    cop1: CopulaSpec,
    cop0: CopulaSpec,
}

impl CopulaLlr {
    /// `cop0 = None` means independence under H0.
    pub fn new(spec: &ScenarioSpec, cop1: CopulaSpec, cop0: Option<CopulaSpec>) -> Result<Self> {
        let product = ProductLlr::new(spec)?;
        let l = product.sensors();
        let cop0 = cop0.unwrap_or(CopulaSpec::Independence { dim: l });
        if cop1.dim() != l || cop0.dim() != l {
            return Err(Error::InvalidDimension(format!(
                "copula dimensions ({}, {}) do not match sensor count {l}",
                cop1.dim(),
                cop0.dim()
            )));
        }
        Ok(Self { product, cop1, cop0 })
    }

    pub fn cop1(&self) -> &CopulaSpec {
        &self.cop1
    }

    pub fn score(&self, x: &[f64]) -> Result<CopulaScore> {
        let mut value = self.product.score(x)?;
        let n = self.product.n();
        let l = self.product.sensors();
        let mut clamped = 0usize;
        let mut u1 = vec![0.0; l];
        let mut u0 = vec![0.0; l];
        let needs_h0 = !matches!(self.cop0, CopulaSpec::Independence { .. });
        let needs_h1 = !matches!(self.cop1, CopulaSpec::Independence { .. });
        for i in 0..n {
            for j in 0..l {
                let v = x[j * n + i];
                let (f0, f1): &(Marginal, Marginal) = &self.product.marginals()[j];
                if needs_h1 {
                    u1[j] = clamp_u(f1.cdf(v)?, &mut clamped);
                }
                if needs_h0 {
                    u0[j] = clamp_u(f0.cdf(v)?, &mut clamped);
                }
            }
            value += self.cop1.ln_density(&u1) - self.cop0.ln_density(&u0);
        }
        if clamped > 0 {
            log::debug!("clamped {clamped} probability-integral values into [{U_CLAMP:e}, 1-{U_CLAMP:e}]");
        }
        Ok(CopulaScore { value, clamped })
    }
}

fn clamp_u(u: f64, count: &mut usize) -> f64 {
    if u < U_CLAMP {
        *count += 1;
        U_CLAMP
    } else if u > 1.0 - U_CLAMP {
        *count += 1;
        1.0 - U_CLAMP
    } else {
        u
    }
}

pub fn llr_copula(x: &DVector<f64>, spec: &ScenarioSpec, cop1: &CopulaSpec, cop0: Option<&CopulaSpec>) -> Result<CopulaScore> {
    CopulaLlr::new(spec, cop1.clone(), cop0.cloned())?.score(x.as_slice())
}
