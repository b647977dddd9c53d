//! One-dimensional marginal families used by the synthetic scenarios.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const QUAD_TOL: f64 = 1e-8;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// A univariate marginal. The two `*PlusGaussian` variants are the noisy
/// signal marginals of the signal-in-noise scenario and have no elementary
/// closed form; they are evaluated by quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Marginal {
    Gaussian { mean: f64, variance: f64 },
    Exponential { rate: f64 },
    /// `Beta(a, 1)`: density `a x^(a-1)` on `(0, 1)`.
    Beta { a: f64 },
    Gamma { shape: f64, scale: f64 },
    /// `scale · χ²_dof`.
    ScaledChiSquared { dof: f64, scale: f64 },
    /// `Exp(rate) + N(0, noise_var)`.
    ExponentialPlusGaussian { rate: f64, noise_var: f64 },
    /// `scale · χ²_3 + N(0, noise_var)`.
    ScaledChi3PlusGaussian { scale: f64, noise_var: f64 },
}

impl Marginal {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Marginal::Gaussian { variance, .. } => variance > 0.0,
            Marginal::Exponential { rate } => rate > 0.0,
            Marginal::Beta { a } => a > 0.0,
            Marginal::Gamma { shape, scale } => shape > 0.0 && scale > 0.0,
            Marginal::ScaledChiSquared { dof, scale } => dof > 0.0 && scale > 0.0,
            Marginal::ExponentialPlusGaussian { rate, noise_var } => rate > 0.0 && noise_var > 0.0,
            Marginal::ScaledChi3PlusGaussian { scale, noise_var } => scale > 0.0 && noise_var > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid marginal parameters: {self:?}")))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::Gaussian { mean, .. } => mean,
            Marginal::Exponential { rate } => 1.0 / rate,
            Marginal::Beta { a } => a / (a + 1.0),
            Marginal::Gamma { shape, scale } => shape * scale,
            Marginal::ScaledChiSquared { dof, scale } => dof * scale,
            Marginal::ExponentialPlusGaussian { rate, .. } => 1.0 / rate,
            Marginal::ScaledChi3PlusGaussian { scale, .. } => 3.0 * scale,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Marginal::Gaussian { variance, .. } => variance,
            Marginal::Exponential { rate } => 1.0 / (rate * rate),
            Marginal::Beta { a } => a / ((a + 1.0).powi(2) * (a + 2.0)),
            Marginal::Gamma { shape, scale } => shape * scale * scale,
            Marginal::ScaledChiSquared { dof, scale } => 2.0 * dof * scale * scale,
            Marginal::ExponentialPlusGaussian { rate, noise_var } => 1.0 / (rate * rate) + noise_var,
            Marginal::ScaledChi3PlusGaussian { scale, noise_var } => 6.0 * scale * scale + noise_var,
        }
    }

    /// Natural log of the density; `-inf` outside the support.
    pub fn ln_pdf(&self, x: f64) -> Result<f64> {
        Ok(match *self {
            Marginal::Gaussian { mean, variance } => {
                -0.5 * (x - mean).powi(2) / variance - 0.5 * variance.ln() - LN_SQRT_2PI
            }
            Marginal::Exponential { rate } => {
                if x < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    rate.ln() - rate * x
                }
            }
            Marginal::Beta { a } => {
                if !(0.0..=1.0).contains(&x) {
                    f64::NEG_INFINITY
                } else if a == 1.0 {
                    0.0
                } else {
                    a.ln() + (a - 1.0) * x.ln()
                }
            }
            Marginal::Gamma { shape, scale } => gamma_ln_pdf(x, shape, scale),
            Marginal::ScaledChiSquared { dof, scale } => gamma_ln_pdf(x, dof / 2.0, 2.0 * scale),
            Marginal::ExponentialPlusGaussian { rate, noise_var } => {
                let sv = noise_var.sqrt();
                rate.ln() - rate * x + 0.5 * noise_var * rate * rate
                    + ln_std_normal_cdf((x - noise_var * rate) / sv)
            }
            Marginal::ScaledChi3PlusGaussian { scale, noise_var } => {
                chi3_plus_gaussian_ln_pdf(x, scale, noise_var)?
            }
        })
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        self.ln_pdf(x).map(f64::exp)
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok(match *self {
            Marginal::Gaussian { mean, variance } => std_normal_cdf((x - mean) / variance.sqrt()),
            Marginal::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Marginal::Beta { a } => x.clamp(0.0, 1.0).powf(a),
            Marginal::Gamma { shape, scale } => gamma_cdf(x, shape, scale),
            Marginal::ScaledChiSquared { dof, scale } => gamma_cdf(x, dof / 2.0, 2.0 * scale),
            Marginal::ExponentialPlusGaussian { rate, noise_var } => {
                let sv = noise_var.sqrt();
                let tail = (-rate * x + 0.5 * noise_var * rate * rate
                    + ln_std_normal_cdf((x - noise_var * rate) / sv))
                .exp();
                (std_normal_cdf(x / sv) - tail).clamp(0.0, 1.0)
            }
            Marginal::ScaledChi3PlusGaussian { scale, noise_var } => {
                chi3_plus_gaussian_cdf(x, scale, noise_var)?
            }
        })
    }

    /// Interval outside of which the density is numerically negligible.
    pub fn effective_support(&self) -> (f64, f64) {
        let spread = 12.0 * self.variance().sqrt();
        match *self {
            Marginal::Gaussian { mean, .. } => (mean - spread, mean + spread),
            Marginal::Exponential { rate } => (0.0, 40.0 / rate),
            Marginal::Beta { .. } => (0.0, 1.0),
            Marginal::Gamma { .. } | Marginal::ScaledChiSquared { .. } => (0.0, self.mean() + 2.0 * spread),
            Marginal::ExponentialPlusGaussian { .. } | Marginal::ScaledChi3PlusGaussian { .. } => {
                (self.mean() - spread, self.mean() + 2.0 * spread)
            }
        }
    }
}

fn gamma_ln_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x < 0.0 || (x == 0.0 && shape > 1.0) {
        return f64::NEG_INFINITY;
    }
    (shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()
}

fn gamma_cdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        statrs::function::gamma::gamma_lr(shape, x / scale)
    }
}

pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

/// `ln Φ(z)`, accurate far into the lower tail.
pub fn ln_std_normal_cdf(z: f64) -> f64 {
    if z > -30.0 {
        std_normal_cdf(z).ln()
    } else {
        // Mills-ratio expansion: Φ(z) ≈ φ(z)/|z| · (1 - 1/z² + 3/z⁴).
        let z2 = z * z;
        -0.5 * z2 - (-z).ln() - LN_SQRT_2PI + (1.0 - 1.0 / z2 + 3.0 / (z2 * z2)).ln()
    }
}

/// `Φ⁻¹(p)`.
pub fn std_normal_quantile(p: f64) -> f64 {
    -SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p)
}

/// Density of `s·χ²_3 + N(0, σ_v²)`:
///
/// `f(x) = √σ_v / (2π s^{3/2}) · exp(-x²/(2σ_v²)) · I(z)`,
/// `I(z) = ∫₀^∞ t^{1/2} exp(-t z - t²/2) dt`, `z = (σ_v² - 2 s x) / (2 s σ_v)`,
/// with `s` the per-latent variance. For `z < 0` the integrand peaks at
/// `t = -z`; completing the square keeps both factors in range.
fn chi3_plus_gaussian_ln_pdf(x: f64, scale: f64, noise_var: f64) -> Result<f64> {
    let sv = noise_var.sqrt();
    let z = (noise_var - 2.0 * scale * x) / (2.0 * scale * sv);
    let ln_c = 0.5 * sv.ln() - (2.0 * PI).ln() - 1.5 * scale.ln();
    let base = ln_c - x * x / (2.0 * noise_var);
    if z >= 0.0 {
        let upper = if z > 0.0 { (60.0 / z).min(14.0) } else { 14.0 };
        let integral = integrate(|t| t.sqrt() * (-t * z - 0.5 * t * t).exp(), 0.0, upper, x)?;
        Ok(base + integral.ln())
    } else {
        let lower = (-z - 14.0).max(0.0);
        let upper = -z + 14.0;
        let integral = integrate(|t| t.sqrt() * (-0.5 * (t + z).powi(2)).exp(), lower, upper, x)?;
        Ok(base + 0.5 * z * z + integral.ln())
    }
}

/// `F(x) = E_s[Φ((x - s)/σ_v)]` over the `s·χ²_3` component.
fn chi3_plus_gaussian_cdf(x: f64, scale: f64, noise_var: f64) -> Result<f64> {
    let sv = noise_var.sqrt();
    let ln_norm = -1.5 * scale.ln() - 0.5 * (2.0 * PI).ln();
    let upper = scale * 120.0;
    let value = integrate(
        |s| {
            if s <= 0.0 {
                0.0
            } else {
                (ln_norm + 0.5 * s.ln() - s / (2.0 * scale)).exp() * std_normal_cdf((x - s) / sv)
            }
        },
        0.0,
        upper,
        x,
    )?;
    Ok(value.clamp(0.0, 1.0))
}

fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, at: f64) -> Result<f64> {
    let out = quadrature::double_exponential::integrate(f, a, b, QUAD_TOL);
    if !out.integral.is_finite() || out.error_estimate > 1e3 * QUAD_TOL.max(QUAD_TOL * out.integral.abs()) {
        return Err(Error::Numerical(format!(
            "quadrature did not converge at x={at}: integral={}, error estimate={:e}, evaluations={}",
            out.integral, out.error_estimate, out.num_function_evaluations
        )));
    }
    Ok(out.integral)
}

/// `ln Γ`, re-exported for the closed-form oracles in tests.
pub fn ln_gamma_fn(x: f64) -> f64 {
    ln_gamma(x)
}
