//! Energy detectors and their Gaussian-approximation thresholds.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scenarios::marginal::std_normal_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Compressed,
    Uncompressed,
}

/// Which per-coordinate variance of `x²` the threshold uses for the
/// exponential sensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyVariance {
    /// `Var(x²) = 20/λ⁴` for `x ~ Exp(λ)`.
    #[default]
    Corrected,
    /// `20/λ²`. Dimensionally inconsistent; kept so both thresholds can be compared.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub value: f64,
    pub mean: f64,
    pub std: f64,
}

/// `Σ_t ‖frame_t‖²`. The domain only matters to the caller.
pub fn energy_stat<S: Scalar>(frames: &[DVector<S>], _domain: Domain) -> Result<S> {
    if frames.is_empty() {
        return Err(Error::InsufficientData("energy statistic needs at least one frame".into()));
    }
    Ok(frames.iter().fold(S::zero(), |acc, f| acc + f.norm_squared()))
}

/// Threshold for an exponential(`lambda0`) sensor paired with a
/// Beta(`a0`, 1) sensor under H0, so that `P_f ≈ alpha0` at `len·t`
/// coordinates per sensor (`len` is `N` uncompressed or `M` compressed).
pub fn energy_threshold(
    _domain: Domain,
    alpha0: f64,
    lambda0: f64,
    a0: f64,
    len: usize,
    t: usize,
    variance: EnergyVariance,
) -> Result<Threshold> {
    if !(alpha0 > 0.0 && alpha0 < 1.0) {
        return Err(Error::Config(format!("alpha0 must lie in (0, 1), got {alpha0}")));
    }
    if !(lambda0 > 0.0 && a0 > 0.0) || len == 0 || t == 0 {
        return Err(Error::Config("energy threshold needs lambda0, a0 > 0 and non-empty frames".into()));
    }
    let count = (len * t) as f64;
    let mean_per = 2.0 / lambda0.powi(2) + a0 / (a0 + 2.0);
    let exp_var = match variance {
        EnergyVariance::Corrected => 20.0 / lambda0.powi(4),
        EnergyVariance::Printed => 20.0 / lambda0.powi(2),
    };
    let var_per = exp_var + 4.0 * a0 / ((a0 + 4.0) * (a0 + 2.0).powi(2));
    let mean = count * mean_per;
    let std = (count * var_per).sqrt();
    // Q⁻¹(α) = Φ⁻¹(1 - α)
    let value = mean + std_normal_quantile(1.0 - alpha0) * std;
    Ok(Threshold { value, mean, std })
}
