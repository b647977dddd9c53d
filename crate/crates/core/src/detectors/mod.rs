//! Test statistics. Every statistic is a pure function of its inputs; the
//! fitted/precomputed objects (`GaussianModel`, `CopulaLlr`, `LsPattern`) are
//! immutable and can be shared across parallel trials.

pub mod copula;
pub mod covariance;
pub mod energy;
pub mod gaussian;
pub mod product;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use copula::{fit_copula, fit_from_scenario, kendall_tau, llr_copula, CopulaFamily, CopulaLlr, CopulaScore, CopulaSpec};
pub use covariance::{cav_stat, cross_sensor_pairs, ls_offdiag, sample_cov, LsMode, LsPattern, OffDiagEstimate};
pub use energy::{energy_stat, energy_threshold, Domain, EnergyVariance, Threshold};
pub use gaussian::{build_gaussian_model, invert_spd, llr_ga, nested_block_inverse, GaussianModel, InversionInfo};
pub use product::{llr_product, ProductLlr};

/// Detectors addressable by name in harness configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorKind {
    CompressedGa,
    Product,
    Copula(CopulaFamily),
    UncompressedEnergy,
    CompressedEnergy,
    CompressedCov,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 8] = [
        DetectorKind::CompressedGa,
        DetectorKind::Product,
        DetectorKind::Copula(CopulaFamily::Gaussian),
        DetectorKind::Copula(CopulaFamily::Clayton),
        DetectorKind::Copula(CopulaFamily::Gumbel),
        DetectorKind::UncompressedEnergy,
        DetectorKind::CompressedEnergy,
        DetectorKind::CompressedCov,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::CompressedGa => "c:GA",
            DetectorKind::Product => "u:product",
            DetectorKind::Copula(CopulaFamily::Gaussian) => "u:copula-gaussian",
            DetectorKind::Copula(CopulaFamily::Clayton) => "u:copula-clayton",
            DetectorKind::Copula(CopulaFamily::Gumbel) => "u:copula-gumbel",
            DetectorKind::UncompressedEnergy => "u:energy",
            DetectorKind::CompressedEnergy => "c:energy",
            DetectorKind::CompressedCov => "c:cov",
        }
    }

    /// Works on `y = A x` rather than `x`.
    pub fn is_compressed(self) -> bool {
        matches!(self, DetectorKind::CompressedGa | DetectorKind::CompressedEnergy | DetectorKind::CompressedCov)
    }

    /// Statistic uses several frames per decision (the others use only the first).
    pub fn uses_frames(self) -> bool {
        matches!(
            self,
            DetectorKind::UncompressedEnergy | DetectorKind::CompressedEnergy | DetectorKind::CompressedCov
        )
    }

    pub fn min_frames(self) -> usize {
        if self == DetectorKind::CompressedCov {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DetectorKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                let known: Vec<_> = DetectorKind::ALL.iter().map(|k| k.name()).collect();
                Error::Config(format!("unknown detector '{s}'; expected one of {}", known.join(", ")))
            })
    }
}

impl Serialize for DetectorKind {
    fn serialize<Ser: serde::Serializer>(&self, serializer: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for DetectorKind {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
