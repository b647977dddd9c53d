//! Uncompressed LLR that multiplies marginals and ignores dependence.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::scenarios::{Hypothesis, Marginal, ScenarioSpec};

/// Per-sensor marginal pairs `(f₀, f₁)` for a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductLlr {
    n: usize,
    marginals: Vec<(Marginal, Marginal)>,
}

impl ProductLlr {
    pub fn new(spec: &ScenarioSpec) -> Result<Self> {
        spec.validate()?;
        let marginals = (0..spec.sensors())
            .map(|j| Ok((spec.marginal(j, Hypothesis::H0)?, spec.marginal(j, Hypothesis::H1)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n: spec.n, marginals })
    }

    /// Builds from explicit marginals, one `(f₀, f₁)` pair per sensor.
    pub fn from_marginals(n: usize, marginals: Vec<(Marginal, Marginal)>) -> Result<Self> {
        if n == 0 || marginals.is_empty() {
            return Err(Error::InvalidDimension("product LLR needs n > 0 and at least one sensor".into()));
        }
        Ok(Self { n, marginals })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn sensors(&self) -> usize {
        self.marginals.len()
    }

    pub fn marginals(&self) -> &[(Marginal, Marginal)] {
        &self.marginals
    }

    /// `log f₁(v)/f₀(v)` for one coordinate of sensor `j`. A zero H0 density
    /// at an observed point yields `+inf`.
    pub fn log_ratio(&self, j: usize, v: f64) -> Result<f64> {
        let (f0, f1) = &self.marginals[j];
        let l0 = f0.ln_pdf(v)?;
        if l0 == f64::NEG_INFINITY {
            return Ok(f64::INFINITY);
        }
        Ok(f1.ln_pdf(v)? - l0)
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n * self.sensors() {
            return Err(Error::InvalidDimension(format!(
                "observation length {} is not N*L = {}",
                x.len(),
                self.n * self.sensors()
            )));
        }
        let mut total = 0.0;
        let mut zero_h0 = 0usize;
        for (j, chunk) in x.chunks_exact(self.n).enumerate() {
            for &v in chunk {
                let r = self.log_ratio(j, v)?;
                if r == f64::INFINITY {
                    zero_h0 += 1;
                }
                total += r;
            }
        }
        if zero_h0 > 0 {
            log::debug!("{zero_h0} coordinate(s) have zero H0 density; product LLR is +inf");
            return Ok(f64::INFINITY);
        }
        Ok(total)
    }
}

/// `Σ_l Σ_n log f₁(x_l[n]) / f₀(x_l[n])`.
pub fn llr_product(x: &DVector<f64>, spec: &ScenarioSpec) -> Result<f64> {
    ProductLlr::new(spec)?.score(x.as_slice())
}
