//! Expands a config into detector settings and scores one Monte Carlo trial.
//!
//! Every random quantity in a trial comes from a seed derived from the
//! master seed and the trial index, so trials can run in any order and on
//! any number of threads with identical results.

use std::collections::BTreeMap;

use nalgebra::DVector;

use super::config::{compressed_dim, ExperimentConfig};
use crate::detectors::{
    build_gaussian_model, cross_sensor_pairs, energy_stat, fit_from_scenario, sample_cov, CopulaFamily, CopulaLlr,
    DetectorKind, Domain, EnergyVariance, GaussianModel, LsMode, LsPattern, ProductLlr,
};
use crate::error::{Error, Result};
use crate::linops::BlockProjection;
use crate::rng;
use crate::scenarios::{closed_form_stats, sample, Hypothesis, HypothesisStats, ScenarioSpec};

/// One (detector, c_r, T) combination.
#[derive(Debug, Clone, PartialEq)]
pub struct Setting {
    pub kind: DetectorKind,
    /// `1.0` for uncompressed detectors.
    pub c_r: f64,
    /// Compressed dimension per sensor; `N` for uncompressed detectors.
    pub m: usize,
    pub t: usize,
    pub mode: LsMode,
    pub tied: bool,
    pub energy_variance: EnergyVariance,
}

/// Projection plus whatever was precomputed for it.
#[derive(Debug, Clone)]
pub struct ProjectionContext {
    pub bp: BlockProjection<f64>,
    pub ga: Option<GaussianModel<f64>>,
    patterns: Vec<((LsMode, bool), LsPattern<f64>)>,
}

impl ProjectionContext {
    fn pattern(&self, mode: LsMode, tied: bool) -> Result<&LsPattern<f64>> {
        self.patterns
            .iter()
            .find(|(k, _)| *k == (mode, tied))
            .map(|(_, p)| p)
            .ok_or_else(|| Error::Config("least-squares pattern missing for setting".into()))
    }
}

#[derive(Debug, Clone, Default)]
struct Needs {
    ga: bool,
    patterns: Vec<(LsMode, bool)>,
}

pub struct Plan {
    spec: ScenarioSpec,
    settings: Vec<Setting>,
    master: u64,
    fixed_projection: bool,
    stats: Option<HypothesisStats>,
    product: Option<ProductLlr>,
    copulas: Vec<(CopulaFamily, CopulaLlr)>,
    needs: BTreeMap<usize, Needs>,
    fixed: BTreeMap<usize, ProjectionContext>,
    u_set: Vec<(usize, usize)>,
    max_t: usize,
}

impl Plan {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let spec = cfg.scenario.clone();
        let n = spec.n;
        let mut settings = Vec::new();
        for d in &cfg.detectors {
            let c_rs: Vec<f64> = if d.name.is_compressed() { d.c_r.clone() } else { vec![1.0] };
            for &c_r in &c_rs {
                for &t in &d.t {
                    settings.push(Setting {
                        kind: d.name,
                        c_r,
                        m: if d.name.is_compressed() { compressed_dim(n, c_r) } else { n },
                        t,
                        mode: d.mode,
                        tied: d.tied,
                        energy_variance: d.energy_variance,
                    });
                }
            }
        }
        let mut needs: BTreeMap<usize, Needs> = BTreeMap::new();
        for s in settings.iter().filter(|s| s.kind.is_compressed()) {
            let entry = needs.entry(s.m).or_default();
            match s.kind {
                DetectorKind::CompressedGa => entry.ga = true,
                DetectorKind::CompressedCov if !entry.patterns.contains(&(s.mode, s.tied)) => {
                    entry.patterns.push((s.mode, s.tied));
                }
                _ => {}
            }
        }
        let stats = if needs.values().any(|n| n.ga) {
            Some(closed_form_stats(&spec)?)
        } else {
            None
        };
        let product = if settings.iter().any(|s| s.kind == DetectorKind::Product) {
            Some(ProductLlr::new(&spec)?)
        } else {
            None
        };
        let mut copulas = Vec::new();
        for d in &cfg.detectors {
            if let DetectorKind::Copula(family) = d.name {
                if copulas.iter().any(|(f, _)| *f == family) {
                    continue;
                }
                let seed = rng::derive(cfg.seed, &[rng::TAG_FIT, family as u64]);
                let cop = fit_from_scenario(&spec, family, d.fit_samples, seed)?;
                log::info!("fitted {family} copula: {cop:?}");
                copulas.push((family, CopulaLlr::new(&spec, cop, None)?));
            }
        }
        let l = spec.sensors();
        let u_set: Vec<(usize, usize)> = (0..l)
            .flat_map(|j| ((j + 1)..l).flat_map(move |k| cross_sensor_pairs(n, j, k)))
            .collect();
        let max_t = settings.iter().map(|s| s.t).max().unwrap_or(1);
        let mut plan = Self {
            spec,
            settings,
            master: cfg.seed,
            fixed_projection: cfg.fixed_projection,
            stats,
            product,
            copulas,
            needs,
            fixed: BTreeMap::new(),
            u_set,
            max_t,
        };
        if plan.fixed_projection {
            plan.fixed = plan.build_contexts(None)?;
        }
        Ok(plan)
    }

    pub fn settings(&self) -> &[Setting] {
        &self.settings
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn master_seed(&self) -> u64 {
        self.master
    }

    pub fn max_t(&self) -> usize {
        self.max_t
    }

    /// The fitted copula detector for `family`, if one is configured.
    pub fn copula(&self, family: CopulaFamily) -> Option<&CopulaLlr> {
        self.copulas.iter().find(|(f, _)| *f == family).map(|(_, c)| c)
    }

    /// Seed of the projection with `M` rows per block, for trial `trial`
    /// (ignored with a fixed projection).
    pub fn projection_seed(&self, m: usize, trial: Option<usize>) -> u64 {
        match trial {
            Some(k) if !self.fixed_projection => rng::derive(self.master, &[rng::TAG_PROJECTION, m as u64, k as u64]),
            _ => rng::derive(self.master, &[rng::TAG_PROJECTION, m as u64]),
        }
    }

    /// Builds every projection context this plan needs.
    pub fn build_contexts(&self, trial: Option<usize>) -> Result<BTreeMap<usize, ProjectionContext>> {
        let mut out = BTreeMap::new();
        for (&m, needs) in &self.needs {
            let bp = BlockProjection::random(m, self.spec.n, self.spec.sensors(), self.projection_seed(m, trial))?;
            let ga = match (&self.stats, needs.ga) {
                (Some(stats), true) => Some(build_gaussian_model(stats, &bp)?),
                _ => None,
            };
            let patterns = needs
                .patterns
                .iter()
                .map(|&(mode, tied)| Ok(((mode, tied), LsPattern::new(&bp, &self.u_set, mode, tied)?)))
                .collect::<Result<Vec<_>>>()?;
            out.insert(m, ProjectionContext { bp, ga, patterns });
        }
        Ok(out)
    }

    /// Frame `index` of trial `trial` under `h`. Identical for every
    /// detector, so all settings are scored on paired data.
    pub fn frame(&self, trial: usize, h: Hypothesis, index: usize) -> Result<DVector<f64>> {
        sample(
            &self.spec,
            h,
            rng::derive(self.master, &[trial as u64, h.tag(), rng::TAG_FRAME, index as u64]),
        )
    }

    pub fn frames(&self, trial: usize, h: Hypothesis, t: usize) -> Result<Vec<DVector<f64>>> {
        (0..t).map(|i| self.frame(trial, h, i)).collect()
    }

    /// Scores every setting on trial `trial` for each hypothesis in `hyps`.
    /// Returns `[hypothesis][setting]`.
    pub fn score_trial(&self, trial: usize, hyps: &[Hypothesis]) -> Result<Vec<Vec<f64>>> {
        let owned;
        let contexts = if self.fixed_projection {
            &self.fixed
        } else {
            owned = self.build_contexts(Some(trial))?;
            &owned
        };
        hyps.iter()
            .map(|&h| {
                let x = self.frames(trial, h, self.max_t)?;
                let compressed: BTreeMap<usize, Vec<DVector<f64>>> = contexts
                    .iter()
                    .map(|(&m, ctx)| Ok((m, x.iter().map(|f| ctx.bp.compress(f)).collect::<Result<Vec<_>>>()?)))
                    .collect::<Result<_>>()?;
                self.settings
                    .iter()
                    .map(|s| {
                        let ctx = contexts.get(&s.m);
                        let y = compressed.get(&s.m).map(Vec::as_slice);
                        self.score(s, &x[..s.t], y.map(|y| &y[..s.t]), ctx)
                    })
                    .collect()
            })
            .collect()
    }

    /// Scores one setting. `y` holds the compressed frames when already
    /// available; otherwise they are computed from `x` with `ctx`.
    pub fn score(
        &self,
        s: &Setting,
        x: &[DVector<f64>],
        y: Option<&[DVector<f64>]>,
        ctx: Option<&ProjectionContext>,
    ) -> Result<f64> {
        let owned;
        let y = if s.kind.is_compressed() {
            let ctx = ctx.ok_or_else(|| Error::Config(format!("{} needs a projection context", s.kind)))?;
            match y {
                Some(y) => y,
                None => {
                    owned = x.iter().map(|f| ctx.bp.compress(f)).collect::<Result<Vec<_>>>()?;
                    &owned
                }
            }
        } else {
            &[]
        };
        match s.kind {
            DetectorKind::CompressedGa => {
                let model = ctx
                    .and_then(|c| c.ga.as_ref())
                    .ok_or_else(|| Error::Config("c:GA model missing".into()))?;
                y.iter().map(|v| model.llr(v)).sum()
            }
            DetectorKind::Product => {
                let p = self.product.as_ref().ok_or_else(|| Error::Config("product LLR missing".into()))?;
                x.iter().map(|v| p.score(v.as_slice())).sum()
            }
            DetectorKind::Copula(family) => {
                let c = self
                    .copula(family)
                    .ok_or_else(|| Error::Config(format!("{family} copula missing")))?;
                x.iter().map(|v| c.score(v.as_slice()).map(|s| s.value)).sum()
            }
            DetectorKind::UncompressedEnergy => energy_stat(x, Domain::Uncompressed),
            DetectorKind::CompressedEnergy => energy_stat(y, Domain::Compressed),
            DetectorKind::CompressedCov => {
                let pattern = ctx.expect("checked above").pattern(s.mode, s.tied)?;
                Ok(pattern.solve(&sample_cov(y, None)?)?.lambda_cov)
            }
        }
    }

    /// Contexts for the fixed projection (built on demand when the plan is per-trial).
    pub fn fixed_contexts(&self) -> Result<BTreeMap<usize, ProjectionContext>> {
        if self.fixed_projection {
            Ok(self.fixed.clone())
        } else {
            self.build_contexts(None)
        }
    }
}
