//! Wall-clock cost of one decision statistic per setting.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::plan::Plan;
use crate::error::Result;
use crate::scenarios::Hypothesis;

/// Distinct inputs cycled through during timing so caches do not flatter
/// the cheaper statistics.
const INPUT_POOL: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub approach: String,
    pub n: usize,
    pub m: usize,
    pub c_r: f64,
    pub t: usize,
    pub mean_seconds: f64,
    pub std_seconds: f64,
    pub evals: usize,
}

/// Times every setting of `cfg` on a fixed projection. Compression of the
/// raw frames is part of the timed work for compressed detectors.
/// Runs single-threaded; wrap in a one-thread pool to keep rayon out of it.
pub fn run_bench(cfg: &ExperimentConfig) -> Result<Vec<TimingRow>> {
    let plan = Plan::new(cfg)?;
    let contexts = plan.fixed_contexts()?;
    let inputs = (0..INPUT_POOL)
        .map(|k| plan.frames(k, Hypothesis::H1, plan.max_t()))
        .collect::<Result<Vec<_>>>()?;
    let evals = cfg.bench_evals.max(1);
    let mut rows = Vec::with_capacity(plan.settings().len());
    for s in plan.settings() {
        let ctx = contexts.get(&s.m);
        let mut sink = 0.0;
        for i in 0..cfg.bench_warmup {
            sink += plan.score(s, &inputs[i % INPUT_POOL][..s.t], None, ctx)?;
        }
        let mut times = Vec::with_capacity(evals);
        for i in 0..evals {
            let x = &inputs[i % INPUT_POOL][..s.t];
            let start = Instant::now();
            sink += plan.score(s, x, None, ctx)?;
            times.push(start.elapsed().as_secs_f64());
        }
        std::hint::black_box(sink);
        let mean = times.iter().sum::<f64>() / evals as f64;
        let var = if evals > 1 {
            times.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (evals - 1) as f64
        } else {
            0.0
        };
        log::info!("{} c_r={} T={}: {:.3e} s", s.kind, s.c_r, s.t, mean);
        rows.push(TimingRow {
            approach: s.kind.name().to_string(),
            n: cfg.scenario.n,
            m: s.m,
            c_r: s.c_r,
            t: s.t,
            mean_seconds: mean,
            std_seconds: var.sqrt(),
            evals,
        });
    }
    Ok(rows)
}
