use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use csfuse::error::{Error, Result};
use csfuse::harness::{self, emit, ExperimentConfig};
use csfuse::ingest::{frame_and_split, load_series, FrameSet, SeriesFormat};
use csfuse::rng;
use csfuse::scenarios::{sample, Hypothesis};

#[derive(Parser)]
#[command(name = "csfuse", version, about = "Compressed-domain detection of dependent multisensor data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// One projection per M for the whole run instead of one per trial.
    #[arg(long)]
    fixed_projection: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Draw scenario vectors and write them as frame containers.
    Gen {
        #[command(flatten)]
        common: Common,
        /// Draws per hypothesis.
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
    /// Monte Carlo ROC curves.
    Roc {
        #[command(flatten)]
        common: Common,
    },
    /// Empirical thresholds under H0.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Also sweep a0 over this grid (`lo:hi:steps`), together with --sweep-inv-lambda0.
        #[arg(long, value_parser = parse_grid)]
        sweep_a0: Option<Grid>,
        #[arg(long, value_parser = parse_grid)]
        sweep_inv_lambda0: Option<Grid>,
    },
    /// Bhattacharyya distances, error bounds and the comparison rule.
    Bounds {
        #[command(flatten)]
        common: Common,
    },
    /// Time one decision statistic per setting.
    Bench {
        #[command(flatten)]
        common: Common,
    },
    /// Frame a recorded series into train and test containers.
    Ingest(IngestArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Raw,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// CSV column holding the samples.
    #[arg(long)]
    column: Option<String>,
    #[arg(long = "frame-size")]
    frame_size: usize,
    /// Training frames per label.
    #[arg(long)]
    train: usize,
    /// Test frames per label.
    #[arg(long)]
    test: usize,
    /// Emit only this label. Without it both labels are emitted and --h0-range is required.
    #[arg(long, value_parser = parse_hypothesis)]
    label: Option<Hypothesis>,
    /// Sample range `a:b` (end exclusive) of the background segment.
    #[arg(long, value_parser = parse_range)]
    h0_range: Option<(usize, usize)>,
    /// Sample range of the H1 segment; defaults to the rest of the series after --h0-range.
    #[arg(long, value_parser = parse_range)]
    h1_range: Option<(usize, usize)>,
    /// Sample rate recorded in the output metadata.
    #[arg(long)]
    sample_rate: Option<f64>,
    #[arg(long)]
    allow_empty_train: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn parse_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or("expected a:b")?;
    let a: usize = a.parse().map_err(|e| format!("{e}"))?;
    let b: usize = b.parse().map_err(|e| format!("{e}"))?;
    if b <= a {
        return Err(format!("empty range {a}:{b}"));
    }
    Ok((a, b))
}

/// Evenly spaced sweep values; a newtype so clap takes one `lo:hi:steps` token.
#[derive(Clone)]
struct Grid(Vec<f64>);

fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, steps] = parts.as_slice() else {
        return Err("expected lo:hi:steps".into());
    };
    let lo: f64 = lo.parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = hi.parse().map_err(|e| format!("{e}"))?;
    let steps: usize = steps.parse().map_err(|e| format!("{e}"))?;
    match steps {
        0 => Err("steps must be positive".into()),
        1 => Ok(Grid(vec![lo])),
        _ => Ok(Grid((0..steps).map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64).collect())),
    }
}

fn parse_hypothesis(s: &str) -> std::result::Result<Hypothesis, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    cfg.fixed_projection |= common.fixed_projection;
    Ok(cfg)
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(f)
}

fn gen(cfg: &ExperimentConfig, count: usize) -> Result<()> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let dim = cfg.scenario.dim();
    for h in [Hypothesis::H0, Hypothesis::H1] {
        let frames = (0..count)
            .map(|k| sample(&cfg.scenario, h, rng::derive(cfg.seed, &[k as u64, h.tag(), rng::TAG_FRAME, 0])).map(|v| v.as_slice().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let mut set = FrameSet::new(dim, frames, h)?;
        set.source = format!("{}:{}", cfg.scenario.id, cfg.seed);
        let path = cfg.output_dir.join(format!("{h}.csfuse"));
        set.write(&path)?;
        println!("wrote {count} draws of length {dim} to {}", path.display());
    }
    Ok(())
}

fn ingest(args: &IngestArgs) -> Result<()> {
    let format = match args.format {
        Format::Csv => SeriesFormat::Csv {
            column: args
                .column
                .clone()
                .ok_or_else(|| Error::Config("--column is required for csv input".into()))?,
        },
        Format::Raw => SeriesFormat::RawF64Le,
    };
    let series = load_series(&args.input, &format)?;
    let len = series.len();
    let check = |(a, b): (usize, usize)| -> Result<(usize, usize)> {
        if b > len {
            return Err(Error::InsufficientData(format!("range {a}:{b} exceeds series length {len}")));
        }
        Ok((a, b))
    };
    let range_for = |h: Hypothesis| -> Result<(usize, usize)> {
        match h {
            Hypothesis::H0 => check(args.h0_range.unwrap_or((0, len))),
            Hypothesis::H1 => match (args.h1_range, args.h0_range) {
                (Some(r), _) => check(r),
                (None, Some((_, b))) if b < len => Ok((b, len)),
                (None, Some(_)) => Err(Error::InsufficientData("no samples left after --h0-range".into())),
                (None, None) => Ok((0, len)),
            },
        }
    };
    let labels = match args.label {
        Some(h) => vec![h],
        None if args.h0_range.is_some() => vec![Hypothesis::H0, Hypothesis::H1],
        None => return Err(Error::Config("give --label or --h0-range".into())),
    };
    std::fs::create_dir_all(&args.out)?;
    let stem = args.input.file_stem().and_then(|s| s.to_str()).unwrap_or("series").to_string();
    for h in labels {
        let (a, b) = range_for(h)?;
        let (mut train, mut test) =
            frame_and_split(&series[a..b], args.frame_size, args.train, args.test, h, args.allow_empty_train)?;
        for (set, part) in [(&mut train, "train"), (&mut test, "test")] {
            set.source = format!("{}[{a}:{b}]", args.input.display());
            set.sample_rate = args.sample_rate;
            let path = args.out.join(format!("{stem}_{h}_{part}.csfuse"));
            set.write(&path)?;
            println!("wrote {} {h} {part} frames of {} to {}", set.len(), set.n, path.display());
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { common, count } => gen(&load_config(&common)?, count),
        Command::Roc { common } => {
            let cfg = load_config(&common)?;
            let curves = with_threads(common.threads, || harness::run_roc(&cfg))?;
            for c in &curves {
                println!("{:<20} c_r={:<6} T={:<3} AUC={:.4}", c.detector, c.c_r, c.t, c.auc);
            }
            emit::write_roc(&cfg.output_dir, &curves)
        }
        Command::Calibrate { common, sweep_a0, sweep_inv_lambda0 } => {
            let cfg = load_config(&common)?;
            let records = with_threads(common.threads, || harness::run_calibrate(&cfg))?;
            for r in &records {
                println!(
                    "{:<20} c_r={:<6} T={:<3} alpha={:<5} threshold={:.6e} pf={:.4} analytic={}",
                    r.detector,
                    r.c_r,
                    r.t,
                    r.calibration.alpha,
                    r.calibration.threshold,
                    r.calibration.achieved_pf,
                    r.analytic_threshold.map(|v| format!("{v:.6e}")).unwrap_or_else(|| "-".into())
                );
            }
            emit::write_calibration(&cfg.output_dir, &records)?;
            if sweep_a0.is_some() || sweep_inv_lambda0.is_some() {
                let a0 = sweep_a0.map(|g| g.0).unwrap_or_else(|| vec![cfg.scenario.params.a0]);
                let il = sweep_inv_lambda0.map(|g| g.0).unwrap_or_else(|| vec![cfg.scenario.params.inv_lambda0]);
                let cells = with_threads(common.threads, || harness::threshold_surface(&cfg, &a0, &il))?;
                emit::write_surface(&cfg.output_dir, &cells)?;
            }
            Ok(())
        }
        Command::Bounds { common } => {
            let cfg = load_config(&common)?;
            let result = with_threads(common.threads, || harness::run_bounds(&cfg))?;
            for r in &result.rows {
                println!("{:<20} c_r={:<6} D_B={:.6} P_ub={:.4e}", r.report.approach, r.c_r, r.report.d_b, r.report.p_ub);
            }
            emit::write_bounds(&cfg.output_dir, &result.rows)?;
            let json = serde_json::to_string_pretty(&result)?;
            std::fs::write(cfg.output_dir.join("bounds.json"), json)?;
            Ok(())
        }
        Command::Bench { common } => {
            let cfg = load_config(&common)?;
            let rows = with_threads(Some(common.threads.unwrap_or(1)), || harness::run_bench(&cfg))?;
            for r in &rows {
                println!("{:<20} N={:<5} M={:<5} T={:<3} {:.4e} s", r.approach, r.n, r.m, r.t, r.mean_seconds);
            }
            emit::write_timing(&cfg.output_dir, &rows)
        }
        Command::Ingest(args) => ingest(&args),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
