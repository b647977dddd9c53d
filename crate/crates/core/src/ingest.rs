//! Recorded-series pipeline: loading, framing, train/test split, KDE
//! marginals and empirical compressed-domain Gaussian models.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::detectors::{sample_cov, GaussianModel};
use crate::error::{Error, Result};
use crate::linops::BlockProjection;
use crate::scalar::Scalar;
use crate::scenarios::Hypothesis;

pub const FRAMESET_MAGIC: &[u8; 8] = b"CSFUSE01";
pub const KDE_GRID: usize = 4096;
pub const MIN_KDE_SAMPLES: usize = 30;
/// KDE densities are floored here before taking logs.
const DENSITY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SeriesFormat {
    /// Named numeric column of a headed CSV file.
    Csv { column: String },
    /// Bare little-endian `f64` values.
    RawF64Le,
}

pub fn load_series(path: &Path, format: &SeriesFormat) -> Result<Vec<f64>> {
    let values = match format {
        SeriesFormat::Csv { column } => {
            let mut reader = csv::Reader::from_path(path)?;
            let idx = reader
                .headers()?
                .iter()
                .position(|h| h.trim() == column)
                .ok_or_else(|| Error::Parse {
                    line: 1,
                    reason: format!("no column named '{column}'"),
                })?;
            let mut out = Vec::new();
            for (row, record) in reader.records().enumerate() {
                let record = record?;
                // Header is line 1.
                let line = record.position().map_or(row + 2, |p| p.line() as usize);
                let field = record.get(idx).ok_or_else(|| Error::Parse {
                    line,
                    reason: format!("missing field for column '{column}'"),
                })?;
                let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                    line,
                    reason: format!("'{field}' is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        line,
                        reason: format!("non-finite value '{field}'"),
                    });
                }
                out.push(v);
            }
            out
        }
        SeriesFormat::RawF64Le => {
            let mut bytes = Vec::new();
            BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
            if bytes.len() % 8 != 0 {
                return Err(Error::Parse {
                    line: 0,
                    reason: format!("raw file length {} is not a multiple of 8", bytes.len()),
                });
            }
            let out: Vec<f64> = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            if let Some(i) = out.iter().position(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    line: i,
                    reason: format!("non-finite value at sample {i}"),
                });
            }
            out
        }
    };
    Ok(values)
}

pub fn write_raw_series(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Equal-length, non-overlapping frames cut from one source series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameSet {
    pub n: usize,
    pub frames: Vec<Vec<f64>>,
    pub label: Hypothesis,
    pub source: String,
    pub sample_rate: Option<f64>,
}

impl FrameSet {
    pub fn new(n: usize, frames: Vec<Vec<f64>>, label: Hypothesis) -> Result<Self> {
        if frames.iter().any(|f| f.len() != n) {
            return Err(Error::InvalidDimension(format!("every frame must have length {n}")));
        }
        Ok(Self {
            n,
            frames,
            label,
            source: String::new(),
            sample_rate: None,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// All samples, frame after frame.
    pub fn pooled(&self) -> Vec<f64> {
        self.frames.concat()
    }

    /// Binary layout: magic, `u32` N, `u32` count, then `f64` samples, all little-endian.
    pub fn write(&self, path: &Path) -> Result<()> {
        let n = u32::try_from(self.n).map_err(|_| Error::InvalidDimension("frame size exceeds u32".into()))?;
        let count = u32::try_from(self.len()).map_err(|_| Error::InvalidDimension("frame count exceeds u32".into()))?;
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(FRAMESET_MAGIC)?;
        w.write_all(&n.to_le_bytes())?;
        w.write_all(&count.to_le_bytes())?;
        for v in self.frames.iter().flatten() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a container; label and metadata are not stored and must be supplied.
    pub fn read(path: &Path, label: Hypothesis) -> Result<Self> {
        let mut bytes = Vec::new();
        BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
        let bad = |reason: String| Error::Parse { line: 0, reason };
        if bytes.len() < 16 || &bytes[..8] != FRAMESET_MAGIC {
            return Err(bad("missing CSFUSE01 header".into()));
        }
        let n = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
        let count = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
        let payload = &bytes[16..];
        if payload.len() != n * count * 8 {
            return Err(bad(format!("payload is {} bytes, header promises {}", payload.len(), n * count * 8)));
        }
        let values: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let frames = if n == 0 { Vec::new() } else { values.chunks(n).map(<[f64]>::to_vec).collect() };
        let mut fs = FrameSet::new(n, frames, label)?;
        fs.source = path.display().to_string();
        Ok(fs)
    }
}

/// Number of whole frames of size `n` in `len` samples.
pub fn available_frames(len: usize, n: usize) -> usize {
    len.checked_div(n).unwrap_or(0)
}

/// Removes the series mean, then takes `n_tr` training frames followed by
/// `n_mont` test frames from the front.
pub fn frame_and_split(
    series: &[f64],
    n: usize,
    n_tr: usize,
    n_mont: usize,
    label: Hypothesis,
    allow_empty_train: bool,
) -> Result<(FrameSet, FrameSet)> {
    if n == 0 {
        return Err(Error::Config("frame size must be positive".into()));
    }
    if n_tr == 0 && !allow_empty_train {
        return Err(Error::Config("zero training frames requires the test-only flag".into()));
    }
    let required = n * (n_tr + n_mont);
    if series.len() < required {
        return Err(Error::InsufficientData(format!(
            "need {required} samples for {} frames of {n}, series has {}",
            n_tr + n_mont,
            series.len()
        )));
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let mut frames = series[..required].chunks_exact(n).map(|c| c.iter().map(|v| v - mean).collect::<Vec<_>>());
    let train: Vec<_> = frames.by_ref().take(n_tr).collect();
    let test: Vec<_> = frames.collect();
    Ok((FrameSet::new(n, train, label)?, FrameSet::new(n, test, label)?))
}

/// Joins per-sensor frame sets into sensor-major vectors of length `N·L`.
pub fn stack_sensors(sets: &[FrameSet]) -> Result<Vec<DVector<f64>>> {
    let first = sets.first().ok_or_else(|| Error::Config("need at least one sensor".into()))?;
    if sets.iter().any(|s| s.len() != first.len() || s.n != first.n) {
        return Err(Error::InvalidDimension("sensor frame sets differ in frame size or count".into()));
    }
    Ok((0..first.len())
        .map(|t| DVector::from_iterator(first.n * sets.len(), sets.iter().flat_map(|s| s.frames[t].iter().copied())))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "rule", content = "value")]
pub enum Bandwidth {
    /// `0.9·min(σ̂, IQR/1.34)·m^{-1/5}`.
    #[default]
    Silverman,
    Fixed(f64),
}

/// Gaussian-kernel density estimate tabulated on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Kde {
    bandwidth: f64,
    lo: f64,
    step: f64,
    pdf: Vec<f64>,
    cdf: Vec<f64>,
}

impl Kde {
    pub fn fit(samples: &[f64], rule: Bandwidth) -> Result<Self> {
        let m = samples.len();
        if m < MIN_KDE_SAMPLES {
            return Err(Error::Fit {
                family: "kde".into(),
                reason: format!("needs at least {MIN_KDE_SAMPLES} samples, got {m}"),
            });
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::Fit {
                family: "kde".into(),
                reason: "non-finite sample".into(),
            });
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (min, max) = (sorted[0], sorted[m - 1]);
        let range = max - min;
        let floor = 1e-6 * if range > 0.0 { range } else { 1.0 };
        let h = match rule {
            Bandwidth::Fixed(h) if h > 0.0 => h,
            Bandwidth::Fixed(h) => {
                return Err(Error::Config(format!("bandwidth must be positive, got {h}")));
            }
            Bandwidth::Silverman => {
                let mean = sorted.iter().sum::<f64>() / m as f64;
                let sd = (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt();
                let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
                let spread = match (sd > 0.0, iqr > 0.0) {
                    (true, true) => sd.min(iqr / 1.34),
                    _ => sd.max(iqr / 1.34),
                };
                0.9 * spread * (m as f64).powf(-0.2)
            }
        }
        .max(floor);
        let lo = min - 5.0 * h;
        let step = (range + 10.0 * h) / (KDE_GRID - 1) as f64;

        // Linear binning of the samples onto the grid.
        let mut weights = vec![0.0; KDE_GRID];
        for &v in &sorted {
            let pos = (v - lo) / step;
            let i = (pos.floor() as usize).min(KDE_GRID - 2);
            let frac = pos - i as f64;
            weights[i] += 1.0 - frac;
            weights[i + 1] += frac;
        }
        // Discrete convolution with the kernel truncated at 5h.
        let radius = ((5.0 * h / step).ceil() as usize).min(KDE_GRID - 1);
        let norm = 1.0 / (m as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
        let kernel: Vec<f64> = (0..=radius)
            .map(|k| {
                let z = k as f64 * step / h;
                (-0.5 * z * z).exp() * norm
            })
            .collect();
        let mut pdf = vec![0.0; KDE_GRID];
        for (i, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let a = i.saturating_sub(radius);
            let b = (i + radius).min(KDE_GRID - 1);
            for (j, p) in pdf.iter_mut().enumerate().take(b + 1).skip(a) {
                *p += w * kernel[i.abs_diff(j)];
            }
        }
        let mut cdf = vec![0.0; KDE_GRID];
        for i in 1..KDE_GRID {
            cdf[i] = cdf[i - 1] + 0.5 * step * (pdf[i - 1] + pdf[i]);
        }
        // Discretisation leaves the total a hair away from 1; rescale both tables.
        let total = cdf[KDE_GRID - 1];
        if !(total > 0.0) {
            return Err(Error::Numerical("KDE grid carries no mass".into()));
        }
        pdf.iter_mut().for_each(|p| *p /= total);
        cdf.iter_mut().for_each(|c| *c /= total);
        Ok(Self {
            bandwidth: h,
            lo,
            step,
            pdf,
            cdf,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Grid support `[lo, hi]`.
    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.lo + self.step * (KDE_GRID - 1) as f64)
    }

    fn interp(&self, table: &[f64], x: f64, below: f64, above: f64) -> f64 {
        let pos = (x - self.lo) / self.step;
        if !(pos >= 0.0) {
            return below;
        }
        if pos >= (KDE_GRID - 1) as f64 {
            return above;
        }
        let i = pos as usize;
        let frac = pos - i as f64;
        table[i] * (1.0 - frac) + table[i + 1] * frac
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.interp(&self.pdf, x, 0.0, 0.0)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.interp(&self.cdf, x, 0.0, 1.0)
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        self.pdf(x).max(DENSITY_FLOOR).ln()
    }

    /// Trapezoid integral of the tabulated density.
    pub fn total_mass(&self) -> f64 {
        self.pdf.windows(2).map(|w| 0.5 * self.step * (w[0] + w[1])).sum()
    }
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

pub fn kde_fit(train: &FrameSet, rule: Bandwidth) -> Result<Kde> {
    Kde::fit(&train.pooled(), rule)
}

/// Product LLR with KDE marginals, one `(f₀, f₁)` pair per sensor.
#[derive(Debug, Clone)]
pub struct KdeProduct {
    n: usize,
    marginals: Vec<(Kde, Kde)>,
}

impl KdeProduct {
    pub fn new(n: usize, marginals: Vec<(Kde, Kde)>) -> Result<Self> {
        if n == 0 || marginals.is_empty() {
            return Err(Error::InvalidDimension("KDE product needs n > 0 and at least one sensor".into()));
        }
        Ok(Self { n, marginals })
    }

    /// Fits from per-sensor training sets under each hypothesis.
    pub fn fit(train_h0: &[FrameSet], train_h1: &[FrameSet], rule: Bandwidth) -> Result<Self> {
        if train_h0.len() != train_h1.len() || train_h0.is_empty() {
            return Err(Error::Config("need the same non-zero number of sensors under both hypotheses".into()));
        }
        let n = train_h0[0].n;
        let marginals = train_h0
            .iter()
            .zip(train_h1)
            .map(|(a, b)| Ok((kde_fit(a, rule)?, kde_fit(b, rule)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, marginals)
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n * self.marginals.len() {
            return Err(Error::InvalidDimension(format!(
                "observation length {} is not N*L = {}",
                x.len(),
                self.n * self.marginals.len()
            )));
        }
        Ok(x.chunks_exact(self.n)
            .zip(&self.marginals)
            .map(|(chunk, (f0, f1))| chunk.iter().map(|&v| f1.ln_pdf(v) - f0.ln_pdf(v)).sum::<f64>())
            .sum())
    }
}

/// Sample moments of the compressed training frames and whether the
/// covariance estimate had fewer frames than dimensions.
#[derive(Debug, Clone)]
pub struct EmpiricalModel<S: Scalar> {
    pub model: GaussianModel<S>,
    pub rank_deficient: bool,
}

/// Compresses uncompressed `N·L` training frames with `bp` and builds the
/// Gaussian model from their sample moments.
pub fn empirical_gaussian_model<S: Scalar>(
    train_h0: &[DVector<S>],
    train_h1: &[DVector<S>],
    bp: &BlockProjection<S>,
) -> Result<EmpiricalModel<S>> {
    let ml = bp.m() * bp.l();
    let mut rank_deficient = false;
    let mut moments = |frames: &[DVector<S>], h: Hypothesis| -> Result<(DVector<S>, nalgebra::DMatrix<S>)> {
        if frames.len() < 2 {
            return Err(Error::InsufficientData(format!("{h} training needs at least 2 frames, got {}", frames.len())));
        }
        if frames.len() < ml {
            log::warn!("{h}: {} training frames < ML = {ml}; covariance is rank deficient, ridge will apply", frames.len());
            rank_deficient = true;
        }
        let y = frames.iter().map(|x| bp.compress(x)).collect::<Result<Vec<_>>>()?;
        let mean = y.iter().fold(DVector::zeros(ml), |acc, v| acc + v) / S::lit(y.len() as f64);
        let cov = sample_cov(&y, Some(&mean))?;
        Ok((mean, cov))
    };
    let (mu0, c0) = moments(train_h0, Hypothesis::H0)?;
    let (mu1, c1) = moments(train_h1, Hypothesis::H1)?;
    let model = GaussianModel::new(mu0, c0, mu1, c1, bp.m())?;
    Ok(EmpiricalModel { model, rank_deficient })
}
