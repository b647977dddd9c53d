//! Detection of dependent multimodal data from randomly projected
//! (compressed) sensor measurements.
//!
//! Each of `L` sensors observes a length-`N` window and sends `M < N` random
//! projections to a fusion center. The crate provides:
//!
//! * [`linops`]: orthoprojectors and the block-diagonal fused operator.
//! * [`scenarios`]: synthetic dependent-data generators with closed-form moments.
//! * [`detectors`]: compressed Gaussian-approximation LLR, product and copula
//!   LLRs, energy detectors and the compressed covariance (CAV) detector.
//! * [`analysis`]: Bhattacharyya distances and error bounds.
//! * [`harness`]: Monte Carlo ROC, threshold calibration, timing and output.
//! * [`ingest`]: framing, KDE marginals and empirical models for recorded series.
//!
//! Linear-algebra types are generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` / `*32` aliases below name the concrete instantiations.

pub mod analysis;
pub mod detectors;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod linops;
pub mod rng;
pub mod scalar;
pub mod scenarios;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Projection64 = linops::Projection<f64>;
pub type Projection32 = linops::Projection<f32>;
pub type BlockProjection64 = linops::BlockProjection<f64>;
pub type BlockProjection32 = linops::BlockProjection<f32>;
pub type GaussianModel64 = detectors::GaussianModel<f64>;
pub type GaussianModel32 = detectors::GaussianModel<f32>;
