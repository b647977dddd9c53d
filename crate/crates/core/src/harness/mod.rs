//! Experiment driver: ROC curves, calibration, bounds, timing and output files.

pub mod bench;
pub mod bounds;
pub mod calibrate;
pub mod config;
pub mod emit;
pub mod plan;
pub mod roc;

pub use bench::{run_bench, TimingRow};
pub use bounds::{run_bounds, BoundRow, BoundsResult, CompareAtRate};
pub use calibrate::{
    calibrate_threshold, relative_spread, run_calibrate, threshold_surface, Calibration, CalibrationRecord,
    SurfaceCell,
};
pub use config::{compressed_dim, DetectorConfig, ExperimentConfig};
pub use plan::{Plan, ProjectionContext, Setting};
pub use roc::{auc, collect_scores, mann_whitney_auc, roc_from_scores, run_roc, RocCurve, RocPoint};
