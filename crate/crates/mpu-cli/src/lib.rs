//! Library backing the `mpu-lab` experiment CLI: dataset generation for the
//! function-fitting study, the per-cell training driver, and the
//! verification reports each subcommand prints.

pub mod dataset;
pub mod fit;
pub mod reports;

pub use dataset::{frozen_target_weights, gen_dataset, target_variance, TargetKind, TargetSpec};
pub use fit::{run_fit, write_csv, FitOptions, RunRecord, CSV_HEADER};
