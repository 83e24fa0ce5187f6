//! Configuration-driven experiments over the equilab numerics: TOML
//! configurations in, CSV tables and a JSON report out.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod config;
pub mod error;
pub mod report;
pub mod runner;

pub use cache::{cache_key, BasisCache};
pub use config::{ExperimentConfig, ExperimentKind, GridConfig, RunConfig, WeightConfig};
pub use error::{LabError, LabResult};
pub use report::{RunReport, Verdict};
pub use runner::{run, RunOptions, RunOutcome};
