//! Simulation studies: manifests, a resumable job runner, aggregated result
//! tables and chain diagnostics.

pub mod diagnose;
pub mod manifest;
pub mod presets;
pub mod runner;

pub use diagnose::{diagnose, DiagnoseConfig, DiagnoseReport};
pub use manifest::{Cell, Check, Estimator, ExperimentKind, ExperimentManifest};
pub use runner::{aggregate, report, resume_experiment, run_experiment, ResultTables};
