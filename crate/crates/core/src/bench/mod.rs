//! Experiment configuration, orchestration across seeds, reports and
//! comparison tables.

pub mod compare;
pub mod config;
pub mod experiment;
pub mod plot;

pub use compare::{compare, ComparisonTable, PairedRow};
pub use config::{ExperimentConfig, MeshSource, PlannerConfig, Protocol, SceneGridConfig, SensorConfig, SphereGridConfig, TheoremConfig};
pub use experiment::{execute, run, write_outputs, Aggregate, RunReport, SeedResult, TheoremVerdict, TOOLKIT_VERSION};
