//! Candidate-pose grids, scoring policies and the greedy reconstruction loop.

pub mod grid;
pub mod policy;
pub mod reconstruction;

pub use grid::{scene5d_grid, select_nbv, sphere_grid, GridKind, LatticeDims, PoseGrid, Scene5dParams};
pub use policy::{score_candidates, PolicyKind, ScoringInputs, ScoringParams};
pub use reconstruction::{auc, run_reconstruction, CoverageCurve, Reconstruction, ReconstructionConfig, Trajectory};
