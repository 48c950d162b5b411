//! Simulated depth sensor: poses and intrinsics, ray-cast depth maps,
//! back-projection and the cell-partitioned accumulated cloud.

mod camera;
mod cloud;
mod depth;

pub use camera::{direction_from_angles, CameraPose, SensorIntrinsics};
pub use cloud::{default_cell_size, default_eps_cloud, AccumulateStats, CloudStore};
pub use depth::{backproject, render_depth, DepthMap};
