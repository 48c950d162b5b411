use std::fmt::Write as _;

use nalgebra::Point3;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grid::{select_nbv, GridKind, PoseGrid};
use super::policy::{score_candidates, PolicyKind, ScoringInputs, ScoringParams};
use crate::coverage::{total_coverage_metric, PoseHistory};
use crate::error::{NbvError, Result};
use crate::geometry::{Aabb, TriangleMesh};
use crate::occupancy::{CarvingOccupancy, CarvingValues, DEFAULT_CARVING_RESOLUTION};
use crate::rng::{indexed_seed, stream, stream_seed};
use crate::sensor::{backproject, default_cell_size, default_eps_cloud, render_depth, CameraPose, CloudStore, SensorIntrinsics};
use crate::sh::ShProjector;

/// Coverage threshold of the object protocol on unit-normalized meshes.
pub const OBJECT_COVERAGE_EPS: f64 = 0.00707;
pub const OBJECT_P0_POINTS: usize = 16_384;
pub const SCENE_P0_POINTS: usize = 100_000;
pub const DEFAULT_PROXIES: usize = 4096;
pub const DEFAULT_GAIN_DIRECTIONS: usize = 500;
pub const DEFAULT_ETA: f64 = 1.0;
pub const MAX_START_DRAWS: usize = 100;

/// Settings of one reconstruction run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionConfig {
    pub policy: PolicyKind,
    pub steps: usize,
    pub intrinsics: SensorIntrinsics,
    /// Region holding the partial cloud and the carving grid.
    pub region: Aabb,
    /// Coverage threshold `ε` of the metric.
    pub eps: f64,
    pub eps_cloud: f64,
    pub mu: f64,
    pub eta: Option<f64>,
    pub proxies: usize,
    pub gain_directions: usize,
    /// Distance of the virtual camera used to ray-cast gain fields.
    pub gain_camera_distance: f64,
    pub p0_points: usize,
    pub carving_resolution: usize,
    pub carving_values: CarvingValues,
}

impl ReconstructionConfig {
    /// Object protocol on a sphere grid of radius `camera_radius` around a
    /// unit-normalized mesh.
    pub fn object(mesh: &TriangleMesh, intrinsics: SensorIntrinsics, camera_radius: f64, policy: PolicyKind, steps: usize) -> Self {
        let b = mesh.bounds();
        let region = b.expanded(0.05 * b.diagonal());
        let eps_cloud = default_eps_cloud(&b);
        ReconstructionConfig {
            policy,
            steps,
            intrinsics,
            region,
            eps: OBJECT_COVERAGE_EPS,
            eps_cloud,
            mu: 2.0 * eps_cloud,
            eta: None,
            proxies: DEFAULT_PROXIES,
            gain_directions: DEFAULT_GAIN_DIRECTIONS,
            gain_camera_distance: camera_radius,
            p0_points: OBJECT_P0_POINTS,
            carving_resolution: DEFAULT_CARVING_RESOLUTION,
            carving_values: CarvingValues::default(),
        }
    }

    /// Scene protocol: `region` bounds both the scene and the camera lattice.
    pub fn scene(region: Aabb, intrinsics: SensorIntrinsics, policy: PolicyKind, steps: usize) -> Self {
        let eps_cloud = default_eps_cloud(&region);
        ReconstructionConfig {
            policy,
            steps,
            intrinsics,
            region,
            eps: eps_cloud,
            eps_cloud,
            mu: 2.0 * eps_cloud,
            eta: Some(DEFAULT_ETA),
            proxies: DEFAULT_PROXIES,
            gain_directions: DEFAULT_GAIN_DIRECTIONS,
            gain_camera_distance: 0.5 * intrinsics.max_range,
            p0_points: SCENE_P0_POINTS,
            carving_resolution: DEFAULT_CARVING_RESOLUTION,
            carving_values: CarvingValues::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: &str| {
            Err(NbvError::Config {
                field: field.into(),
                message: message.into(),
            })
        };
        self.intrinsics.validate()?;
        if self.steps == 0 {
            return bad("steps", "must be at least 1");
        }
        if !self.region.is_valid() {
            return bad("region", "bounding box must be non-degenerate");
        }
        if !(self.eps > 0.0) {
            return bad("eps", "must be positive");
        }
        if !(self.eps_cloud > 0.0) {
            return bad("eps_cloud", "must be positive");
        }
        if !(self.mu > 0.0) {
            return bad("mu", "must be positive");
        }
        if matches!(self.eta, Some(e) if !(e > 0.0)) {
            return bad("eta", "must be positive when set");
        }
        if self.proxies == 0 {
            return bad("proxies", "must be at least 1");
        }
        if self.gain_directions < 500 {
            return bad("gain_directions", "must be at least 500");
        }
        if !(self.gain_camera_distance > 0.0) {
            return bad("gain_camera_distance", "must be positive");
        }
        if self.p0_points == 0 {
            return bad("p0_points", "must be at least 1");
        }
        if self.carving_resolution == 0 {
            return bad("carving_resolution", "must be at least 1");
        }
        Ok(())
    }
}

/// Visited poses with per-step cloud size and coverage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub policy: PolicyKind,
    pub seed: u64,
    pub pose_indices: Vec<usize>,
    pub poses: Vec<CameraPose>,
    pub point_counts: Vec<usize>,
    pub coverage: Vec<f64>,
}

/// Per-step coverage with its normalized area under the curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageCurve {
    pub values: Vec<f64>,
    pub auc: f64,
}

impl CoverageCurve {
    pub fn new(values: Vec<f64>) -> Result<CoverageCurve> {
        let auc = auc(&values)?;
        Ok(CoverageCurve { values, auc })
    }

    /// `step,coverage` rows; floats use the shortest round-trip form.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,coverage\n");
        for (i, v) in self.values.iter().enumerate() {
            let _ = writeln!(s, "{i},{v}");
        }
        s
    }
}

/// Trapezoid rule over unit steps divided by the number of intervals; a
/// single value is its own AUC.
pub fn auc(values: &[f64]) -> Result<f64> {
    match values.len() {
        0 => Err(NbvError::invalid("coverage curve is empty")),
        1 => Ok(values[0]),
        n => Ok(values.windows(2).map(|w| 0.5 * (w[0] + w[1])).sum::<f64>() / (n - 1) as f64),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub trajectory: Trajectory,
    pub curve: CoverageCurve,
}

/// Greedy next-best-view loop.
///
/// Each step renders the current pose, grows the cloud and the carving grid,
/// records coverage against `P0`, then moves to the best-scoring candidate
/// (every other valid pose on a sphere grid, valid lattice neighbors on a 5D
/// grid).
pub fn run_reconstruction(mesh: &TriangleMesh, grid: &PoseGrid, seed: u64, config: &ReconstructionConfig) -> Result<Reconstruction> {
    config.validate()?;
    let intr = config.intrinsics;
    let valid: Vec<usize> = (0..grid.len()).filter(|&i| grid.valid[i]).collect();
    if valid.is_empty() {
        return Err(NbvError::Setup("pose grid has no valid pose".into()));
    }
    let p0: Vec<Point3<f64>> = mesh
        .sample_surface(config.p0_points, stream_seed(seed, "surface"))?
        .into_iter()
        .map(|s| s.point)
        .collect();

    let mut start_rng = stream(seed, "start-pose");
    let mut first = None;
    for _ in 0..MAX_START_DRAWS {
        let i = valid[start_rng.gen_range(0..valid.len())];
        let map = render_depth(Some(mesh), &grid.poses[i], &intr);
        if !map.is_empty() {
            first = Some((i, map));
            break;
        }
    }
    let Some((mut current, mut map)) = first else {
        return Err(NbvError::Setup(format!(
            "no start pose sees the mesh after {MAX_START_DRAWS} draws"
        )));
    };

    let projector = match config.policy {
        PolicyKind::Gain => Some(ShProjector::fibonacci(config.gain_directions)?),
        _ => None,
    };
    let cell = default_cell_size(&config.region, intr.max_range).max(config.eps_cloud);
    let mut cloud = CloudStore::new(config.region, cell, config.eps_cloud)?;
    let mut carving = CarvingOccupancy::new(config.region, config.carving_resolution, config.carving_values)?;
    let mut history = PoseHistory::new(intr);
    let object_bounds = mesh.bounds().expanded(config.mu);
    let params = ScoringParams {
        proxies: config.proxies,
        mu: config.mu,
        eta: config.eta,
        gain_camera_distance: config.gain_camera_distance,
    };
    let policy_seed = stream_seed(seed, "policy");

    let mut traj = Trajectory {
        policy: config.policy,
        seed,
        pose_indices: Vec::with_capacity(config.steps),
        poses: Vec::with_capacity(config.steps),
        point_counts: Vec::with_capacity(config.steps),
        coverage: Vec::with_capacity(config.steps),
    };
    for step in 0..config.steps {
        let pose = grid.poses[current];
        cloud.accumulate(&backproject(&map));
        carving.update(&map);
        history.push(pose);
        traj.pose_indices.push(current);
        traj.poses.push(pose);
        traj.point_counts.push(cloud.len());
        traj.coverage.push(total_coverage_metric(cloud.points(), &p0, config.eps)?);
        if step + 1 == config.steps {
            break;
        }

        let candidates: Vec<usize> = match grid.kind {
            GridKind::Sphere => valid.iter().copied().filter(|&j| j != current).collect(),
            GridKind::Scene5d => grid.valid_neighbors(current),
        };
        if candidates.is_empty() {
            return Err(NbvError::Setup(format!("pose {current} has no valid candidate to move to")));
        }
        let cand_poses: Vec<CameraPose> = candidates.iter().map(|&j| grid.poses[j]).collect();
        let inputs = ScoringInputs {
            mesh,
            history: &history,
            carving: &carving,
            intrinsics: &intr,
            projector: projector.as_ref().unwrap_or_else(|| ShProjector::default_shared()),
            object_bounds,
        };
        let mut rng = crate::rng::rng_from_seed(indexed_seed(policy_seed, step as u64));
        let scores = score_candidates(config.policy, &inputs, &cand_poses, &params, &mut rng)?;
        current = candidates[select_nbv(&scores)?];
        map = render_depth(Some(mesh), &grid.poses[current], &intr);
    }
    let curve = CoverageCurve::new(traj.coverage.clone())?;
    Ok(Reconstruction { trajectory: traj, curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::icosphere;
    use crate::planner::grid::sphere_grid;

    #[test]
    fn auc_reference_curves() {
        assert!((auc(&[0.5; 10]).unwrap() - 0.5).abs() < 1e-12);
        assert!((auc(&[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-12);
        let ramp: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        assert!((auc(&ramp).unwrap() - 0.5).abs() < 1e-9);
        assert_eq!(auc(&[0.3]).unwrap(), 0.3);
        assert!(auc(&[]).is_err());
    }

    fn setup() -> (TriangleMesh, PoseGrid, SensorIntrinsics) {
        let mesh = icosphere(3).scaled_translated(0.5, nalgebra::Vector3::zeros()).unwrap();
        let grid = sphere_grid(Point3::origin(), 2.0, 3, 6).unwrap();
        let intr = SensorIntrinsics::new(48, 48, 1.0, 1.0, 0.1, 10.0).unwrap();
        (mesh, grid, intr)
    }

    #[test]
    fn single_step_curve_is_first_view_coverage() {
        let (mesh, grid, intr) = setup();
        let cfg = ReconstructionConfig::object(&mesh, intr, 2.0, PolicyKind::Random, 1);
        let r = run_reconstruction(&mesh, &grid, 3, &cfg).unwrap();
        assert_eq!(r.curve.values.len(), 1);
        assert_eq!(r.curve.auc, r.curve.values[0]);
        assert!(r.curve.values[0] > 0.0);
    }

    #[test]
    fn random_runs_repeat_and_coverage_grows() {
        let (mesh, grid, intr) = setup();
        let cfg = ReconstructionConfig::object(&mesh, intr, 2.0, PolicyKind::Random, 5);
        let a = run_reconstruction(&mesh, &grid, 11, &cfg).unwrap();
        let b = run_reconstruction(&mesh, &grid, 11, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.curve.to_csv(), b.curve.to_csv());
        for w in a.curve.values.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn gain_and_entropy_steps_run() {
        let (mesh, grid, intr) = setup();
        for policy in [PolicyKind::Gain, PolicyKind::Entropy] {
            let mut cfg = ReconstructionConfig::object(&mesh, intr, 2.0, policy, 3);
            cfg.proxies = 512;
            let r = run_reconstruction(&mesh, &grid, 5, &cfg).unwrap();
            assert_eq!(r.trajectory.pose_indices.len(), 3);
            // a sphere grid step never revisits the pose it leaves
            for w in r.trajectory.pose_indices.windows(2) {
                assert_ne!(w[0], w[1]);
            }
        }
    }

    #[test]
    fn invisible_mesh_is_a_setup_error() {
        let (mesh, _, intr) = setup();
        let away = sphere_grid(Point3::new(50.0, 0.0, 0.0), 1.0, 1, 4).unwrap();
        let cfg = ReconstructionConfig::object(&mesh, intr, 2.0, PolicyKind::Random, 2);
        // cameras look at a far-away center and never see the mesh
        let mut g = away;
        for p in &mut g.poses {
            *p = CameraPose::look_at(p.position, Point3::new(100.0, 0.0, 0.0)).unwrap();
        }
        assert!(matches!(run_reconstruction(&mesh, &g, 1, &cfg), Err(NbvError::Setup(_))));
    }
}
