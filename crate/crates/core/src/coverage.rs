//! Ground-truth visibility and coverage, the neighborhood visibility gain,
//! oracle spherical-harmonic gain fields, the Monte Carlo coverage-gain
//! estimator, and point-cloud evaluation metrics.
//!
//! Gain directions point from the camera towards the point: a camera at
//! `c_pos` looks at `x` along `d = (x − c_pos) / ‖x − c_pos‖`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NbvError, Result};
use crate::geometry::{SurfaceSample, TriangleMesh};
use crate::occupancy::ProxyPointSet;
use crate::sensor::{CameraPose, SensorIntrinsics};
use crate::sh::{camera_history_feature, ShProjector, ShVector};

/// Maximum angle between `x − x₀` and the inward normal at the foot point.
pub const FOOT_ANGLE_TOLERANCE_DEG: f64 = 30.0;

/// Relative occlusion back-off: rays stop this fraction of the scene
/// diagonal short of their target.
pub const OCCLUSION_BACKOFF: f64 = 1e-4;

/// Ordered camera history sharing one set of intrinsics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseHistory {
    pub poses: Vec<CameraPose>,
    pub intrinsics: SensorIntrinsics,
}

impl PoseHistory {
    pub fn new(intrinsics: SensorIntrinsics) -> PoseHistory {
        PoseHistory {
            poses: Vec::new(),
            intrinsics,
        }
    }

    pub fn with_poses(poses: Vec<CameraPose>, intrinsics: SensorIntrinsics) -> PoseHistory {
        PoseHistory { poses, intrinsics }
    }

    pub fn push(&mut self, pose: CameraPose) {
        self.poses.push(pose);
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }
}

/// Occlusion back-off for a mesh.
pub fn occlusion_delta(mesh: &TriangleMesh) -> f64 {
    OCCLUSION_BACKOFF * mesh.bounds().diagonal()
}

/// `v_c(x)`: `x` is in the frustum and range of `c` and the segment from the
/// camera to `x` is free of surface.
pub fn visible(mesh: &TriangleMesh, c: &CameraPose, intr: &SensorIntrinsics, x: &Point3<f64>) -> bool {
    visible_with_delta(mesh, c, intr, x, occlusion_delta(mesh))
}

fn visible_with_delta(mesh: &TriangleMesh, c: &CameraPose, intr: &SensorIntrinsics, x: &Point3<f64>, delta: f64) -> bool {
    c.sees_in_frustum(intr, x) && !mesh.segment_blocked(&c.position, x, delta)
}

fn visible_any(mesh: &TriangleMesh, poses: &[CameraPose], intr: &SensorIntrinsics, x: &Point3<f64>, delta: f64) -> bool {
    poses.iter().any(|c| visible_with_delta(mesh, c, intr, x, delta))
}

/// `γ_H(x)`: seen by at least one pose of the history.
pub fn knowledge_indicator(mesh: &TriangleMesh, history: &PoseHistory, x: &Point3<f64>) -> bool {
    visible_any(mesh, &history.poses, &history.intrinsics, x, occlusion_delta(mesh))
}

/// `(1 − γ_H(x)) · v_c(x)` where `c` may be a rig of several poses seen as
/// one observation.
pub(crate) fn gain_indicator(mesh: &TriangleMesh, history: &PoseHistory, rig: &[CameraPose], x: &Point3<f64>, delta: f64) -> bool {
    visible_any(mesh, rig, &history.intrinsics, x, delta) && !visible_any(mesh, &history.poses, &history.intrinsics, x, delta)
}

fn count_parallel<F>(samples: &[SurfaceSample], f: F) -> Result<f64>
where
    F: Fn(&Point3<f64>) -> bool + Sync,
{
    if samples.is_empty() {
        return Err(NbvError::invalid("surface sample set is empty"));
    }
    let hits: usize = samples.par_iter().with_min_len(64).filter(|s| f(&s.point)).count();
    Ok(hits as f64 / samples.len() as f64)
}

/// Monte Carlo surface coverage of a single pose.
pub fn surface_coverage(mesh: &TriangleMesh, c: &CameraPose, intr: &SensorIntrinsics, samples: &[SurfaceSample]) -> Result<f64> {
    union_coverage(mesh, std::slice::from_ref(c), intr, samples)
}

/// Fraction of samples visible from at least one pose.
pub fn union_coverage(mesh: &TriangleMesh, poses: &[CameraPose], intr: &SensorIntrinsics, samples: &[SurfaceSample]) -> Result<f64> {
    let delta = occlusion_delta(mesh);
    count_parallel(samples, |x| visible_any(mesh, poses, intr, x, delta))
}

/// Monte Carlo coverage gain `G_H(c)`.
pub fn coverage_gain_gt(mesh: &TriangleMesh, history: &PoseHistory, c: &CameraPose, samples: &[SurfaceSample]) -> Result<f64> {
    coverage_gain_gt_rig(mesh, history, std::slice::from_ref(c), samples)
}

/// Coverage gain of a rig observing simultaneously.
pub fn coverage_gain_gt_rig(mesh: &TriangleMesh, history: &PoseHistory, rig: &[CameraPose], samples: &[SurfaceSample]) -> Result<f64> {
    let delta = occlusion_delta(mesh);
    count_parallel(samples, |x| gain_indicator(mesh, history, rig, x, delta))
}

/// Foot point of a volume point on the surface, if the point lies in the
/// inner `μ`-shell and its offset from the surface is along the inward
/// normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShellFoot {
    pub foot: Point3<f64>,
    /// Depth `λ` below the surface.
    pub depth: f64,
}

/// Finds `x₀, λ` with `x = x₀ + λ N(x₀)`, `0 ≤ λ < μ`, or `None`.
pub fn shell_foot(mesh: &TriangleMesh, x: &Point3<f64>, mu: f64) -> Option<ShellFoot> {
    shell_foot_impl(mesh, x, mu, false)
}

/// `shell_foot` for a point already known to be inside the volume.
pub(crate) fn shell_foot_inside(mesh: &TriangleMesh, x: &Point3<f64>, mu: f64) -> Option<ShellFoot> {
    shell_foot_impl(mesh, x, mu, true)
}

fn shell_foot_impl(mesh: &TriangleMesh, x: &Point3<f64>, mu: f64, known_inside: bool) -> Option<ShellFoot> {
    let cp = mesh.closest_point(x, mu)?;
    if cp.distance >= mu {
        return None;
    }
    let on_surface = cp.distance <= 1e-9 * mesh.bounds().diagonal();
    if !on_surface {
        if !known_inside && !mesh.point_inside_unchecked(x) {
            return None;
        }
        let inward = -mesh.normals()[cp.face_index];
        let cos = (x - cp.point).dot(&inward) / cp.distance;
        if cos < FOOT_ANGLE_TOLERANCE_DEG.to_radians().cos() {
            return None;
        }
    }
    Some(ShellFoot {
        foot: cp.point,
        depth: cp.distance,
    })
}

/// `g_c^H(μ; x)`.
pub fn neighborhood_gain(mesh: &TriangleMesh, history: &PoseHistory, c: &CameraPose, mu: f64, x: &Point3<f64>) -> bool {
    neighborhood_gain_rig(mesh, history, std::slice::from_ref(c), mu, x)
}

pub fn neighborhood_gain_rig(mesh: &TriangleMesh, history: &PoseHistory, rig: &[CameraPose], mu: f64, x: &Point3<f64>) -> bool {
    match shell_foot(mesh, x, mu) {
        Some(f) => gain_indicator(mesh, history, rig, &f.foot, occlusion_delta(mesh)),
        None => false,
    }
}

/// Settings of the ray-cast oracle gain field.
#[derive(Clone, Copy, Debug)]
pub struct GainFieldParams {
    /// Shell thickness `μ`.
    pub mu: f64,
    /// Distance of the virtual camera placed along each direction.
    pub camera_distance: f64,
}

/// `G(d)` for a point already resolved to its foot `x₀`: zero if `x₀` was
/// seen by the history, else 1 for every direction whose virtual camera at
/// `x₀ − R d` sees `x₀` unoccluded.
pub fn directional_gain(
    mesh: &TriangleMesh,
    history: &PoseHistory,
    x0: &Point3<f64>,
    directions: &[Vector3<f64>],
    camera_distance: f64,
) -> Vec<f64> {
    let delta = occlusion_delta(mesh);
    if visible_any(mesh, &history.poses, &history.intrinsics, x0, delta) {
        return vec![0.0; directions.len()];
    }
    directions
        .iter()
        .map(|d| {
            let cam = x0 - camera_distance * d;
            if mesh.segment_blocked(&cam, x0, delta) {
                0.0
            } else {
                1.0
            }
        })
        .collect()
}

/// Attaches SH gain coefficients and camera-history features to each proxy.
///
/// Gains are the projection of `G(d)` sampled on the projector's directions;
/// proxies outside the `μ`-shell get the zero vector. When `candidates` is
/// given, only proxies inside at least one candidate frustum are evaluated,
/// the rest get zeros since the estimator never reads them.
pub fn oracle_gain_field(
    mesh: &TriangleMesh,
    history: &PoseHistory,
    proxy: &mut ProxyPointSet,
    params: &GainFieldParams,
    projector: &ShProjector,
    candidates: Option<&[CameraPose]>,
) -> Result<()> {
    if projector.directions().len() < 500 {
        return Err(NbvError::invalid("oracle gain fields need at least 500 directions"));
    }
    if !(params.mu > 0.0) {
        return Err(NbvError::invalid("mu must be positive"));
    }
    let intr = history.intrinsics;
    let results: Vec<Result<(ShVector, ShVector)>> = proxy
        .points
        .par_iter()
        .map(|x| {
            let hist = camera_history_feature(x, &history.poses, &intr);
            let relevant = candidates.is_none_or(|cs| cs.iter().any(|c| c.sees_in_frustum(&intr, x)));
            if !relevant {
                return Ok((ShVector::zeros(), hist));
            }
            let Some(f) = shell_foot(mesh, x, params.mu) else {
                return Ok((ShVector::zeros(), hist));
            };
            let g = directional_gain(mesh, history, &f.foot, projector.directions(), params.camera_distance);
            if g.iter().all(|&v| v == 0.0) {
                return Ok((ShVector::zeros(), hist));
            }
            Ok((projector.project(&g)?, hist))
        })
        .collect();
    let mut gains = Vec::with_capacity(results.len());
    let mut hist = Vec::with_capacity(results.len());
    for r in results {
        let (g, h) = r?;
        gains.push(g);
        hist.push(h);
    }
    proxy.gains = Some(gains);
    proxy.history = Some(hist);
    Ok(())
}

/// Estimated coverage gain of one pose.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainEstimate {
    pub pose: CameraPose,
    /// `I_H(c)`, non-negative.
    pub gain: f64,
    pub sample_count: usize,
}

/// `I_H(c) = (1/|χ̂|) Σ 1_{χ̂_c}(x) · max(0, φ(x)·Y(d))`, each term optionally
/// weighted by `1 / (η + ‖x − c_pos‖²)`.
pub fn estimate_gain(proxy: &ProxyPointSet, c: &CameraPose, intr: &SensorIntrinsics, eta: Option<f64>) -> Result<GainEstimate> {
    if proxy.is_empty() {
        return Err(NbvError::invalid("proxy point set is empty"));
    }
    let gains = proxy
        .gains
        .as_ref()
        .ok_or_else(|| NbvError::invalid("proxy points carry no gain coefficients"))?;
    if gains.len() != proxy.len() {
        return Err(NbvError::invalid("gain and point arrays differ in length"));
    }
    let mut sum = 0.0;
    for (x, phi) in proxy.points.iter().zip(gains) {
        if phi.is_zero() || !c.sees_in_frustum(intr, x) {
            continue;
        }
        let v = x - c.position;
        let r2 = v.norm_squared();
        let term = phi.eval_unchecked(&(v / r2.sqrt())).max(0.0);
        sum += match eta {
            Some(eta) => term / (eta + r2),
            None => term,
        };
    }
    Ok(GainEstimate {
        pose: *c,
        gain: sum / proxy.len() as f64,
        sample_count: proxy.len(),
    })
}

/// Fraction of `p0` points having a point of `cloud` strictly closer than
/// `eps`.
pub fn total_coverage_metric(cloud: &[Point3<f64>], p0: &[Point3<f64>], eps: f64) -> Result<f64> {
    if p0.is_empty() {
        return Err(NbvError::invalid("ground-truth cloud is empty"));
    }
    if !(eps > 0.0) {
        return Err(NbvError::invalid("coverage threshold must be positive"));
    }
    let key = |p: &Point3<f64>| -> [i64; 3] { [(p.x / eps).floor() as i64, (p.y / eps).floor() as i64, (p.z / eps).floor() as i64] };
    let mut grid: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
    for (i, p) in cloud.iter().enumerate() {
        grid.entry(key(p)).or_default().push(i as u32);
    }
    let eps_sq = eps * eps;
    let covered = p0
        .par_iter()
        .filter(|q| {
            let k = key(q);
            for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        if let Some(list) = grid.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                            if list.iter().any(|&i| (cloud[i as usize] - *q).norm_squared() < eps_sq) {
                                return true;
                            }
                        }
                    }
                }
            }
            false
        })
        .count();
    Ok(covered as f64 / p0.len() as f64)
}

fn log_softmax(v: &[f64]) -> Vec<f64> {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    v.iter().map(|x| x - lse).collect()
}

/// `D_KL(softmax(gt) ‖ softmax(pred))`.
pub fn kl_gain_divergence(pred: &[f64], gt: &[f64]) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(NbvError::invalid(format!(
            "gain lists differ in length ({} vs {})",
            pred.len(),
            gt.len()
        )));
    }
    if gt.len() < 2 {
        return Err(NbvError::invalid("need at least two gains"));
    }
    let lp = log_softmax(gt);
    let lq = log_softmax(pred);
    let kl: f64 = lp.iter().zip(&lq).map(|(a, b)| a.exp() * (a - b)).sum();
    Ok(kl.max(0.0))
}

/// One row of a gain table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainRow {
    pub pose_id: usize,
    pub estimate: f64,
    pub ground_truth: f64,
}

pub fn write_gain_table(rows: &[GainRow], path: &Path) -> Result<()> {
    let mut out = String::from("pose_id,estimate,ground_truth\n");
    for r in rows {
        writeln!(out, "{},{:.12e},{:.12e}", r.pose_id, r.estimate, r.ground_truth).expect("write to string");
    }
    fs::write(path, out).map_err(|e| NbvError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::icosphere;
    use crate::sh::sh_index;
    use std::f64::consts::PI;

    fn wide() -> SensorIntrinsics {
        SensorIntrinsics::new(8, 8, 2.2, 2.2, 0.01, 100.0).unwrap()
    }

    fn cam(z: f64) -> CameraPose {
        CameraPose::look_at(Point3::new(0.0, 0.0, z), Point3::origin()).unwrap()
    }

    #[test]
    fn visibility_cases() {
        let m = icosphere(4);
        let c = cam(-3.0);
        assert!(visible(&m, &c, &wide(), &Point3::new(0.0, 0.0, -1.0)));
        assert!(!visible(&m, &c, &wide(), &Point3::new(0.0, 0.0, 1.0)));
        assert!(!visible(&m, &c, &wide(), &Point3::new(0.0, 0.0, -4.0)));
    }

    #[test]
    fn knowledge_indicator_is_a_max() {
        let m = icosphere(4);
        let x = Point3::new(0.0, 0.0, -1.0);
        let mut h = PoseHistory::new(wide());
        assert!(!knowledge_indicator(&m, &h, &x));
        h.push(cam(3.0));
        assert!(!knowledge_indicator(&m, &h, &x));
        h.push(cam(-3.0));
        assert!(knowledge_indicator(&m, &h, &x));
    }

    #[test]
    fn coverage_identities() {
        let m = icosphere(4);
        let s = m.sample_surface(2000, 1).unwrap();
        let c = cam(-2.0);
        let empty = PoseHistory::new(wide());
        assert_eq!(coverage_gain_gt(&m, &empty, &c, &s).unwrap(), surface_coverage(&m, &c, &wide(), &s).unwrap());
        let h = PoseHistory::with_poses(vec![c], wide());
        assert_eq!(coverage_gain_gt(&m, &h, &c, &s).unwrap(), 0.0);
        assert!(surface_coverage(&m, &c, &wide(), &[]).is_err());
    }

    #[test]
    fn neighborhood_gain_cases() {
        let m = icosphere(5);
        let h = PoseHistory::new(wide());
        let c = cam(-3.0);
        let mu = 0.05;
        let surf = m.sample_surface(50, 2).unwrap();
        let front = surf.iter().find(|s| s.point.z < -0.9).unwrap().point;
        assert!(neighborhood_gain(&m, &h, &c, mu, &front));
        assert!(neighborhood_gain(&m, &h, &c, mu, &(front + 0.5 * mu * (-front.coords))));
        assert!(!neighborhood_gain(&m, &h, &c, mu, &(front * 1.01)));
        assert!(!neighborhood_gain(&m, &h, &c, mu, &(front * (1.0 - 2.0 * mu))));
        assert!(!neighborhood_gain(&m, &h, &c, mu, &Point3::new(0.0, 0.0, 0.99)));
    }

    #[test]
    fn unoccluded_free_point_projects_to_constant() {
        // a point far from the only surface is visible from every direction
        let m = icosphere(3).scaled_translated(0.1, Vector3::new(10.0, 0.0, 0.0)).unwrap();
        let p = ShProjector::fibonacci(1000).unwrap();
        let g = directional_gain(&m, &PoseHistory::new(wide()), &Point3::origin(), p.directions(), 2.0);
        let c = p.project(&g).unwrap();
        assert!((c.0[sh_index(0, 0)] - 2.0 * PI.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn a_wall_blocks_the_cameras_behind_it() {
        // slab covering z in [0.5, 0.6] over a 4 x 4 square above the point
        let v: Vec<Point3<f64>> = (0..8)
            .map(|i| {
                let s = |b: usize| if i & b == 0 { -2.0 } else { 2.0 };
                Point3::new(s(1), s(2), if i & 4 == 0 { 0.5 } else { 0.6 })
            })
            .collect();
        let f = vec![
            [0, 2, 1], [1, 2, 3], [4, 5, 6], [5, 7, 6], [0, 1, 4], [1, 5, 4],
            [2, 6, 3], [3, 6, 7], [0, 4, 2], [2, 4, 6], [1, 3, 5], [3, 7, 5],
        ];
        let wall = TriangleMesh::new(v, f).unwrap();
        assert!(wall.is_watertight());
        let p = ShProjector::fibonacci(1000).unwrap();
        let g = directional_gain(&wall, &PoseHistory::new(wide()), &Point3::origin(), p.directions(), 2.0);
        let c = p.project(&g).unwrap();
        // d points from camera to point: d = +z puts the camera below, in
        // the open; d = −z puts it above, behind the wall
        let up = c.eval(&Vector3::z()).unwrap();
        let down = c.eval(&-Vector3::z()).unwrap();
        assert!(down < up, "{down} vs {up}");
        assert!(down < 0.25 && up > 0.75);
    }

    #[test]
    fn kl_examples() {
        let g = [0.1, 0.5, 0.2];
        assert!(kl_gain_divergence(&g, &g).unwrap().abs() < 1e-15);
        let shifted: Vec<f64> = g.iter().map(|v| v + 4.0).collect();
        assert!(kl_gain_divergence(&shifted, &g).unwrap() < 1e-14);
        assert!(kl_gain_divergence(&g[..2], &g).is_err());
    }

    #[test]
    fn coverage_metric_basics() {
        let pts: Vec<_> = (0..100).map(|i| Point3::new(i as f64 * 0.01, 0.3, -0.2)).collect();
        assert_eq!(total_coverage_metric(&pts, &pts, 0.00707).unwrap(), 1.0);
        assert_eq!(total_coverage_metric(&[], &pts, 0.00707).unwrap(), 0.0);
        // strict threshold: a neighbor at exactly eps does not count
        let a = [Point3::new(0.0, 0.0, 0.0)];
        let b = [Point3::new(0.5, 0.0, 0.0)];
        assert_eq!(total_coverage_metric(&a, &b, 0.5).unwrap(), 0.0);
        assert!(total_coverage_metric(&a, &[], 0.5).is_err());
    }
}
