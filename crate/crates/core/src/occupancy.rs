//! Occupancy-probability fields and probability-proportional proxy sampling.

use std::fs;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{NbvError, Result};
use crate::geometry::{Aabb, TriangleMesh};
use crate::sensor::DepthMap;
use crate::sh::ShVector;

/// Estimated probability that a point lies inside the scene volume.
pub trait OccupancyField: Sync {
    fn probability(&self, x: &Point3<f64>) -> f64;

    /// Region over which the field is defined and proxies are sampled.
    fn bounds(&self) -> Aabb;
}

/// Ground-truth occupancy: 1 inside the mesh, 0 outside.
#[derive(Clone, Copy, Debug)]
pub struct OracleOccupancy<'a> {
    mesh: &'a TriangleMesh,
    bbox: Aabb,
}

impl<'a> OracleOccupancy<'a> {
    pub fn new(mesh: Option<&'a TriangleMesh>, bbox: Aabb) -> Result<OracleOccupancy<'a>> {
        let mesh = mesh.ok_or_else(|| NbvError::Config {
            field: "occupancy".into(),
            message: "the oracle field needs a ground-truth mesh".into(),
        })?;
        if !mesh.is_watertight() {
            return Err(NbvError::Contract("oracle occupancy needs a watertight mesh".into()));
        }
        if !bbox.is_valid() {
            return Err(NbvError::invalid("occupancy bounding box must be non-degenerate"));
        }
        Ok(OracleOccupancy { mesh, bbox })
    }
}

impl OccupancyField for OracleOccupancy<'_> {
    fn probability(&self, x: &Point3<f64>) -> f64 {
        if self.mesh.point_inside_unchecked(x) {
            1.0
        } else {
            0.0
        }
    }

    fn bounds(&self) -> Aabb {
        self.bbox
    }
}

/// Probabilities assigned to each carving state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarvingValues {
    pub free: f64,
    pub surface: f64,
    pub unknown: f64,
}

impl Default for CarvingValues {
    fn default() -> Self {
        CarvingValues {
            free: 0.02,
            surface: 0.95,
            unknown: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum VoxelState {
    Unknown = 0,
    Free = 1,
    Surface = 2,
}

/// Space-carving voxel grid. The first observation of a voxel is final, so
/// a free voxel never becomes more occupied.
#[derive(Clone, Debug)]
pub struct CarvingOccupancy {
    bbox: Aabb,
    dims: [usize; 3],
    voxel: Vector3<f64>,
    states: Vec<VoxelState>,
    values: CarvingValues,
}

pub const DEFAULT_CARVING_RESOLUTION: usize = 64;

impl CarvingOccupancy {
    pub fn new(bbox: Aabb, resolution: usize, values: CarvingValues) -> Result<CarvingOccupancy> {
        if !bbox.is_valid() {
            return Err(NbvError::invalid("carving bounding box must be non-degenerate"));
        }
        if resolution == 0 {
            return Err(NbvError::invalid("carving resolution must be positive"));
        }
        for (name, v) in [("free", values.free), ("surface", values.surface), ("unknown", values.unknown)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(NbvError::Config {
                    field: format!("carving.{name}"),
                    message: format!("probability must lie in [0, 1], got {v}"),
                });
            }
        }
        let dims = [resolution; 3];
        Ok(CarvingOccupancy {
            bbox,
            dims,
            voxel: bbox.extent() / resolution as f64,
            states: vec![VoxelState::Unknown; resolution.pow(3)],
            values,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxel_of(&self, x: &Point3<f64>) -> Option<[usize; 3]> {
        if !self.bbox.contains(x) {
            return None;
        }
        let r = (x - self.bbox.min).component_div(&self.voxel);
        Some(std::array::from_fn(|i| (r[i].floor() as usize).min(self.dims[i] - 1)))
    }

    fn flat(&self, v: [usize; 3]) -> usize {
        v[0] + self.dims[0] * (v[1] + self.dims[1] * v[2])
    }

    pub fn state_at(&self, x: &Point3<f64>) -> VoxelState {
        self.voxel_of(x)
            .map(|v| self.states[self.flat(v)])
            .unwrap_or(VoxelState::Unknown)
    }

    fn mark(&mut self, v: [usize; 3], s: VoxelState) {
        let i = self.flat(v);
        if self.states[i] == VoxelState::Unknown {
            self.states[i] = s;
        }
    }

    /// Marks hit voxels as surface, then voxels crossed by each sensor ray
    /// up to one voxel before its hit as free. Rays without a return are
    /// carved out to the sensor's maximum range.
    pub fn update(&mut self, map: &DepthMap) {
        let origin = map.pose.position;
        let intr = &map.intrinsics;
        let back_off = self.voxel.min();
        let mut rays = Vec::with_capacity(intr.pixel_count());
        for (u, v, d) in map.pixels() {
            let dir = map.pose.to_world_direction(&intr.pixel_direction(u, v));
            match d {
                Some(d) => {
                    if let Some(vx) = self.voxel_of(&(origin + d * dir)) {
                        self.mark(vx, VoxelState::Surface);
                    }
                    rays.push((dir, d - back_off));
                }
                None => rays.push((dir, intr.max_range)),
            }
        }
        for (dir, t_end) in rays {
            if t_end > 0.0 {
                self.carve(&origin, &dir, t_end);
            }
        }
    }

    /// Amanatides–Woo traversal of the segment `[0, t_end]` along `dir`.
    fn carve(&mut self, origin: &Point3<f64>, dir: &Vector3<f64>, t_end: f64) {
        let inv = dir.map(|c| 1.0 / c);
        let (mut t0, mut t1) = (0.0f64, t_end);
        for i in 0..3 {
            let a = (self.bbox.min[i] - origin[i]) * inv[i];
            let b = (self.bbox.max[i] - origin[i]) * inv[i];
            if a.is_nan() || b.is_nan() {
                continue;
            }
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
        }
        if t0 >= t1 {
            return;
        }
        let start = origin + dir * t0;
        let rel = (start - self.bbox.min).component_div(&self.voxel);
        let mut cell = [0i64; 3];
        let mut step = [0i64; 3];
        let mut t_next = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for i in 0..3 {
            cell[i] = (rel[i].floor() as i64).clamp(0, self.dims[i] as i64 - 1);
            if dir[i] > 0.0 {
                step[i] = 1;
                t_delta[i] = self.voxel[i] / dir[i];
                let boundary = self.bbox.min[i] + (cell[i] + 1) as f64 * self.voxel[i];
                t_next[i] = t0 + (boundary - start[i]) / dir[i];
            } else if dir[i] < 0.0 {
                step[i] = -1;
                t_delta[i] = -self.voxel[i] / dir[i];
                let boundary = self.bbox.min[i] + cell[i] as f64 * self.voxel[i];
                t_next[i] = t0 + (boundary - start[i]) / dir[i];
            }
        }
        let mut t = t0;
        while t < t1 {
            self.mark([cell[0] as usize, cell[1] as usize, cell[2] as usize], VoxelState::Free);
            let axis = if t_next[0] <= t_next[1] && t_next[0] <= t_next[2] {
                0
            } else if t_next[1] <= t_next[2] {
                1
            } else {
                2
            };
            t = t_next[axis];
            t_next[axis] += t_delta[axis];
            cell[axis] += step[axis];
            if cell[axis] < 0 || cell[axis] >= self.dims[axis] as i64 {
                break;
            }
        }
    }

    /// Raw volume: three little-endian `u32` dimensions, the bounding box as
    /// six `f32` (min then max), then one `f32` probability per voxel with x
    /// varying fastest.
    pub fn write_raw(&self, path: &Path) -> Result<()> {
        let mut out = Vec::with_capacity(36 + 4 * self.states.len());
        for d in self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for c in self.bbox.min.iter().chain(self.bbox.max.iter()) {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
        for s in &self.states {
            out.extend_from_slice(&(self.value_of(*s) as f32).to_le_bytes());
        }
        fs::write(path, out).map_err(|e| NbvError::io(path, e))
    }

    fn value_of(&self, s: VoxelState) -> f64 {
        match s {
            VoxelState::Unknown => self.values.unknown,
            VoxelState::Free => self.values.free,
            VoxelState::Surface => self.values.surface,
        }
    }
}

impl OccupancyField for CarvingOccupancy {
    fn probability(&self, x: &Point3<f64>) -> f64 {
        self.value_of(self.state_at(x))
    }

    fn bounds(&self) -> Aabb {
        self.bbox
    }
}

/// Constant field, mainly for tests and degenerate inputs.
#[derive(Clone, Copy, Debug)]
pub struct ConstantOccupancy {
    pub value: f64,
    pub bbox: Aabb,
}

impl OccupancyField for ConstantOccupancy {
    fn probability(&self, _: &Point3<f64>) -> f64 {
        self.value
    }

    fn bounds(&self) -> Aabb {
        self.bbox
    }
}

/// Volume points drawn proportionally to occupancy, with optional per-point
/// gain and camera-history coefficients.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProxyPointSet {
    pub points: Vec<Point3<f64>>,
    pub probabilities: Vec<f64>,
    pub gains: Option<Vec<ShVector>>,
    pub history: Option<Vec<ShVector>>,
    /// Candidate draws consumed by rejection sampling.
    pub draws: usize,
}

impl ProxyPointSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.draws == 0 {
            0.0
        } else {
            self.len() as f64 / self.draws as f64
        }
    }
}

const PROXY_CHUNK: usize = 1024;

/// Rejection sampling: uniform candidates in the field's bounds, each kept
/// with probability `σ̂(x)`, until `n` are accepted or `100 n` candidates
/// have been drawn.
pub fn sample_proxy_points<F, R>(field: &F, n: usize, rng: &mut R) -> Result<ProxyPointSet>
where
    F: OccupancyField + ?Sized,
    R: Rng + ?Sized,
{
    if n == 0 {
        return Err(NbvError::invalid("proxy count must be at least 1"));
    }
    let bbox = field.bounds();
    let ext = bbox.extent();
    let cap = 100 * n;
    let mut out = ProxyPointSet::default();
    while out.len() < n && out.draws < cap {
        let m = PROXY_CHUNK.min(cap - out.draws);
        let cand: Vec<(Point3<f64>, f64)> = (0..m)
            .map(|_| {
                let p = bbox.min + Vector3::new(rng.gen::<f64>() * ext.x, rng.gen::<f64>() * ext.y, rng.gen::<f64>() * ext.z);
                (p, rng.gen::<f64>())
            })
            .collect();
        let probs: Vec<f64> = cand.par_iter().map(|(p, _)| field.probability(p).clamp(0.0, 1.0)).collect();
        for ((p, u), s) in cand.into_iter().zip(probs) {
            out.draws += 1;
            if u < s {
                out.points.push(p);
                out.probabilities.push(s);
                if out.len() == n {
                    break;
                }
            }
        }
    }
    if out.len() < n {
        return Err(NbvError::SamplingFailure {
            acceptance_rate: out.len() as f64 / out.draws.max(1) as f64,
            draws: out.draws,
        });
    }
    Ok(out)
}

/// Binary Shannon entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -(p * p.log2() + (1.0 - p) * (1.0 - p).log2())
    }
}
