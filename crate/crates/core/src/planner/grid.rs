use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{NbvError, Result};
use crate::geometry::Aabb;
use crate::occupancy::OccupancyField;
use crate::sensor::{direction_from_angles, CameraPose};

/// Occupancy above which a camera position counts as a collision.
pub const COLLISION_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    Sphere,
    Scene5d,
}

/// Lattice dimensions of a 5D grid, `[x, y, z, elevation, azimuth]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeDims(pub [usize; 5]);

impl LatticeDims {
    pub fn count(&self) -> usize {
        self.0.iter().product()
    }

    pub fn flat(&self, idx: [usize; 5]) -> usize {
        idx.iter().zip(&self.0).fold(0, |acc, (i, n)| acc * n + i)
    }

    pub fn unflat(&self, mut flat: usize) -> [usize; 5] {
        let mut out = [0; 5];
        for a in (0..5).rev() {
            out[a] = flat % self.0[a];
            flat /= self.0[a];
        }
        out
    }
}

/// Candidate camera poses with adjacency and a validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseGrid {
    pub kind: GridKind,
    pub poses: Vec<CameraPose>,
    /// Poses flagged invalid (collisions) are never visited.
    pub valid: Vec<bool>,
    lattice: Option<LatticeDims>,
}

impl PoseGrid {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn lattice(&self) -> Option<LatticeDims> {
        self.lattice
    }

    /// Neighbors of pose `i`, valid or not, in increasing index order.
    /// Sphere grids are fully connected; 5D grids connect poses one step
    /// apart along a single axis, wrapping in azimuth.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        match self.lattice {
            None => (0..self.len()).filter(|&j| j != i).collect(),
            Some(dims) => {
                let idx = dims.unflat(i);
                let mut out = Vec::with_capacity(10);
                for axis in 0..5 {
                    let n = dims.0[axis];
                    let wraps = axis == 4;
                    for delta in [-1i64, 1] {
                        let v = idx[axis] as i64 + delta;
                        let v = if wraps {
                            v.rem_euclid(n as i64)
                        } else if v < 0 || v >= n as i64 {
                            continue;
                        } else {
                            v
                        };
                        if v as usize == idx[axis] {
                            continue;
                        }
                        let mut j = idx;
                        j[axis] = v as usize;
                        out.push(dims.flat(j));
                    }
                }
                out.sort_unstable();
                out.dedup();
                out
            }
        }
    }

    pub fn valid_neighbors(&self, i: usize) -> Vec<usize> {
        self.neighbors(i).into_iter().filter(|&j| self.valid[j]).collect()
    }

    pub fn are_adjacent(&self, i: usize, j: usize) -> bool {
        i != j && self.neighbors(i).contains(&j)
    }

    /// Flags poses whose position has occupancy above the collision
    /// threshold.
    pub fn mask_collisions<F: OccupancyField + ?Sized>(&mut self, field: &F) {
        for (pose, v) in self.poses.iter().zip(self.valid.iter_mut()) {
            if field.probability(&pose.position) > COLLISION_THRESHOLD {
                *v = false;
            }
        }
    }
}

/// Poses on a sphere around `center`, each looking at it.
///
/// Elevations sit at the centers of `n_elev` equal bands in `(−π/2, π/2)`
/// (a single band gives the equator); azimuths are `2πj / n_azim`.
pub fn sphere_grid(center: Point3<f64>, radius: f64, n_elev: usize, n_azim: usize) -> Result<PoseGrid> {
    if !(radius > 0.0) || n_elev == 0 || n_azim == 0 {
        return Err(NbvError::invalid("sphere grid needs a positive radius and counts"));
    }
    let mut poses = Vec::with_capacity(n_elev * n_azim);
    for i in 0..n_elev {
        let el = if n_elev == 1 {
            0.0
        } else {
            -PI / 2.0 + (i as f64 + 0.5) * PI / n_elev as f64
        };
        for j in 0..n_azim {
            let az = 2.0 * PI * j as f64 / n_azim as f64;
            let pos = center + radius * direction_from_angles(el, az);
            poses.push(CameraPose::look_at(pos, center)?);
        }
    }
    let n = poses.len();
    Ok(PoseGrid {
        kind: GridKind::Sphere,
        poses,
        valid: vec![true; n],
        lattice: None,
    })
}

/// Parameters of a 5D pose lattice.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene5dParams {
    pub bbox: Aabb,
    /// Positional step along x, y, z.
    pub step: [f64; 3],
    pub n_elev: usize,
    pub n_azim: usize,
    /// Elevations span `[−max_elevation, max_elevation]`, radians.
    pub max_elevation: f64,
}

/// Lattice product of positions, elevations and azimuths. Positions are
/// centered in the box with `floor(extent / step)` (at least 1) samples per
/// axis; elevations sit at band centers of `[−max_el, max_el]`.
pub fn scene5d_grid(p: &Scene5dParams) -> Result<PoseGrid> {
    if !p.bbox.is_valid() {
        return Err(NbvError::invalid("scene bounding box must be non-degenerate"));
    }
    if p.step.iter().any(|s| !(*s > 0.0)) || p.n_elev == 0 || p.n_azim == 0 {
        return Err(NbvError::invalid("grid steps and angular counts must be positive"));
    }
    if !(p.max_elevation >= 0.0 && p.max_elevation < PI / 2.0) {
        return Err(NbvError::invalid("max elevation must lie in [0, pi/2)"));
    }
    let ext = p.bbox.extent();
    let center = p.bbox.center();
    let counts: [usize; 3] = std::array::from_fn(|a| ((ext[a] / p.step[a]).floor() as usize).max(1));
    let dims = LatticeDims([counts[0], counts[1], counts[2], p.n_elev, p.n_azim]);
    let mut poses = Vec::with_capacity(dims.count());
    for flat in 0..dims.count() {
        let idx = dims.unflat(flat);
        let pos = center
            + Vector3::from_fn(|a, _| (idx[a] as f64 - (counts[a] as f64 - 1.0) / 2.0) * p.step[a]);
        let el = -p.max_elevation + (idx[3] as f64 + 0.5) * 2.0 * p.max_elevation / p.n_elev as f64;
        let az = 2.0 * PI * idx[4] as f64 / p.n_azim as f64;
        poses.push(CameraPose::from_angles(pos, el, az, 0.0)?);
    }
    let n = poses.len();
    Ok(PoseGrid {
        kind: GridKind::Scene5d,
        poses,
        valid: vec![true; n],
        lattice: Some(dims),
    })
}

/// Argmax with ties broken by the lowest index; NaN scores never win.
pub fn select_nbv(scores: &[f64]) -> Result<usize> {
    if scores.is_empty() {
        return Err(NbvError::invalid("no candidate poses to choose from"));
    }
    let key = |s: f64| if s.is_nan() { f64::NEG_INFINITY } else { s };
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if key(s) > key(scores[best]) {
            best = i;
        }
    }
    Ok(best)
}
