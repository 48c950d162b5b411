use std::collections::HashMap;
use std::path::Path;

use nalgebra::{Point3, Vector3};

use crate::error::{NbvError, Result};
use crate::geometry::{io::write_points_ply, Aabb};

type Key = [i64; 3];

/// Outcome of one `accumulate` call.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AccumulateStats {
    pub inserted: usize,
    /// Points outside the scene bounding box.
    pub skipped: usize,
}

/// Partial point cloud partitioned into cubic cells.
///
/// Within one cell no two points are closer than `eps`; points in different
/// cells are never compared, so near-duplicates may straddle a cell boundary.
#[derive(Clone, Debug)]
pub struct CloudStore {
    bbox: Aabb,
    cell_size: f64,
    eps: f64,
    points: Vec<Point3<f64>>,
    cells: HashMap<Key, Vec<u32>>,
    // eps-sized voxels for the same-cell duplicate check
    fine: HashMap<Key, Vec<u32>>,
}

impl CloudStore {
    pub fn new(bbox: Aabb, cell_size: f64, eps: f64) -> Result<CloudStore> {
        if !bbox.is_valid() {
            return Err(NbvError::invalid("cloud bounding box must be non-degenerate"));
        }
        if !(eps > 0.0 && eps <= cell_size && cell_size.is_finite()) {
            return Err(NbvError::invalid(format!(
                "need 0 < eps_cloud <= cell size, got eps {eps}, cell {cell_size}"
            )));
        }
        Ok(CloudStore {
            bbox,
            cell_size,
            eps,
            points: Vec::new(),
            cells: HashMap::new(),
            fine: HashMap::new(),
        })
    }

    /// Store with the default cell size for `max_range` and default eps.
    pub fn with_defaults(bbox: Aabb, max_range: f64) -> Result<CloudStore> {
        let cell = default_cell_size(&bbox, max_range);
        let eps = default_eps_cloud(&bbox).min(cell);
        CloudStore::new(bbox, cell, eps)
    }

    pub fn bbox(&self) -> &Aabb {
        &self.bbox
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Stored points in insertion order.
    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_of(&self, p: &Point3<f64>) -> Key {
        key_of(p, &self.bbox.min, self.cell_size)
    }

    /// Indices of the points stored in `cell`.
    pub fn cell_points(&self, cell: &Key) -> &[u32] {
        self.cells.get(cell).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Inserts points in order; a point is kept iff every point already
    /// stored in its cell is farther than `eps`.
    pub fn accumulate(&mut self, points: &[Point3<f64>]) -> AccumulateStats {
        let mut stats = AccumulateStats::default();
        let eps_sq = self.eps * self.eps;
        for p in points {
            if !self.bbox.contains(p) {
                stats.skipped += 1;
                continue;
            }
            let cell = self.cell_of(p);
            let fk = key_of(p, &self.bbox.min, self.eps);
            let mut duplicate = false;
            'search: for dx in -1..=1 {
                for dy in -1..=1 {
                    for dz in -1..=1 {
                        let k = [fk[0] + dx, fk[1] + dy, fk[2] + dz];
                        if let Some(list) = self.fine.get(&k) {
                            for &i in list {
                                let q = &self.points[i as usize];
                                if (q - p).norm_squared() <= eps_sq && self.cell_of(q) == cell {
                                    duplicate = true;
                                    break 'search;
                                }
                            }
                        }
                    }
                }
            }
            if duplicate {
                continue;
            }
            let idx = self.points.len() as u32;
            self.points.push(*p);
            self.cells.entry(cell).or_default().push(idx);
            self.fine.entry(fk).or_default().push(idx);
            stats.inserted += 1;
        }
        stats
    }

    /// Up to `k` nearest points to `x` among the 3x3x3 cells around it, after
    /// voxel downsampling at `scale` (voxel edge `eps * 2^scale`, keeping the
    /// point nearest each voxel center). Scale 0 uses the raw points.
    pub fn k_nearest(&self, x: &Point3<f64>, k: usize, scale: u32) -> Vec<Point3<f64>> {
        if k == 0 {
            return Vec::new();
        }
        let c = self.cell_of(x);
        let mut cand: Vec<u32> = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    cand.extend_from_slice(self.cell_points(&[c[0] + dx, c[1] + dy, c[2] + dz]));
                }
            }
        }
        cand.sort_unstable();
        if scale > 0 {
            let voxel = self.eps * 2f64.powi(scale as i32);
            let mut best: HashMap<Key, (f64, u32)> = HashMap::new();
            for &i in &cand {
                let p = &self.points[i as usize];
                let vk = key_of(p, &self.bbox.min, voxel);
                let center = self.bbox.min + Vector3::new(vk[0] as f64 + 0.5, vk[1] as f64 + 0.5, vk[2] as f64 + 0.5) * voxel;
                let d = (p - center).norm_squared();
                // candidates arrive in index order, so strict < keeps the lowest index on ties
                match best.get(&vk) {
                    Some(&(bd, _)) if bd <= d => {}
                    _ => {
                        best.insert(vk, (d, i));
                    }
                }
            }
            cand = best.into_values().map(|(_, i)| i).collect();
            cand.sort_unstable();
        }
        let mut scored: Vec<(f64, u32)> = cand
            .into_iter()
            .map(|i| ((self.points[i as usize] - x).norm_squared(), i))
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        scored.truncate(k);
        scored.into_iter().map(|(_, i)| self.points[i as usize]).collect()
    }

    pub fn write_ply(&self, path: &Path) -> Result<()> {
        write_points_ply(&self.points, path)
    }
}

/// Twice the sensor range split into 32 cells, enlarged if needed so the
/// bounding box holds at most 128 cells per axis.
pub fn default_cell_size(bbox: &Aabb, max_range: f64) -> f64 {
    let nominal = 2.0 * max_range / 32.0;
    let longest = bbox.extent().max();
    nominal.max(longest / 128.0)
}

pub fn default_eps_cloud(bbox: &Aabb) -> f64 {
    0.005 * bbox.diagonal()
}

fn key_of(p: &Point3<f64>, origin: &Point3<f64>, size: f64) -> Key {
    let r = (p - origin) / size;
    [r.x.floor() as i64, r.y.floor() as i64, r.z.floor() as i64]
}
