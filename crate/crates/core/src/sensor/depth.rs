use std::fs;
use std::path::Path;

use nalgebra::Point3;
use rayon::prelude::*;

use super::{CameraPose, SensorIntrinsics};
use crate::error::{NbvError, Result};
use crate::geometry::{Ray, TriangleMesh};

/// Per-pixel Euclidean depth; `NaN` marks a pixel with no return.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    pub pose: CameraPose,
    pub intrinsics: SensorIntrinsics,
    depths: Vec<f64>,
}

impl DepthMap {
    /// Row-major index `v * width + u`.
    pub fn get(&self, u: u32, v: u32) -> Option<f64> {
        let d = self.depths[(v * self.intrinsics.width + u) as usize];
        (!d.is_nan()).then_some(d)
    }

    pub fn raw(&self) -> &[f64] {
        &self.depths
    }

    pub fn valid_count(&self) -> usize {
        self.depths.iter().filter(|d| !d.is_nan()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.valid_count() == 0
    }

    /// Iterates `(u, v, depth)` over all pixels, `None` for no return.
    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32, Option<f64>)> + '_ {
        let w = self.intrinsics.width;
        self.depths.iter().enumerate().map(move |(i, &d)| {
            let i = i as u32;
            (i % w, i / w, (!d.is_nan()).then_some(d))
        })
    }

    /// 16-bit binary PGM with millimeter depths; 0 means no return and depths
    /// beyond 65.535 m saturate.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let mut out = format!("P5\n{} {}\n65535\n", self.intrinsics.width, self.intrinsics.height).into_bytes();
        for &d in &self.depths {
            let mm = if d.is_nan() { 0 } else { (d * 1000.0).round().clamp(1.0, 65535.0) as u16 };
            out.extend_from_slice(&mm.to_be_bytes());
        }
        fs::write(path, out).map_err(|e| NbvError::io(path, e))
    }
}

/// Casts one ray per pixel center. `None` renders an empty scene.
pub fn render_depth(mesh: Option<&TriangleMesh>, pose: &CameraPose, intr: &SensorIntrinsics) -> DepthMap {
    let w = intr.width;
    let depths = (0..intr.pixel_count())
        .into_par_iter()
        .with_min_len(256)
        .map(|i| {
            let Some(mesh) = mesh else { return f64::NAN };
            let (u, v) = (i as u32 % w, i as u32 / w);
            let dir = pose.to_world_direction(&intr.pixel_direction(u, v));
            let ray = Ray {
                origin: pose.position,
                direction: dir,
                t_min: 0.0,
                t_max: intr.max_range,
            };
            match mesh.ray_intersect(&ray) {
                // the nearest surface blocks anything behind it, so a hit
                // closer than the minimum range is no return
                Some(h) if h.t >= intr.min_range => h.t,
                _ => f64::NAN,
            }
        })
        .collect();
    DepthMap {
        pose: *pose,
        intrinsics: *intr,
        depths,
    }
}

/// World points of all pixels with a return, in row-major order.
pub fn backproject(map: &DepthMap) -> Vec<Point3<f64>> {
    map.pixels()
        .filter_map(|(u, v, d)| {
            d.map(|d| map.pose.position + d * map.pose.to_world_direction(&map.intrinsics.pixel_direction(u, v)))
        })
        .collect()
}
