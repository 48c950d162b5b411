//! Triangle meshes, ray queries, inside/outside and signed-distance tests,
//! surface sampling and analytic reference shapes.

mod analytic;
mod bvh;
pub mod io;
mod mesh;

pub use analytic::{icosphere, AnalyticShape, ShapeKind};
pub use bvh::Bvh;
pub use mesh::{ClosestPoint, SurfaceSample, TriangleMesh};

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{NbvError, Result};

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn new(min: Point3<f64>, max: Point3<f64>) -> Aabb {
        Aabb { min, max }
    }

    pub fn empty() -> Aabb {
        Aabb {
            min: Point3::from([f64::INFINITY; 3]),
            max: Point3::from([f64::NEG_INFINITY; 3]),
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3<f64>>) -> Aabb {
        let mut b = Aabb::empty();
        for p in points {
            b.grow(p);
        }
        b
    }

    pub fn grow(&mut self, p: &Point3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min, &self.max)
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn volume(&self) -> f64 {
        let e = self.extent();
        e.x * e.y * e.z
    }

    /// Non-degenerate: strictly positive extent along every axis.
    pub fn is_valid(&self) -> bool {
        let e = self.extent();
        e.x > 0.0 && e.y > 0.0 && e.z > 0.0 && e.iter().all(|v| v.is_finite())
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn expanded(&self, margin: f64) -> Aabb {
        let m = Vector3::repeat(margin);
        Aabb {
            min: self.min - m,
            max: self.max + m,
        }
    }

    /// Squared distance from `p` to the box (zero inside).
    pub fn distance_sq(&self, p: &Point3<f64>) -> f64 {
        let mut d = 0.0;
        for i in 0..3 {
            let v = if p[i] < self.min[i] {
                self.min[i] - p[i]
            } else if p[i] > self.max[i] {
                p[i] - self.max[i]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }

    /// Slab test against a ray given by origin and component-wise inverse
    /// direction.
    #[inline]
    pub fn hit_by(&self, origin: &Point3<f64>, inv_dir: &Vector3<f64>, t_min: f64, t_max: f64) -> bool {
        let mut lo = t_min;
        let mut hi = t_max;
        for i in 0..3 {
            let t0 = (self.min[i] - origin[i]) * inv_dir[i];
            let t1 = (self.max[i] - origin[i]) * inv_dir[i];
            // NaN from 0 * inf: the ray runs inside a slab plane, which the
            // closed box contains, so this axis does not constrain t
            if t0.is_nan() || t1.is_nan() {
                continue;
            }
            let (a, b) = if t0 <= t1 { (t0, t1) } else { (t1, t0) };
            if a > lo {
                lo = a;
            }
            if b < hi {
                hi = b;
            }
            if lo > hi {
                return false;
            }
        }
        true
    }
}

/// A ray with a unit direction and a parametric range.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Point3<f64>,
    pub direction: Vector3<f64>,
    pub t_min: f64,
    pub t_max: f64,
}

impl Ray {
    /// Normalizes `direction`; fails on a zero direction or an empty range.
    pub fn new(origin: Point3<f64>, direction: Vector3<f64>, t_min: f64, t_max: f64) -> Result<Ray> {
        let n = direction.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(NbvError::invalid("ray direction must be non-zero and finite"));
        }
        if !(t_min >= 0.0 && t_min < t_max) {
            return Err(NbvError::invalid(format!(
                "ray range must satisfy 0 <= t_min < t_max, got [{t_min}, {t_max}]"
            )));
        }
        Ok(Ray {
            origin,
            direction: direction / n,
            t_min,
            t_max,
        })
    }

    /// Unbounded ray starting at the origin point.
    pub fn infinite(origin: Point3<f64>, direction: Vector3<f64>) -> Result<Ray> {
        Ray::new(origin, direction, 0.0, f64::INFINITY)
    }

    pub fn at(&self, t: f64) -> Point3<f64> {
        self.origin + self.direction * t
    }

    pub(crate) fn inv_direction(&self) -> Vector3<f64> {
        self.direction.map(|c| 1.0 / c)
    }
}

/// Nearest ray-surface intersection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub point: Point3<f64>,
    pub face_index: usize,
    /// Outward unit normal of the hit face.
    pub normal: Vector3<f64>,
}
