use std::collections::HashMap;

use nalgebra::{Isometry3, Point3, Vector3};
use rand::Rng;

use super::bvh::Bvh;
use super::{Aabb, Hit, Ray};
use crate::error::{NbvError, Result};
use crate::rng::rng_from_seed;

/// Slack on barycentric bounds during ray-triangle tests.
const BARY_EPS: f64 = 1e-9;
/// Barycentric margin under which a parity crossing counts as grazing.
const GRAZE_EPS: f64 = 1e-7;

/// Primary inside-test direction, deliberately off every axis and diagonal.
const PARITY_DIRECTIONS: [[f64; 3]; 4] = [
    [0.5773, 0.5774, 0.5775],
    [0.5912, 0.5538, 0.5867],
    [0.5641, 0.6015, 0.5659],
    [0.6042, 0.5617, 0.5650],
];

/// Watertight-capable triangle mesh with an attached BVH.
///
/// The mesh is immutable once built; all queries take `&self` and are safe to
/// run from many threads.
#[derive(Clone, Debug)]
pub struct TriangleMesh {
    vertices: Vec<Point3<f64>>,
    faces: Vec<[u32; 3]>,
    normals: Vec<Vector3<f64>>,
    areas: Vec<f64>,
    watertight: bool,
    bvh: Bvh,
}

/// Nearest surface point to a query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosestPoint {
    pub point: Point3<f64>,
    pub face_index: usize,
    pub distance: f64,
}

/// Area-uniform surface sample with the inward normal of its face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SurfaceSample {
    pub point: Point3<f64>,
    pub inward_normal: Vector3<f64>,
    pub face_index: usize,
}

struct TriHit {
    t: f64,
    u: f64,
    v: f64,
    grazing: bool,
}

impl TriangleMesh {
    /// Builds a mesh, computing outward face normals (counter-clockwise
    /// winding), the edge-sharing watertightness census and the BVH.
    pub fn new(vertices: Vec<Point3<f64>>, faces: Vec<[u32; 3]>) -> Result<TriangleMesh> {
        if vertices.is_empty() || faces.is_empty() {
            return Err(NbvError::invalid("mesh has no vertices or no faces"));
        }
        let nv = vertices.len() as u32;
        if let Some((i, f)) = faces.iter().enumerate().find(|(_, f)| f.iter().any(|&v| v >= nv)) {
            return Err(NbvError::invalid(format!(
                "face {i} references vertex {:?} but the mesh has {nv} vertices",
                f
            )));
        }
        if vertices.iter().any(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(NbvError::invalid("mesh has non-finite vertex coordinates"));
        }

        let mut normals = Vec::with_capacity(faces.len());
        let mut areas = Vec::with_capacity(faces.len());
        let mut boxes = Vec::with_capacity(faces.len());
        for f in &faces {
            let [a, b, c] = f.map(|i| vertices[i as usize]);
            let cross = (b - a).cross(&(c - a));
            let len = cross.norm();
            areas.push(0.5 * len);
            normals.push(if len > 0.0 { cross / len } else { Vector3::zeros() });
            boxes.push(Aabb::from_points([&a, &b, &c]));
        }
        let watertight = edge_census_closed(&faces);
        let bvh = Bvh::build(&boxes);
        Ok(TriangleMesh {
            vertices,
            faces,
            normals,
            areas,
            watertight,
            bvh,
        })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[u32; 3]] {
        &self.faces
    }

    /// Outward unit normal per face.
    pub fn normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn is_watertight(&self) -> bool {
        self.watertight
    }

    pub fn bounds(&self) -> Aabb {
        self.bvh.bounds()
    }

    pub fn area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Enclosed volume by the divergence theorem; meaningful for closed,
    /// consistently oriented meshes.
    pub fn volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|f| {
                let [a, b, c] = f.map(|i| self.vertices[i as usize].coords);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    fn triangle(&self, face: usize) -> [Point3<f64>; 3] {
        self.faces[face].map(|i| self.vertices[i as usize])
    }

    /// Nearest intersection with `t` in the ray's range.
    pub fn ray_intersect(&self, ray: &Ray) -> Option<Hit> {
        let inv = ray.inv_direction();
        let mut best: Option<(f64, usize)> = None;
        self.bvh
            .traverse_ray(&ray.origin, &inv, ray.t_min, ray.t_max, |face, t_max| {
                match self.intersect_face(face as usize, &ray.origin, &ray.direction) {
                    Some(h) if h.t >= ray.t_min && h.t <= t_max => {
                        // equal-t ties go to the lower face index for determinism
                        let better = match best {
                            None => true,
                            Some((bt, bf)) => h.t < bt || (h.t == bt && (face as usize) < bf),
                        };
                        if better {
                            best = Some((h.t, face as usize));
                        }
                        h.t.min(t_max)
                    }
                    _ => t_max,
                }
            });
        best.map(|(t, face)| Hit {
            t,
            point: ray.at(t),
            face_index: face,
            normal: self.normals[face],
        })
    }

    /// True if any face blocks the open segment `from → to`, ignoring the
    /// last `backoff` meters before `to` and the first `backoff` after `from`.
    pub fn segment_blocked(&self, from: &Point3<f64>, to: &Point3<f64>, backoff: f64) -> bool {
        let delta = to - from;
        let len = delta.norm();
        if len <= 2.0 * backoff {
            return false;
        }
        let dir = delta / len;
        self.any_hit(from, &dir, backoff, len - backoff)
    }

    /// Any intersection along `dir` (unit) within `[t_min, t_max]`.
    pub fn any_hit(&self, origin: &Point3<f64>, dir: &Vector3<f64>, t_min: f64, t_max: f64) -> bool {
        let inv = dir.map(|c| 1.0 / c);
        let mut found = false;
        self.bvh.traverse_ray(origin, &inv, t_min, t_max, |face, tm| {
            if found {
                return f64::NEG_INFINITY;
            }
            if let Some(h) = self.intersect_face(face as usize, origin, dir) {
                if h.t >= t_min && h.t <= tm {
                    found = true;
                    return f64::NEG_INFINITY;
                }
            }
            tm
        });
        found
    }

    /// Number of surface crossings along a ray, and whether any crossing was
    /// too close to an edge or too tangential to trust.
    fn crossings(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> (usize, bool) {
        let inv = dir.map(|c| 1.0 / c);
        let mut count = 0;
        let mut grazing = false;
        self.bvh.traverse_ray(origin, &inv, 0.0, f64::INFINITY, |face, tm| {
            if let Some(h) = self.intersect_face(face as usize, origin, dir) {
                if h.t > 1e-12 {
                    count += 1;
                    grazing |= h.grazing || h.u < GRAZE_EPS || h.v < GRAZE_EPS || 1.0 - h.u - h.v < GRAZE_EPS;
                }
            }
            tm
        });
        (count, grazing)
    }

    fn require_watertight(&self) -> Result<()> {
        if self.watertight {
            Ok(())
        } else {
            Err(NbvError::Contract("query requires a watertight mesh".into()))
        }
    }

    /// Binary occupancy: ray-parity inside test.
    ///
    /// Casts along a fixed off-axis direction; a grazing crossing triggers a
    /// re-cast along the next direction of a fixed sequence (three retries).
    pub fn point_inside(&self, x: &Point3<f64>) -> Result<bool> {
        self.require_watertight()?;
        Ok(self.point_inside_unchecked(x))
    }

    pub(crate) fn point_inside_unchecked(&self, x: &Point3<f64>) -> bool {
        if !self.bounds().contains(x) {
            return false;
        }
        let mut parity = false;
        for d in PARITY_DIRECTIONS {
            let dir = Vector3::from(d).normalize();
            let (count, grazing) = self.crossings(x, &dir);
            parity = count % 2 == 1;
            if !grazing {
                break;
            }
        }
        parity
    }

    /// Nearest surface point within `max_distance` (exclusive), if any.
    pub fn closest_point(&self, x: &Point3<f64>, max_distance: f64) -> Option<ClosestPoint> {
        let mut best: Option<(f64, usize, Point3<f64>)> = None;
        let bound = if max_distance.is_finite() {
            max_distance * max_distance
        } else {
            f64::INFINITY
        };
        self.bvh.traverse_nearest(x, bound, |face, b| {
            let [a, bb, c] = self.triangle(face as usize);
            let q = closest_on_triangle(x, &a, &bb, &c);
            let d2 = (q - x).norm_squared();
            let better = match best {
                None => d2 < b,
                Some((bd, bf, _)) => d2 < bd || (d2 == bd && (face as usize) < bf),
            };
            if better {
                best = Some((d2, face as usize, q));
                d2.min(b)
            } else {
                b
            }
        });
        best.map(|(d2, face_index, point)| ClosestPoint {
            point,
            face_index,
            distance: d2.sqrt(),
        })
    }

    /// Signed distance: positive inside, negative outside.
    pub fn signed_distance(&self, x: &Point3<f64>) -> Result<f64> {
        self.require_watertight()?;
        let d = self
            .closest_point(x, f64::INFINITY)
            .map(|c| c.distance)
            .unwrap_or(f64::INFINITY);
        Ok(if self.point_inside_unchecked(x) { d } else { -d })
    }

    /// Area-weighted uniform samples with inward normals.
    pub fn sample_surface(&self, n: usize, seed: u64) -> Result<Vec<SurfaceSample>> {
        let mut rng = rng_from_seed(seed);
        self.sample_surface_with(n, &mut rng)
    }

    pub fn sample_surface_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<SurfaceSample>> {
        if n == 0 {
            return Err(NbvError::invalid("sample count must be at least 1"));
        }
        let mut cdf = Vec::with_capacity(self.areas.len());
        let mut acc = 0.0;
        for a in &self.areas {
            acc += a;
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(NbvError::invalid("mesh has zero surface area"));
        }
        let samples = (0..n)
            .map(|_| {
                let r = rng.gen::<f64>() * acc;
                let face = cdf.partition_point(|&c| c <= r).min(cdf.len() - 1);
                let [a, b, c] = self.triangle(face);
                let (u, v): (f64, f64) = (rng.gen(), rng.gen());
                let su = u.sqrt();
                let point = Point3::from(a.coords * (1.0 - su) + b.coords * (su * (1.0 - v)) + c.coords * (su * v));
                SurfaceSample {
                    point,
                    inward_normal: -self.normals[face],
                    face_index: face,
                }
            })
            .collect();
        Ok(samples)
    }

    /// Applies a rigid motion to every vertex.
    pub fn transformed(&self, iso: &Isometry3<f64>) -> TriangleMesh {
        let vertices = self.vertices.iter().map(|p| iso * p).collect();
        TriangleMesh::new(vertices, self.faces.clone()).expect("rigid motion keeps a valid mesh valid")
    }

    /// Uniform scale about the origin followed by a translation.
    pub fn scaled_translated(&self, scale: f64, offset: Vector3<f64>) -> Result<TriangleMesh> {
        if !(scale > 0.0) {
            return Err(NbvError::invalid("scale must be positive"));
        }
        let vertices = self.vertices.iter().map(|p| Point3::from(p.coords * scale + offset)).collect();
        TriangleMesh::new(vertices, self.faces.clone())
    }

    /// Translates and scales the mesh so its bounding box fits the unit cube
    /// centered at the origin (longest side becomes 1).
    pub fn normalized_to_unit_cube(&self) -> Result<TriangleMesh> {
        let b = Aabb::from_points(&self.vertices);
        let longest = b.extent().max();
        if !(longest > 0.0) {
            return Err(NbvError::invalid("mesh bounding box is degenerate"));
        }
        let s = 1.0 / longest;
        self.scaled_translated(s, -b.center().coords * s)
    }

    /// Merges another mesh into this one (disjoint components).
    pub fn merged(&self, other: &TriangleMesh) -> TriangleMesh {
        let offset = self.vertices.len() as u32;
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut faces = self.faces.clone();
        faces.extend(other.faces.iter().map(|f| f.map(|i| i + offset)));
        TriangleMesh::new(vertices, faces).expect("union of valid meshes is valid")
    }

    fn intersect_face(&self, face: usize, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<TriHit> {
        let [a, b, c] = self.triangle(face);
        let e1 = b - a;
        let e2 = c - a;
        let p = dir.cross(&e2);
        let det = e1.dot(&p);
        let scale = e1.norm() * e2.norm();
        if det.abs() <= 1e-14 * scale {
            return None;
        }
        let inv = 1.0 / det;
        let s = origin - a;
        let u = s.dot(&p) * inv;
        if !(-BARY_EPS..=1.0 + BARY_EPS).contains(&u) {
            return None;
        }
        let q = s.cross(&e1);
        let v = dir.dot(&q) * inv;
        if v < -BARY_EPS || u + v > 1.0 + BARY_EPS {
            return None;
        }
        let t = e2.dot(&q) * inv;
        Some(TriHit {
            t,
            u,
            v,
            grazing: det.abs() < 1e-9 * scale,
        })
    }
}

fn edge_census_closed(faces: &[[u32; 3]]) -> bool {
    let mut edges: HashMap<(u32, u32), u32> = HashMap::with_capacity(faces.len() * 3 / 2);
    for f in faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            if a == b {
                return false;
            }
            *edges.entry((a.min(b), a.max(b))).or_insert(0) += 1;
        }
    }
    edges.values().all(|&c| c == 2)
}

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
fn closest_on_triangle(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Point3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}
