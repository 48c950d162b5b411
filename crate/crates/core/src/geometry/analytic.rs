use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::TriangleMesh;
use crate::error::{NbvError, Result};

/// Closed-form reference shape, centered at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ShapeKind {
    Sphere { radius: f64 },
    /// Torus around the z axis.
    Torus { major: f64, minor: f64 },
    /// Axis-aligned cube of the given side with all edges and corners rounded,
    /// i.e. a smaller cube dilated by a ball of `edge_radius`.
    RoundedCube { side: f64, edge_radius: f64 },
}

impl ShapeKind {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ShapeKind::Sphere { radius } => radius > 0.0,
            ShapeKind::Torus { major, minor } => major > minor && minor > 0.0,
            ShapeKind::RoundedCube { side, edge_radius } => edge_radius > 0.0 && 2.0 * edge_radius <= side,
        };
        if ok {
            Ok(())
        } else {
            Err(NbvError::invalid(format!("invalid analytic shape parameters: {self:?}")))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ShapeKind::Sphere { .. } => "sphere",
            ShapeKind::Torus { .. } => "torus",
            ShapeKind::RoundedCube { .. } => "rounded-cube",
        }
    }

    /// Exact surface area.
    pub fn area(&self) -> f64 {
        match *self {
            ShapeKind::Sphere { radius } => 4.0 * PI * radius * radius,
            ShapeKind::Torus { major, minor } => 4.0 * PI * PI * major * minor,
            ShapeKind::RoundedCube { side, edge_radius: r } => {
                let l = side - 2.0 * r;
                6.0 * l * l + 6.0 * PI * l * r + 4.0 * PI * r * r
            }
        }
    }

    /// Exact enclosed volume.
    pub fn volume(&self) -> f64 {
        match *self {
            ShapeKind::Sphere { radius } => 4.0 / 3.0 * PI * radius.powi(3),
            ShapeKind::Torus { major, minor } => 2.0 * PI * PI * major * minor * minor,
            ShapeKind::RoundedCube { side, edge_radius: r } => {
                let l = side - 2.0 * r;
                l.powi(3) + 6.0 * l * l * r + 3.0 * PI * l * r * r + 4.0 / 3.0 * PI * r.powi(3)
            }
        }
    }

    /// Largest inward offset for which every normal segment stays inside the
    /// volume without crossing another (the minimum radius of curvature).
    pub fn reach(&self) -> f64 {
        match *self {
            ShapeKind::Sphere { radius } => radius,
            ShapeKind::Torus { minor, .. } => minor,
            ShapeKind::RoundedCube { edge_radius, .. } => edge_radius,
        }
    }

    pub fn default_resolution(&self) -> u32 {
        match self {
            ShapeKind::Sphere { .. } => 5,
            ShapeKind::Torus { .. } => 64,
            ShapeKind::RoundedCube { .. } => 12,
        }
    }
}

/// An analytic shape with its exact measures and a watertight tessellation.
#[derive(Clone, Debug)]
pub struct AnalyticShape {
    pub kind: ShapeKind,
    pub area: f64,
    pub volume: f64,
    pub mesh: TriangleMesh,
}

impl AnalyticShape {
    /// Tessellates `kind`.
    ///
    /// `resolution` is the icosphere subdivision level for spheres, the number
    /// of minor-circle segments for tori (the major circle gets proportionally
    /// more), and the segments per rounded edge for rounded cubes.
    pub fn new(kind: ShapeKind, resolution: Option<u32>) -> Result<AnalyticShape> {
        kind.validate()?;
        let res = resolution.unwrap_or_else(|| kind.default_resolution());
        let mesh = match kind {
            ShapeKind::Sphere { radius } => {
                if res > 8 {
                    return Err(NbvError::invalid("icosphere subdivision above 8 is not supported"));
                }
                icosphere(res).scaled_translated(radius, Vector3::zeros())?
            }
            ShapeKind::Torus { major, minor } => torus(major, minor, res.max(3))?,
            ShapeKind::RoundedCube { side, edge_radius } => rounded_cube(side, edge_radius, res.max(1))?,
        };
        Ok(AnalyticShape {
            kind,
            area: kind.area(),
            volume: kind.volume(),
            mesh,
        })
    }

    pub fn reach(&self) -> f64 {
        self.kind.reach()
    }
}

/// Unit icosphere: a regular icosahedron with `subdivisions` rounds of
/// midpoint subdivision, `20 * 4^subdivisions` faces.
pub fn icosphere(subdivisions: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point3<f64>> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| Point3::from(Vector3::from(*v).normalize()))
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, vertices: &mut Vec<Point3<f64>>| -> u32 {
            *midpoints.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let m = (vertices[a as usize].coords + vertices[b as usize].coords).normalize();
                vertices.push(Point3::from(m));
                (vertices.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh::new(vertices, faces).expect("icosphere construction is valid")
}

fn torus(major: f64, minor: f64, minor_segments: u32) -> Result<TriangleMesh> {
    let nv = minor_segments as usize;
    // keep quads roughly square
    let nu = ((major / minor) * nv as f64).ceil().max(nv as f64) as usize;
    let mut vertices = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = 2.0 * PI * i as f64 / nu as f64;
        for j in 0..nv {
            let v = 2.0 * PI * j as f64 / nv as f64;
            let rho = major + minor * v.cos();
            vertices.push(Point3::new(rho * u.cos(), rho * u.sin(), minor * v.sin()));
        }
    }
    let idx = |i: usize, j: usize| ((i % nu) * nv + (j % nv)) as u32;
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    TriangleMesh::new(vertices, faces)
}

fn rounded_cube(side: f64, radius: f64, edge_segments: u32) -> Result<TriangleMesh> {
    let half = side / 2.0;
    let inner = half - radius;
    // knots along one axis of the surface lattice: rounded band, flat span, rounded band
    let k = edge_segments as usize;
    let flat = if inner > 0.0 {
        // flat spans need no refinement beyond keeping triangles reasonably shaped
        ((2.0 * inner / (side / 8.0)).ceil() as usize).max(1)
    } else {
        0
    };
    let mut knots: Vec<f64> = Vec::new();
    for i in 0..k {
        // angular spacing inside the band maps onto the quarter arc evenly
        let ang = PI / 4.0 * (1.0 - i as f64 / k as f64);
        knots.push(-inner - radius * ang.tan());
    }
    for i in 0..=flat {
        knots.push(-inner + 2.0 * inner * i as f64 / flat.max(1) as f64);
        if flat == 0 {
            break;
        }
    }
    for i in 1..=k {
        let ang = PI / 4.0 * i as f64 / k as f64;
        knots.push(inner + radius * ang.tan());
    }
    let n = knots.len() - 1;

    let mut index: HashMap<[usize; 3], u32> = HashMap::new();
    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut vid = |c: [usize; 3], vertices: &mut Vec<Point3<f64>>| -> u32 {
        *index.entry(c).or_insert_with(|| {
            let q = Vector3::new(knots[c[0]], knots[c[1]], knots[c[2]]);
            let core = q.map(|x| x.clamp(-inner, inner));
            let dir = (q - core).normalize();
            vertices.push(Point3::from(core + dir * radius));
            (vertices.len() - 1) as u32
        })
    };

    let mut faces = Vec::new();
    for axis in 0..3 {
        let (ua, va) = ((axis + 1) % 3, (axis + 2) % 3);
        for (side_idx, outward) in [(0usize, -1.0f64), (n, 1.0)] {
            for i in 0..n {
                for j in 0..n {
                    let corner = |di: usize, dj: usize| {
                        let mut c = [0usize; 3];
                        c[axis] = side_idx;
                        c[ua] = i + di;
                        c[va] = j + dj;
                        c
                    };
                    let a = vid(corner(0, 0), &mut vertices);
                    let b = vid(corner(1, 0), &mut vertices);
                    let c = vid(corner(1, 1), &mut vertices);
                    let d = vid(corner(0, 1), &mut vertices);
                    // (ua, va, axis) is right-handed, so counter-clockwise in
                    // (ua, va) faces +axis
                    if outward > 0.0 {
                        faces.push([a, b, c]);
                        faces.push([a, c, d]);
                    } else {
                        faces.push([a, c, b]);
                        faces.push([a, d, c]);
                    }
                }
            }
        }
    }
    TriangleMesh::new(vertices, faces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosphere_face_counts() {
        assert_eq!(icosphere(0).face_count(), 20);
        assert_eq!(icosphere(3).face_count(), 1280);
        assert!(icosphere(3).is_watertight());
        assert_eq!(icosphere(3).vertices().len(), 642);
    }

    #[test]
    fn closed_forms() {
        let s = ShapeKind::Sphere { radius: 1.0 };
        assert!((s.area() - 12.566).abs() < 1e-3);
        assert!((s.volume() - 4.189).abs() < 1e-3);
        let t = ShapeKind::Torus { major: 1.0, minor: 0.3 };
        assert!((t.area() - 11.844).abs() < 1e-3);
        assert!((t.volume() - 1.777).abs() < 1e-3);
        // Steiner formula for the cube dilated by a ball
        let c = ShapeKind::RoundedCube { side: 1.0, edge_radius: 0.1 };
        let expected = 0.8f64.powi(3) + 6.0 * 0.64 * 0.1 + 3.0 * PI * 0.8 * 0.01 + 4.0 / 3.0 * PI * 0.001;
        assert!((c.volume() - expected).abs() < 1e-12);
    }

    #[test]
    fn tessellations_are_watertight_and_accurate() {
        for kind in [
            ShapeKind::Sphere { radius: 1.0 },
            ShapeKind::Torus { major: 1.0, minor: 0.3 },
            ShapeKind::RoundedCube { side: 1.0, edge_radius: 0.1 },
        ] {
            let s = AnalyticShape::new(kind, None).unwrap();
            assert!(s.mesh.is_watertight(), "{kind:?}");
            let rel = (s.mesh.area() - s.area).abs() / s.area;
            assert!(rel < 0.01, "{kind:?} area error {rel}");
            let relv = (s.mesh.volume() - s.volume).abs() / s.volume;
            assert!(relv < 0.01, "{kind:?} volume error {relv}");
            // outward orientation
            assert!(s.mesh.volume() > 0.0);
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        for kind in [
            ShapeKind::Sphere { radius: 0.0 },
            ShapeKind::Torus { major: 0.3, minor: 0.3 },
            ShapeKind::RoundedCube { side: 1.0, edge_radius: 0.0 },
        ] {
            assert!(matches!(AnalyticShape::new(kind, None), Err(NbvError::InvalidInput(_))));
        }
    }

    #[test]
    fn rounded_cube_with_no_flat_part_is_a_sphere() {
        let s = AnalyticShape::new(ShapeKind::RoundedCube { side: 2.0, edge_radius: 1.0 }, Some(8)).unwrap();
        assert!(s.mesh.is_watertight());
        assert!((s.area - 4.0 * PI).abs() < 1e-12);
        assert!(s.mesh.vertices().iter().all(|v| (v.coords.norm() - 1.0).abs() < 1e-12));
    }
}
