//! Regenerates the meshes under `assets/meshes/`.
//!
//! `blob.ply` is a displaced icosphere with a concave waist; `desk_scene.ply`
//! places six disjoint closed objects on a 3 m by 3 m table top (z = 0).

use std::path::Path;

use nalgebra::{Isometry3, Point3, Vector3};
use nbv_core::geometry::io::write_mesh_ply;
use nbv_core::geometry::{icosphere, AnalyticShape, ShapeKind, TriangleMesh};

fn blob() -> TriangleMesh {
    let s = icosphere(4);
    let v: Vec<Point3<f64>> = s
        .vertices()
        .iter()
        .map(|p| {
            let d = p.coords.normalize();
            let r = 1.0 + 0.45 * (2.0 * d.x * d.x - 1.0) + 0.12 * (3.0 * d.y + 1.0).sin() * (2.0 * d.z).cos();
            Point3::from(d * r)
        })
        .collect();
    TriangleMesh::new(v, s.faces().to_vec()).expect("displaced icosphere is valid")
}

/// Unit-cube-normalized copy rotated by `rot` (axis-angle), scaled and then
/// lifted so its lowest point rests on z = `floor`.
fn place(m: &TriangleMesh, rot: Vector3<f64>, scale: f64, x: f64, y: f64, floor: f64) -> TriangleMesh {
    let m = m.transformed(&Isometry3::rotation(rot)).normalized_to_unit_cube().unwrap();
    let m = m.scaled_translated(scale, Vector3::zeros()).unwrap();
    let b = m.bounds();
    m.scaled_translated(1.0, Vector3::new(x, y, floor - b.min.z)).unwrap()
}

fn main() {
    let out = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets/meshes");
    std::fs::create_dir_all(&out).unwrap();
    let blob = blob();
    write_mesh_ply(&blob, &out.join("blob.ply")).unwrap();

    let torus = AnalyticShape::new(ShapeKind::Torus { major: 1.0, minor: 0.4 }, None).unwrap().mesh;
    let cube = AnalyticShape::new(ShapeKind::RoundedCube { side: 1.0, edge_radius: 0.15 }, None).unwrap().mesh;
    let ball = icosphere(3);
    let parts = [
        place(&blob, Vector3::new(0.0, 0.0, 0.5), 0.55, 0.7, 0.8, 0.0),
        place(&torus, Vector3::new(1.2, 0.0, 0.3), 0.6, 2.2, 0.8, 0.0),
        place(&cube, Vector3::new(0.0, 0.0, 0.4), 0.45, 1.5, 2.3, 0.0),
        place(&ball, Vector3::zeros(), 0.5, 2.5, 2.4, 0.0),
        place(&blob, Vector3::new(0.3, 1.1, 2.0), 0.4, 1.5, 1.45, 0.0),
        place(&cube, Vector3::new(0.0, 0.0, 0.1), 0.3, 0.6, 2.3, 0.0),
    ];
    let scene = parts[1..].iter().fold(parts[0].clone(), |acc, p| acc.merged(p));
    assert!(scene.is_watertight());
    write_mesh_ply(&scene, &out.join("desk_scene.ply")).unwrap();
    println!("blob: {} faces; scene: {} faces, bounds {:?}", blob.face_count(), scene.face_count(), scene.bounds());
}
