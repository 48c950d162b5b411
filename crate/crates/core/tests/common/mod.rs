#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::{Isometry3, Point3, Vector3};
use nbv_core::bench::SensorConfig;
use nbv_core::geometry::{io::load_mesh, Aabb, AnalyticShape, ShapeKind, TriangleMesh};
use nbv_core::occupancy::OracleOccupancy;
use nbv_core::planner::{scene5d_grid, sphere_grid, PoseGrid, Scene5dParams};
use nbv_core::sensor::SensorIntrinsics;

pub fn asset(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets/meshes").join(name)
}

/// Generic orientation so that no sphere-grid poses share an exactly equal
/// true gain by symmetry.
pub fn tilt() -> Isometry3<f64> {
    Isometry3::rotation(Vector3::new(0.61, 0.37, 0.23))
}

pub fn torus() -> TriangleMesh {
    AnalyticShape::new(ShapeKind::Torus { major: 1.0, minor: 0.4 }, None)
        .unwrap()
        .mesh
        .transformed(&tilt())
        .normalized_to_unit_cube()
        .unwrap()
}

pub fn rounded_cube() -> TriangleMesh {
    AnalyticShape::new(ShapeKind::RoundedCube { side: 1.0, edge_radius: 0.15 }, None)
        .unwrap()
        .mesh
        .transformed(&tilt())
        .normalized_to_unit_cube()
        .unwrap()
}

pub fn blob() -> TriangleMesh {
    load_mesh(&asset("blob.ply"), true).unwrap()
}

/// The three shipped object meshes, unit-cube normalized.
pub fn test_meshes() -> Vec<(&'static str, TriangleMesh)> {
    vec![("torus", torus()), ("rounded-cube", rounded_cube()), ("blob", blob())]
}

pub fn object_intrinsics() -> SensorIntrinsics {
    SensorConfig::object_default().intrinsics().unwrap()
}

pub fn scene_intrinsics() -> SensorIntrinsics {
    SensorConfig::scene_default().intrinsics().unwrap()
}

pub const OBJECT_RADIUS: f64 = 2.0;

pub fn object_grid() -> PoseGrid {
    sphere_grid(Point3::origin(), OBJECT_RADIUS, 10, 10).unwrap()
}

pub fn desk_scene() -> TriangleMesh {
    load_mesh(&asset("desk_scene.ply"), false).unwrap()
}

/// 10 x 10 x 4 positions, 4 elevations, 8 azimuths over the desk, with
/// collisions masked; returns the grid and the reconstruction region.
pub fn desk_grid(mesh: &TriangleMesh) -> (PoseGrid, Aabb) {
    let bbox = Aabb::new(Point3::new(0.0, 0.0, 0.1), Point3::new(3.2, 3.2, 1.3));
    let mut grid = scene5d_grid(&Scene5dParams {
        bbox,
        step: [0.32, 0.32, 0.3],
        n_elev: 4,
        n_azim: 8,
        max_elevation: std::f64::consts::PI / 3.0,
    })
    .unwrap();
    let region = bbox.union(&mesh.bounds());
    grid.mask_collisions(&OracleOccupancy::new(Some(mesh), region).unwrap());
    (grid, region)
}
