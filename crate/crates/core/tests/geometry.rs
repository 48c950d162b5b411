mod common;

use nalgebra::{Point3, Vector3};
use nbv_core::geometry::io::{load_mesh, write_mesh_obj, write_mesh_ply};
use nbv_core::geometry::{icosphere, AnalyticShape, Ray, ShapeKind};
use proptest::prelude::*;

#[test]
fn shipped_assets_are_closed_and_normalized() {
    let blob = common::blob();
    assert!(blob.is_watertight());
    assert!(blob.volume() > 0.0);
    let b = blob.bounds();
    assert!((b.extent().max() - 1.0).abs() < 1e-12);
    assert!(b.center().coords.norm() < 1e-12);

    let desk = common::desk_scene();
    assert!(desk.is_watertight());
    // everything rests on or above the floor plane
    assert!(desk.bounds().min.z > -1e-9);
}

#[test]
fn ply_and_obj_round_trips_preserve_the_mesh() {
    let m = common::rounded_cube();
    let dir = tempfile::tempdir().unwrap();
    for name in ["m.ply", "m.obj"] {
        let p = dir.path().join(name);
        if name.ends_with("ply") {
            write_mesh_ply(&m, &p).unwrap();
        } else {
            write_mesh_obj(&m, &p).unwrap();
        }
        let back = load_mesh(&p, false).unwrap();
        assert_eq!(back.faces(), m.faces());
        // PLY stores f32 coordinates
        assert!((back.volume() - m.volume()).abs() < 1e-5 * m.volume());
    }
}

#[test]
fn tessellations_approach_closed_form_measures() {
    let kinds = [
        ShapeKind::Sphere { radius: 1.0 },
        ShapeKind::Torus { major: 1.0, minor: 0.4 },
        ShapeKind::RoundedCube { side: 1.0, edge_radius: 0.15 },
    ];
    for k in kinds {
        let s = AnalyticShape::new(k, None).unwrap();
        assert!((s.mesh.area() / k.area() - 1.0).abs() < 0.01, "{} area", k.name());
        assert!((s.mesh.volume() / k.volume() - 1.0).abs() < 0.01, "{} volume", k.name());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn inside_test_agrees_with_signed_distance(x in -1.5..1.5f64, y in -1.5..1.5f64, z in -1.5..1.5f64) {
        let m = icosphere(3);
        let p = Point3::new(x, y, z);
        let sd = m.signed_distance(&p).unwrap();
        prop_assume!(sd.abs() > 1e-6);
        // positive inside
        prop_assert_eq!(m.point_inside(&p).unwrap(), sd > 0.0);
        // the tessellation sits within 0.01 of the unit sphere
        prop_assert!((sd - (1.0 - p.coords.norm())).abs() < 0.01);
    }

    #[test]
    fn rays_toward_the_center_hit_the_near_side(theta in 0.0..std::f64::consts::PI, phi in 0.0..std::f64::consts::TAU, r in 1.5..5.0f64) {
        let m = icosphere(3);
        let d = Vector3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
        let o = Point3::from(r * d);
        let hit = m.ray_intersect(&Ray::infinite(o, -d).unwrap()).unwrap();
        prop_assert!((hit.t - (r - 1.0)).abs() < 0.01);
        prop_assert!(m.any_hit(&o, &-d, 0.0, f64::INFINITY));
        prop_assert!(!m.any_hit(&o, &d, 0.0, f64::INFINITY));
    }
}
