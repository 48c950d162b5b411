use std::f64::consts::PI;

use nalgebra::{Point3, Rotation3, Vector3};
use nbv_core::sensor::{CameraPose, SensorIntrinsics};
use nbv_core::sh::quadrature::{fibonacci_sphere, gauss_legendre};
use nbv_core::sh::{camera_history_feature, kernel_lobe, sh_basis, sh_index, ShVector, MAX_DEGREE, SH_COUNT};

/// `∫₀¹ P_l(t) dt` for l = 0..=7, from the closed form for odd degrees.
const HALF_LEGENDRE: [f64; 8] = [1.0, 0.5, 0.0, -0.125, 0.0, 0.0625, 0.0, -5.0 / 128.0];

/// Projects the indicator of the hemisphere around `axis` with a rule that is
/// exact on that hemisphere (Gauss–Legendre in the polar cosine over [0, 1]).
fn hemisphere_coefficients(axis: &Vector3<f64>) -> ShVector {
    let rot = Rotation3::rotation_between(&Vector3::z(), axis).unwrap_or_else(|| Rotation3::from_axis_angle(&Vector3::x_axis(), PI));
    let (t, w) = gauss_legendre(24);
    let n_phi = 64;
    let mut out = ShVector::zeros();
    for (t, w) in t.iter().zip(&w) {
        let z = 0.5 * (t + 1.0);
        let r = (1.0 - z * z).sqrt();
        for j in 0..n_phi {
            let phi = 2.0 * PI * j as f64 / n_phi as f64;
            let d = rot * Vector3::new(r * phi.cos(), r * phi.sin(), z);
            out.add_assign_scaled(&sh_basis(&d).unwrap(), 0.5 * w * 2.0 * PI / n_phi as f64);
        }
    }
    out
}

#[test]
fn hemisphere_projection_obeys_funk_hecke() {
    for axis in [Vector3::z(), Vector3::new(0.3, -0.8, 0.52).normalize()] {
        let c = hemisphere_coefficients(&axis);
        let y = sh_basis(&axis).unwrap();
        for (l, half) in HALF_LEGENDRE.iter().enumerate() {
            let lambda = 2.0 * PI * half;
            for m in -(l as i32)..=l as i32 {
                let i = sh_index(l, m);
                assert!((c.0[i] - lambda * y.0[i]).abs() < 1e-10, "l={l} m={m}");
            }
        }
    }
}

fn intr() -> SensorIntrinsics {
    SensorIntrinsics::new(32, 32, 1.0, 1.0, 0.1, 10.0).unwrap()
}

#[test]
fn history_feature_peaks_toward_the_camera() {
    let x = Point3::new(0.1, 0.2, -0.1);
    let pos = Point3::new(2.0, -1.0, 1.5);
    let c = CameraPose::look_at(pos, x).unwrap();
    let f = camera_history_feature(&x, &[c], &intr());
    let u = (pos - x).normalize();
    let best = fibonacci_sphere(4000)
        .into_iter()
        .max_by(|a, b| f.eval(a).unwrap().total_cmp(&f.eval(b).unwrap()))
        .unwrap();
    assert!(best.dot(&u) > 0.99, "peak {best:?} vs camera {u:?}");
}

#[test]
fn opposite_cameras_give_antipodal_features() {
    let x = Point3::origin();
    let a = CameraPose::look_at(Point3::new(1.0, 2.0, -2.0), x).unwrap();
    let b = CameraPose::look_at(Point3::new(-1.0, -2.0, 2.0), x).unwrap();
    let fa = camera_history_feature(&x, &[a], &intr());
    let fb = camera_history_feature(&x, &[b], &intr());
    for d in fibonacci_sphere(200) {
        assert!((fa.eval(&d).unwrap() - fb.eval(&-d).unwrap()).abs() < 1e-12);
    }
    // both cameras together: an even function of direction
    let both = camera_history_feature(&x, &[a, b], &intr());
    for l in (1..=MAX_DEGREE).step_by(2) {
        for m in -(l as i32)..=l as i32 {
            assert!(both.get(l, m).abs() < 1e-12);
        }
    }
}

#[test]
fn cameras_that_miss_the_point_contribute_nothing() {
    let x = Point3::origin();
    let away = CameraPose::looking(Point3::new(0.0, 0.0, 2.0), Vector3::z(), 0.0).unwrap();
    assert!(camera_history_feature(&x, &[away], &intr()).is_zero());
    let toward = CameraPose::look_at(Point3::new(0.0, 0.0, 2.0), x).unwrap();
    let f = camera_history_feature(&x, &[away, toward], &intr());
    assert_eq!(f, kernel_lobe(&Vector3::z()));
    assert_eq!(f.0.len(), SH_COUNT);
}
