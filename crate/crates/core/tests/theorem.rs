use nalgebra::{Point3, Vector3};
use nbv_core::coverage::{coverage_gain_gt, PoseHistory};
use nbv_core::geometry::{AnalyticShape, ShapeKind};
use nbv_core::sensor::{CameraPose, SensorIntrinsics};
use nbv_core::theorem::{theorem_gap, volume_integral_g, TheoremTrial};

fn sphere() -> AnalyticShape {
    AnalyticShape::new(ShapeKind::Sphere { radius: 1.0 }, None).unwrap()
}

fn wide() -> SensorIntrinsics {
    SensorIntrinsics::new(4, 4, 2.0, 2.0, 0.01, 10.0).unwrap()
}

/// A camera at distance 2 sees the cap `z ≤ −1/2`, a quarter of the solid
/// angle. Shell points carry gain iff their radial foot lies in that cap, so
/// the normalized integral is `(1 − (1 − μ)³) / 4` while the linear term is
/// `3 μ / 4`; their difference is `(3μ² − μ³) / 4`.
fn exact_gap(mu: f64) -> f64 {
    0.25 * (3.0 * mu * mu - mu.powi(3))
}

#[test]
fn coverage_gain_of_a_cap() {
    let s = sphere();
    let c = CameraPose::look_at(Point3::new(0.0, 0.0, -2.0), Point3::origin()).unwrap();
    let samples = s.mesh.sample_surface(100_000, 5).unwrap();
    let g = coverage_gain_gt(&s.mesh, &PoseHistory::new(wide()), &c, &samples).unwrap();
    assert!((g - 0.25).abs() < 0.005, "{g}");
}

#[test]
fn single_replicate_gap_matches_the_closed_form() {
    let s = sphere();
    let c = [CameraPose::look_at(Point3::new(0.0, 0.0, -2.0), Point3::origin()).unwrap()];
    let gap = theorem_gap(&s, &PoseHistory::new(wide()), &c, 0.1, 1_000_000, 100_000, 7).unwrap();
    // Monte Carlo sigma of one replicate is about 4e-4 at these sample sizes
    assert!((gap - exact_gap(0.1)).abs() < 1.5e-3, "{gap} vs {}", exact_gap(0.1));
}

#[test]
fn a_blind_rig_has_no_gain_and_no_gap() {
    let s = sphere();
    let away = [CameraPose::looking(Point3::new(0.0, 0.0, -2.0), -Vector3::z(), 0.0).unwrap()];
    let h = PoseHistory::new(wide());
    assert_eq!(volume_integral_g(&s.mesh, &h, &away, 0.1, 10_000, 1).unwrap(), 0.0);
    assert_eq!(theorem_gap(&s, &h, &away, 0.1, 10_000, 100_000, 1).unwrap(), 0.0);
}

#[test]
fn a_seen_cap_adds_nothing() {
    let s = sphere();
    let c = CameraPose::look_at(Point3::new(0.0, 0.0, -2.0), Point3::origin()).unwrap();
    let h = PoseHistory::with_poses(vec![c], wide());
    assert_eq!(volume_integral_g(&s.mesh, &h, &[c], 0.1, 10_000, 1).unwrap(), 0.0);
}

#[test]
fn trial_output_has_one_row_per_mu() {
    let trial = TheoremTrial {
        shape: sphere(),
        history: PoseHistory::new(wide()),
        candidate: vec![CameraPose::look_at(Point3::new(0.0, 0.0, -2.0), Point3::origin()).unwrap()],
        mus: vec![0.2, 0.1, 0.05, 0.025],
        volume_samples: 20_000,
        surface_samples: 100_000,
        replicates: 2,
        seed: 3,
    };
    let r = trial.run().unwrap();
    assert_eq!(r.per_mu.len(), 4);
    assert_eq!(r.to_csv().lines().count(), 5);
    assert!((r.area / r.volume - 3.0).abs() < 0.05);
    for m in &r.per_mu {
        assert!(m.integral >= 0.0 && m.sigma >= 0.0);
        assert!((m.gap - (m.integral - m.linear_term).abs()).abs() < 1e-12);
    }
}
