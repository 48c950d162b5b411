//! Real spherical harmonics up to degree 7 (64 functions).
//!
//! Orthonormal on the unit sphere, without the Condon–Shortley phase:
//!
//! * `Y_l^0 = K_l^0 P_l(cos θ)`
//! * `Y_l^m = √2 K_l^m P_l^m(cos θ) cos(mφ)` for `m > 0`
//! * `Y_l^m = √2 K_l^|m| P_l^|m|(cos θ) sin(|m|φ)` for `m < 0`
//!
//! Coefficient `(l, m)` is stored at index `l² + l + m`.

pub mod quadrature;

use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector, Point3, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{NbvError, Result};
use crate::sensor::{CameraPose, SensorIntrinsics};

pub const MAX_DEGREE: usize = 7;
pub const SH_COUNT: usize = (MAX_DEGREE + 1) * (MAX_DEGREE + 1);

/// Sharpness of the camera-history kernel `exp(κ (d·u − 1))`.
pub const HISTORY_KAPPA: f64 = 10.0;

const UNIT_TOL: f64 = 1e-9;

pub fn sh_index(l: usize, m: i32) -> usize {
    debug_assert!(l <= MAX_DEGREE && m.unsigned_abs() as usize <= l);
    ((l * l + l) as isize + m as isize) as usize
}

/// 64 real coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShVector(pub [f64; SH_COUNT]);

impl Default for ShVector {
    fn default() -> Self {
        ShVector::zeros()
    }
}

impl ShVector {
    pub fn zeros() -> ShVector {
        ShVector([0.0; SH_COUNT])
    }

    pub fn one_hot(l: usize, m: i32) -> ShVector {
        let mut v = ShVector::zeros();
        v.0[sh_index(l, m)] = 1.0;
        v
    }

    pub fn get(&self, l: usize, m: i32) -> f64 {
        self.0[sh_index(l, m)]
    }

    pub fn dot(&self, other: &ShVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn scaled(&self, s: f64) -> ShVector {
        ShVector(self.0.map(|c| c * s))
    }

    pub fn add_assign_scaled(&mut self, other: &ShVector, s: f64) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += s * b;
        }
    }

    /// `Σ c_lm Y_lm(d)`; `d` must be a unit vector.
    pub fn eval(&self, d: &Vector3<f64>) -> Result<f64> {
        Ok(self.dot(&sh_basis(d)?))
    }

    /// `eval` without the unit-norm check.
    pub fn eval_unchecked(&self, d: &Vector3<f64>) -> f64 {
        self.dot(&sh_basis_unchecked(d))
    }
}

impl Serialize for ShVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.as_slice().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ShVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<f64>::deserialize(d)?;
        let arr: [f64; SH_COUNT] = v
            .try_into()
            .map_err(|v: Vec<f64>| serde::de::Error::invalid_length(v.len(), &"64 coefficients"))?;
        Ok(ShVector(arr))
    }
}

/// Basis values at unit direction `d`.
pub fn sh_basis(d: &Vector3<f64>) -> Result<ShVector> {
    let n = d.norm();
    if !((n - 1.0).abs() <= UNIT_TOL) {
        return Err(NbvError::Contract(format!("direction must be unit length, norm is {n}")));
    }
    Ok(sh_basis_unchecked(d))
}

fn norm_consts() -> &'static [f64; SH_COUNT] {
    static K: OnceLock<[f64; SH_COUNT]> = OnceLock::new();
    K.get_or_init(|| {
        let mut k = [0.0; SH_COUNT];
        for l in 0..=MAX_DEGREE {
            for m in 0..=l {
                // (l-m)!/(l+m)! as a running product
                let ratio: f64 = ((l - m + 1)..=(l + m)).map(|i| 1.0 / i as f64).product();
                let base = ((2 * l + 1) as f64 / (4.0 * PI) * ratio).sqrt();
                let scale = if m == 0 { base } else { base * 2f64.sqrt() };
                k[sh_index(l, m as i32)] = scale;
                if m > 0 {
                    k[sh_index(l, -(m as i32))] = scale;
                }
            }
        }
        k
    })
}

pub fn sh_basis_unchecked(d: &Vector3<f64>) -> ShVector {
    let (x, y, z) = (d.x, d.y, d.z);
    let k = norm_consts();
    let mut out = [0.0; SH_COUNT];
    // (x + iy)^m = sin^m(θ) e^{imφ}; q = P_l^m(z) / sin^m(θ) keeps poles regular
    let (mut cm, mut sm) = (1.0, 0.0);
    let mut qmm = 1.0;
    for m in 0..=MAX_DEGREE {
        if m > 0 {
            let c = cm * x - sm * y;
            sm = cm * y + sm * x;
            cm = c;
            qmm *= (2 * m - 1) as f64;
        }
        let mut q_prev = 0.0;
        let mut q = qmm;
        for l in m..=MAX_DEGREE {
            if l == m + 1 {
                q_prev = q;
                q = z * (2 * m + 1) as f64 * qmm;
            } else if l > m + 1 {
                let next = ((2 * l - 1) as f64 * z * q - (l + m - 1) as f64 * q_prev) / (l - m) as f64;
                q_prev = q;
                q = next;
            }
            if m == 0 {
                let i = sh_index(l, 0);
                out[i] = k[i] * q;
            } else {
                let ip = sh_index(l, m as i32);
                let ineg = sh_index(l, -(m as i32));
                out[ip] = k[ip] * q * cm;
                out[ineg] = k[ineg] * q * sm;
            }
        }
    }
    ShVector(out)
}

/// Least-squares projection onto the basis for a fixed direction set.
///
/// The pseudo-inverse of the design matrix is precomputed once.
#[derive(Clone, Debug)]
pub struct ShProjector {
    directions: Vec<Vector3<f64>>,
    pinv: DMatrix<f64>,
    condition: f64,
}

pub const MAX_CONDITION: f64 = 1e6;

impl ShProjector {
    pub fn new(directions: Vec<Vector3<f64>>) -> Result<ShProjector> {
        if directions.len() < SH_COUNT {
            return Err(NbvError::RankDeficient { condition: f64::INFINITY });
        }
        let rows: Vec<ShVector> = directions
            .iter()
            .map(sh_basis)
            .collect::<Result<_>>()?;
        let a = DMatrix::from_fn(directions.len(), SH_COUNT, |i, j| rows[i].0[j]);
        let svd = a.svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        if !(condition < MAX_CONDITION) {
            return Err(NbvError::RankDeficient { condition });
        }
        let pinv = svd
            .pseudo_inverse(0.0)
            .map_err(|_| NbvError::RankDeficient { condition })?;
        Ok(ShProjector {
            directions,
            pinv,
            condition,
        })
    }

    /// Projector on `n` Fibonacci-sphere directions.
    pub fn fibonacci(n: usize) -> Result<ShProjector> {
        ShProjector::new(quadrature::fibonacci_sphere(n))
    }

    /// Shared projector on 1000 Fibonacci directions.
    pub fn default_shared() -> &'static ShProjector {
        static P: OnceLock<ShProjector> = OnceLock::new();
        P.get_or_init(|| ShProjector::fibonacci(1000).expect("1000 Fibonacci directions are well conditioned"))
    }

    pub fn directions(&self) -> &[Vector3<f64>] {
        &self.directions
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Coefficients fitting `values[i]` at `directions()[i]`.
    pub fn project(&self, values: &[f64]) -> Result<ShVector> {
        if values.len() != self.directions.len() {
            return Err(NbvError::invalid(format!(
                "expected {} samples, got {}",
                self.directions.len(),
                values.len()
            )));
        }
        let c = &self.pinv * DVector::from_column_slice(values);
        let mut out = [0.0; SH_COUNT];
        out.copy_from_slice(c.as_slice());
        Ok(ShVector(out))
    }
}

/// Least-squares fit of arbitrary `(direction, value)` samples.
pub fn project(samples: &[(Vector3<f64>, f64)]) -> Result<ShVector> {
    let proj = ShProjector::new(samples.iter().map(|s| s.0).collect())?;
    let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
    proj.project(&values)
}

/// Per-degree Funk–Hecke eigenvalues of the history kernel:
/// `2π ∫ exp(κ(t − 1)) P_l(t) dt`.
fn history_kernel_eigenvalues() -> &'static [f64; MAX_DEGREE + 1] {
    static L: OnceLock<[f64; MAX_DEGREE + 1]> = OnceLock::new();
    L.get_or_init(|| {
        let (t, w) = quadrature::gauss_legendre(48);
        let mut out = [0.0; MAX_DEGREE + 1];
        for (l, o) in out.iter_mut().enumerate() {
            *o = 2.0
                * PI
                * t.iter()
                    .zip(&w)
                    .map(|(t, w)| w * (HISTORY_KAPPA * (t - 1.0)).exp() * quadrature::legendre(l, *t))
                    .sum::<f64>();
        }
        out
    })
}

/// Exact projection of the kernel `exp(κ(d·u − 1))` centered on `u`.
pub fn kernel_lobe(u: &Vector3<f64>) -> ShVector {
    let lam = history_kernel_eigenvalues();
    let mut y = sh_basis_unchecked(u);
    for (l, lam_l) in lam.iter().enumerate() {
        for m in -(l as i32)..=l as i32 {
            y.0[sh_index(l, m)] *= lam_l;
        }
    }
    y
}

/// Encodes the directions from `x` towards every camera in `history` whose
/// frustum contains `x`, as a sum of kernel lobes. Empty selection yields
/// the zero vector.
pub fn camera_history_feature(x: &Point3<f64>, history: &[CameraPose], intr: &SensorIntrinsics) -> ShVector {
    let mut out = ShVector::zeros();
    for c in history {
        if !c.sees_in_frustum(intr, x) {
            continue;
        }
        if let Some(u) = (c.position - x).try_normalize(1e-12) {
            out.add_assign_scaled(&kernel_lobe(&u), 1.0);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::icosphere;

    const Y00: f64 = 0.282_094_791_773_878_14;

    #[test]
    fn constant_and_axial_values() {
        let b = sh_basis(&Vector3::z()).unwrap();
        assert!((b.get(0, 0) - Y00).abs() < 1e-12);
        assert!((b.get(1, 0) - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-12);
        for l in 1..=MAX_DEGREE {
            for m in 1..=l as i32 {
                assert_eq!(b.get(l, m), 0.0);
                assert_eq!(b.get(l, -m), 0.0);
            }
        }
        let d = Vector3::new(0.3, -0.5, 0.2).normalize();
        assert!((sh_basis(&d).unwrap().get(0, 0) - Y00).abs() < 1e-12);
    }

    #[test]
    fn matches_closed_forms_degree_two() {
        let d = Vector3::new(0.36, -0.48, 0.8);
        let b = sh_basis(&d).unwrap();
        let c = (15.0 / (4.0 * PI)).sqrt();
        assert!((b.get(2, -2) - c * d.x * d.y).abs() < 1e-12);
        assert!((b.get(2, -1) - c * d.y * d.z).abs() < 1e-12);
        assert!((b.get(2, 1) - c * d.x * d.z).abs() < 1e-12);
        assert!((b.get(2, 2) - 0.5 * c * (d.x * d.x - d.y * d.y)).abs() < 1e-12);
        assert!((b.get(2, 0) - (5.0 / (16.0 * PI)).sqrt() * (3.0 * d.z * d.z - 1.0)).abs() < 1e-12);
        assert!((b.get(1, -1) - (3.0 / (4.0 * PI)).sqrt() * d.y).abs() < 1e-12);
    }

    #[test]
    fn non_unit_direction_is_contract_error() {
        assert!(matches!(sh_basis(&Vector3::new(0.0, 0.0, 2.0)), Err(NbvError::Contract(_))));
    }

    #[test]
    fn eval_one_hot_and_zero() {
        let e = ShVector::one_hot(0, 0);
        for d in quadrature::fibonacci_sphere(20) {
            assert!((e.eval(&d).unwrap() - Y00).abs() < 1e-12);
            assert_eq!(ShVector::zeros().eval(&d).unwrap(), 0.0);
        }
    }

    #[test]
    fn reproducing_kernel_peaks_at_its_center() {
        let grid = icosphere(3);
        let d0 = grid.vertices()[17].coords.normalize();
        let c = sh_basis(&d0).unwrap();
        let best = grid
            .vertices()
            .iter()
            .map(|v| v.coords.normalize())
            .max_by(|a, b| c.eval_unchecked(a).total_cmp(&c.eval_unchecked(b)))
            .unwrap();
        assert!((best - d0).norm() < 1e-9);
    }

    #[test]
    fn projection_of_constant_and_single_harmonic() {
        let p = ShProjector::fibonacci(1000).unwrap();
        let ones = vec![1.0; 1000];
        let c = p.project(&ones).unwrap();
        assert!((c.get(0, 0) - 2.0 * PI.sqrt()).abs() < 1e-9);
        assert!(c.0[1..].iter().all(|v| v.abs() < 1e-9));
        let vals: Vec<f64> = p.directions().iter().map(|d| sh_basis(d).unwrap().get(2, 1)).collect();
        let c = p.project(&vals).unwrap();
        for i in 0..SH_COUNT {
            let want = if i == sh_index(2, 1) { 1.0 } else { 0.0 };
            assert!((c.0[i] - want).abs() < 1e-3);
        }
    }

    #[test]
    fn band_limited_round_trip() {
        let p = ShProjector::fibonacci(500).unwrap();
        let truth = ShVector(std::array::from_fn(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0));
        let vals: Vec<f64> = p.directions().iter().map(|d| truth.eval_unchecked(d)).collect();
        let c = p.project(&vals).unwrap();
        for d in quadrature::fibonacci_sphere(333) {
            assert!((c.eval_unchecked(&d) - truth.eval_unchecked(&d)).abs() < 1e-3);
        }
    }

    #[test]
    fn too_few_or_clustered_directions_are_rank_deficient() {
        assert!(matches!(ShProjector::fibonacci(40), Err(NbvError::RankDeficient { .. })));
        let clustered: Vec<_> = quadrature::fibonacci_sphere(400)
            .into_iter()
            .map(|d| Vector3::new(d.x * 1e-3, d.y * 1e-3, 1.0).normalize())
            .collect();
        assert!(matches!(ShProjector::new(clustered), Err(NbvError::RankDeficient { .. })));
    }

    #[test]
    fn eval_is_linear() {
        let d = Vector3::new(0.6, 0.0, 0.8);
        let a = ShVector(std::array::from_fn(|i| (i as f64).sin()));
        let b = ShVector(std::array::from_fn(|i| (i as f64 * 0.3).cos()));
        let mut s = a.scaled(2.0);
        s.add_assign_scaled(&b, -3.0);
        let lhs = s.eval(&d).unwrap();
        let rhs = 2.0 * a.eval(&d).unwrap() - 3.0 * b.eval(&d).unwrap();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn json_is_a_64_array() {
        let v = ShVector::one_hot(3, -2);
        let s = serde_json::to_string(&v).unwrap();
        let back: ShVector = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
        assert!(serde_json::from_str::<ShVector>("[1.0, 2.0]").is_err());
    }

    #[test]
    fn kernel_eigenvalues_match_direct_projection() {
        // the l = 0 eigenvalue is 2π (1 − e^{−2κ}) / κ in closed form
        let lam = history_kernel_eigenvalues();
        let k = HISTORY_KAPPA;
        assert!((lam[0] - 2.0 * PI * (1.0 - (-2.0 * k).exp()) / k).abs() < 1e-12);
        assert!(lam.windows(2).all(|w| w[0] > w[1] && w[1] > 0.0));
    }
}
