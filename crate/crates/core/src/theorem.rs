//! Numerical check that the volume integral of the neighborhood gain is
//! proportional to the surface coverage gain up to an `O(μ²)` error:
//!
//! `| (1/|χ|_V) ∫_χ g(μ; x) dx − μ (|∂χ|_S / |χ|_V) G_H(c) | ≤ M μ²`
//!
//! Each replicate draws its volume samples once and evaluates every `μ` on
//! them, so the per-`μ` estimates share samples and the slope fit is not
//! inflated by independent noise between `μ` values.

use std::fmt::Write as _;

use nalgebra::{Point3, Vector3};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coverage::{coverage_gain_gt_rig, gain_indicator, occlusion_delta, shell_foot_inside, PoseHistory};
use crate::error::{NbvError, Result};
use crate::geometry::{AnalyticShape, TriangleMesh};
use crate::rng::{indexed_seed, rng_from_seed, stream_seed};
use crate::sensor::CameraPose;
use crate::stats::{mean, std_dev};

pub const MIN_VOLUME_SAMPLES: usize = 10_000;
pub const MIN_SURFACE_SAMPLES: usize = 100_000;
/// Gaps closer than this many standard errors to zero are noise.
pub const NOISE_SIGMAS: f64 = 3.0;
/// `order_fit` needs at least this many points ...
pub const MIN_FIT_POINTS: usize = 4;
/// ... spanning at least this ratio between the largest and smallest `μ`.
pub const MIN_FIT_SPAN: f64 = 8.0;

const CHUNK: usize = 8192;

/// Inputs of one verification run. The candidate is a rig: a set of poses
/// that observe together.
#[derive(Clone, Debug)]
pub struct TheoremTrial {
    pub shape: AnalyticShape,
    pub history: PoseHistory,
    pub candidate: Vec<CameraPose>,
    /// Strictly decreasing, positive, at most half the shape's reach.
    pub mus: Vec<f64>,
    pub volume_samples: usize,
    pub surface_samples: usize,
    pub replicates: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuResult {
    pub mu: f64,
    /// Mean over replicates of `(1/|χ|_V) ∫ g`.
    pub integral: f64,
    /// `μ |∂χ|_S / |χ|_V · G_H(c)`, replicate mean.
    pub linear_term: f64,
    /// Absolute mean signed difference.
    pub gap: f64,
    /// Standard error of the signed difference across replicates.
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    /// Replicate mean of the surface coverage gain.
    pub coverage_gain: f64,
    pub area: f64,
    pub volume: f64,
    pub per_mu: Vec<MuResult>,
}

impl TrialResult {
    /// CSV with columns `mu,integral,gap,sigma`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("mu,integral,gap,sigma\n");
        for r in &self.per_mu {
            writeln!(s, "{:.6e},{:.9e},{:.9e},{:.9e}", r.mu, r.integral, r.gap, r.sigma).expect("write to string");
        }
        s
    }

    pub fn fit_points(&self) -> Vec<(f64, f64, f64)> {
        self.per_mu.iter().map(|r| (r.mu, r.gap, r.sigma)).collect()
    }
}

impl TheoremTrial {
    pub fn validate(&self) -> Result<()> {
        if self.mus.is_empty() {
            return Err(NbvError::invalid("at least one mu value is required"));
        }
        if self.mus.iter().any(|&m| !(m > 0.0)) {
            return Err(NbvError::invalid("mu values must be positive"));
        }
        if self.mus.windows(2).any(|w| w[1] >= w[0]) {
            return Err(NbvError::invalid("mu values must be strictly decreasing"));
        }
        let limit = 0.5 * self.shape.reach();
        if self.mus[0] > limit {
            return Err(NbvError::invalid(format!(
                "mu {} exceeds half the shape's reach ({limit})",
                self.mus[0]
            )));
        }
        if self.volume_samples < MIN_VOLUME_SAMPLES {
            return Err(NbvError::invalid(format!("need at least {MIN_VOLUME_SAMPLES} volume samples")));
        }
        if self.surface_samples < MIN_SURFACE_SAMPLES {
            return Err(NbvError::invalid(format!("need at least {MIN_SURFACE_SAMPLES} surface samples")));
        }
        if self.replicates < 2 {
            return Err(NbvError::invalid("need at least two replicates to estimate noise"));
        }
        if self.candidate.is_empty() {
            return Err(NbvError::invalid("candidate rig is empty"));
        }
        Ok(())
    }

    pub fn run(&self) -> Result<TrialResult> {
        self.validate()?;
        let mesh = &self.shape.mesh;
        let (area, volume) = (self.shape.area, self.shape.volume);
        let mut gains = Vec::with_capacity(self.replicates);
        let mut diffs = vec![Vec::with_capacity(self.replicates); self.mus.len()];
        let mut integrals = vec![Vec::with_capacity(self.replicates); self.mus.len()];
        let vol_stream = stream_seed(self.seed, "theorem-volume");
        let surf_stream = stream_seed(self.seed, "theorem-surface");
        for r in 0..self.replicates as u64 {
            let surf = mesh.sample_surface(self.surface_samples, indexed_seed(surf_stream, r))?;
            let g = coverage_gain_gt_rig(mesh, &self.history, &self.candidate, &surf)?;
            let lhs = volume_integrals(mesh, &self.history, &self.candidate, &self.mus, self.volume_samples, indexed_seed(vol_stream, r))?;
            for (k, &mu) in self.mus.iter().enumerate() {
                integrals[k].push(lhs[k]);
                diffs[k].push(lhs[k] - mu * area / volume * g);
            }
            gains.push(g);
        }
        let g = mean(&gains);
        let per_mu = self
            .mus
            .iter()
            .enumerate()
            .map(|(k, &mu)| MuResult {
                mu,
                integral: mean(&integrals[k]),
                linear_term: mu * area / volume * g,
                gap: mean(&diffs[k]).abs(),
                sigma: std_dev(&diffs[k]) / (self.replicates as f64).sqrt(),
            })
            .collect();
        Ok(TrialResult {
            coverage_gain: g,
            area,
            volume,
            per_mu,
        })
    }
}

/// Uniform samples inside a watertight mesh by rejection from its bounding
/// box; candidate chunks use independent seeded streams so the result does
/// not depend on thread count.
pub fn sample_inside(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<Vec<Point3<f64>>> {
    if !mesh.is_watertight() {
        return Err(NbvError::Contract("volume sampling needs a watertight mesh".into()));
    }
    let bbox = mesh.bounds();
    let ext = bbox.extent();
    let cap = 100 * n;
    let mut out = Vec::with_capacity(n);
    let mut draws = 0usize;
    let mut chunk = 0u64;
    while out.len() < n && draws < cap {
        let m = CHUNK.min(cap - draws);
        let mut rng = rng_from_seed(indexed_seed(seed, chunk));
        chunk += 1;
        let cand: Vec<Point3<f64>> = (0..m)
            .map(|_| bbox.min + Vector3::new(rng.gen::<f64>() * ext.x, rng.gen::<f64>() * ext.y, rng.gen::<f64>() * ext.z))
            .collect();
        let inside: Vec<bool> = cand.par_iter().map(|p| mesh.point_inside_unchecked(p)).collect();
        for (p, ok) in cand.into_iter().zip(inside) {
            draws += 1;
            if ok {
                out.push(p);
                if out.len() == n {
                    break;
                }
            }
        }
    }
    if out.len() < n {
        return Err(NbvError::SamplingFailure {
            acceptance_rate: out.len() as f64 / draws.max(1) as f64,
            draws,
        });
    }
    Ok(out)
}

/// `(1/|χ|_V) ∫ g(μ; x) dx` for every `μ`, estimated on one shared set of
/// `n` uniform volume samples.
pub fn volume_integrals(
    mesh: &TriangleMesh,
    history: &PoseHistory,
    rig: &[CameraPose],
    mus: &[f64],
    n: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if n < MIN_VOLUME_SAMPLES {
        return Err(NbvError::invalid(format!("need at least {MIN_VOLUME_SAMPLES} volume samples")));
    }
    let mu_max = mus.iter().cloned().fold(0.0, f64::max);
    let pts = sample_inside(mesh, n, seed)?;
    let delta = occlusion_delta(mesh);
    // depth of each sample whose foot point carries gain, else infinity
    let depths: Vec<f64> = pts
        .par_iter()
        .with_min_len(256)
        .map(|x| match shell_foot_inside(mesh, x, mu_max) {
            Some(f) if gain_indicator(mesh, history, rig, &f.foot, delta) => f.depth,
            _ => f64::INFINITY,
        })
        .collect();
    Ok(mus
        .iter()
        .map(|&mu| depths.iter().filter(|&&d| d < mu).count() as f64 / n as f64)
        .collect())
}

/// Single-`μ` volume integral.
pub fn volume_integral_g(
    mesh: &TriangleMesh,
    history: &PoseHistory,
    rig: &[CameraPose],
    mu: f64,
    n: usize,
    seed: u64,
) -> Result<f64> {
    Ok(volume_integrals(mesh, history, rig, &[mu], n, seed)?[0])
}

/// Absolute gap for one replicate.
pub fn theorem_gap(shape: &AnalyticShape, history: &PoseHistory, rig: &[CameraPose], mu: f64, volume_samples: usize, surface_samples: usize, seed: u64) -> Result<f64> {
    if surface_samples < MIN_SURFACE_SAMPLES {
        return Err(NbvError::invalid(format!("need at least {MIN_SURFACE_SAMPLES} surface samples")));
    }
    let surf = shape.mesh.sample_surface(surface_samples, stream_seed(seed, "theorem-surface"))?;
    let g = coverage_gain_gt_rig(&shape.mesh, history, rig, &surf)?;
    let lhs = volume_integral_g(&shape.mesh, history, rig, mu, volume_samples, stream_seed(seed, "theorem-volume"))?;
    Ok((lhs - mu * shape.area / shape.volume * g).abs())
}

/// Outcome of the convergence-order fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum OrderFit {
    Slope { slope: f64, intercept: f64 },
    Inconclusive { reason: String },
}

impl OrderFit {
    pub fn slope(&self) -> Option<f64> {
        match self {
            OrderFit::Slope { slope, .. } => Some(*slope),
            OrderFit::Inconclusive { .. } => None,
        }
    }
}

/// Least-squares slope of `log gap` against `log μ` over `(μ, gap, σ)`
/// points; inconclusive if any gap is within `3σ` of zero.
pub fn order_fit(points: &[(f64, f64, f64)]) -> Result<OrderFit> {
    if points.len() < MIN_FIT_POINTS {
        return Err(NbvError::invalid(format!("order fit needs at least {MIN_FIT_POINTS} mu values")));
    }
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(0.0, f64::max);
    if !(lo > 0.0) || hi / lo < MIN_FIT_SPAN * (1.0 - 1e-12) {
        return Err(NbvError::invalid(format!(
            "mu values must be positive and span a factor of at least {MIN_FIT_SPAN}"
        )));
    }
    for &(mu, gap, sigma) in points {
        if !(gap > 0.0) || gap < NOISE_SIGMAS * sigma {
            return Ok(OrderFit::Inconclusive {
                reason: format!("gap {gap:.3e} at mu {mu} is within {NOISE_SIGMAS} sigma ({sigma:.3e}) of zero"),
            });
        }
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (mean(&xs), mean(&ys));
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(OrderFit::Slope {
        slope,
        intercept: my - slope * mx,
    })
}

/// Six cameras on the coordinate axes at distance `distance` from `center`,
/// each looking at it.
pub fn axis_rig(center: Point3<f64>, distance: f64) -> Result<Vec<CameraPose>> {
    let axes = [
        Vector3::x(),
        -Vector3::x(),
        Vector3::y(),
        -Vector3::y(),
        Vector3::z(),
        -Vector3::z(),
    ];
    axes.iter()
        .map(|a| CameraPose::look_at(center + distance * a, center))
        .collect()
}
