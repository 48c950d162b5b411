use std::fmt;
use std::str::FromStr;

use nalgebra::Point3;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coverage::{estimate_gain, oracle_gain_field, GainFieldParams, PoseHistory};
use crate::error::{NbvError, Result};
use crate::geometry::{Aabb, TriangleMesh};
use crate::occupancy::{binary_entropy, sample_proxy_points, CarvingOccupancy, OccupancyField, OracleOccupancy};
use crate::sensor::{CameraPose, SensorIntrinsics};
use crate::sh::ShProjector;

/// Candidate-scoring rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    /// Volumetric coverage-gain estimate from ray-cast gain fields.
    Gain,
    /// Occupancy entropy inside the frustum.
    Entropy,
    /// Uniform choice among candidates.
    Random,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [PolicyKind::Gain, PolicyKind::Entropy, PolicyKind::Random];

    pub fn name(&self) -> &'static str {
        match self {
            PolicyKind::Gain => "gain",
            PolicyKind::Entropy => "entropy",
            PolicyKind::Random => "random",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = NbvError;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| NbvError::invalid(format!("unknown policy '{s}' (expected gain, entropy or random)")))
    }
}

/// Numeric knobs shared by the scoring policies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoringParams {
    pub proxies: usize,
    pub mu: f64,
    /// Distance penalty `1 / (η + r²)` on each proxy term.
    pub eta: Option<f64>,
    pub gain_camera_distance: f64,
}

/// World state a policy may read when scoring.
pub struct ScoringInputs<'a> {
    pub mesh: &'a TriangleMesh,
    pub history: &'a PoseHistory,
    pub carving: &'a CarvingOccupancy,
    pub intrinsics: &'a SensorIntrinsics,
    pub projector: &'a ShProjector,
    /// Region from which ground-truth proxies are drawn.
    pub object_bounds: Aabb,
}

/// One score per candidate; the caller takes the argmax.
pub fn score_candidates<R: Rng + ?Sized>(
    kind: PolicyKind,
    inputs: &ScoringInputs<'_>,
    candidates: &[CameraPose],
    params: &ScoringParams,
    rng: &mut R,
) -> Result<Vec<f64>> {
    match kind {
        PolicyKind::Random => Ok(candidates.iter().map(|_| rng.gen::<f64>()).collect()),
        PolicyKind::Gain => gain_scores(inputs, candidates, params, rng),
        PolicyKind::Entropy => entropy_scores(inputs, candidates, params, rng),
    }
}

fn gain_scores<R: Rng + ?Sized>(
    inputs: &ScoringInputs<'_>,
    candidates: &[CameraPose],
    params: &ScoringParams,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let field = OracleOccupancy::new(Some(inputs.mesh), inputs.object_bounds)?;
    let mut proxy = sample_proxy_points(&field, params.proxies, rng)?;
    let gp = GainFieldParams {
        mu: params.mu,
        camera_distance: params.gain_camera_distance,
    };
    oracle_gain_field(inputs.mesh, inputs.history, &mut proxy, &gp, inputs.projector, Some(candidates))?;
    candidates
        .par_iter()
        .map(|c| estimate_gain(&proxy, c, inputs.intrinsics, params.eta).map(|g| g.gain))
        .collect()
}

fn entropy_scores<R: Rng + ?Sized>(
    inputs: &ScoringInputs<'_>,
    candidates: &[CameraPose],
    params: &ScoringParams,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let proxy = sample_proxy_points(inputs.carving, params.proxies, rng)?;
    let weighted: Vec<(Point3<f64>, f64)> = proxy
        .points
        .iter()
        .map(|x| (*x, binary_entropy(inputs.carving.probability(x))))
        .collect();
    let n = weighted.len() as f64;
    Ok(candidates
        .par_iter()
        .map(|c| {
            let sum: f64 = weighted
                .iter()
                .filter(|(x, _)| c.sees_in_frustum(inputs.intrinsics, x))
                .map(|(x, h)| match params.eta {
                    Some(eta) => h / (eta + (x - c.position).norm_squared()),
                    None => *h,
                })
                .sum();
            sum / n
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_names_round_trip() {
        for p in PolicyKind::ALL {
            assert_eq!(p.name().parse::<PolicyKind>().unwrap(), p);
            let json = serde_json::to_string(&p).unwrap();
            assert_eq!(json, format!("\"{}\"", p.name()));
        }
        assert!("greedy".parse::<PolicyKind>().is_err());
    }
}
