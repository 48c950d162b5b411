use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{NbvError, Result};
use crate::geometry::ShapeKind;
use crate::planner::PolicyKind;
use crate::sensor::SensorIntrinsics;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    ObjectSphere,
    Scene5d,
    VerifyTheorem,
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::ObjectSphere => "object-sphere",
            Protocol::Scene5d => "scene5d",
            Protocol::VerifyTheorem => "verify-theorem",
        }
    }
}

/// A mesh file or a closed-form shape; exactly one must be given.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSource {
    pub path: Option<PathBuf>,
    pub analytic: Option<ShapeKind>,
    /// Tessellation level of an analytic shape.
    pub resolution: Option<u32>,
    /// Fit into the unit cube; defaults to true for the object protocol.
    pub normalize: Option<bool>,
    /// Row label in comparison tables; defaults to the file stem or shape name.
    pub name: Option<String>,
}

impl MeshSource {
    pub fn label(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        if let Some(p) = &self.path {
            return p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "mesh".into());
        }
        self.analytic.map(|k| k.name().to_string()).unwrap_or_else(|| "mesh".into())
    }
}

/// Sensor intrinsics with angles in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorConfig {
    pub width: u32,
    pub height: u32,
    pub hfov_deg: f64,
    pub vfov_deg: f64,
    pub min_range: f64,
    pub max_range: f64,
}

impl SensorConfig {
    pub fn object_default() -> Self {
        SensorConfig {
            width: 256,
            height: 256,
            hfov_deg: 60.0,
            vfov_deg: 60.0,
            min_range: 0.1,
            max_range: 10.0,
        }
    }

    pub fn scene_default() -> Self {
        SensorConfig {
            width: 64,
            height: 48,
            hfov_deg: 60.0,
            vfov_deg: 45.0,
            min_range: 0.05,
            max_range: 2.0,
        }
    }

    /// Near-panoramic sensor for the theorem check, where the frustum must
    /// never clip the shape.
    pub fn theorem_default() -> Self {
        SensorConfig {
            width: 4,
            height: 4,
            hfov_deg: 2.0f64.to_degrees(),
            vfov_deg: 2.0f64.to_degrees(),
            min_range: 0.01,
            max_range: 10.0,
        }
    }

    pub fn intrinsics(&self) -> Result<SensorIntrinsics> {
        SensorIntrinsics::new(
            self.width,
            self.height,
            self.hfov_deg.to_radians(),
            self.vfov_deg.to_radians(),
            self.min_range,
            self.max_range,
        )
        .map_err(|e| NbvError::Config {
            field: "sensor".into(),
            message: e.to_string(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SphereGridConfig {
    pub radius: f64,
    pub n_elev: usize,
    pub n_azim: usize,
}

impl Default for SphereGridConfig {
    fn default() -> Self {
        SphereGridConfig {
            radius: 2.0,
            n_elev: 10,
            n_azim: 10,
        }
    }
}

/// 5D lattice; the box bounds camera positions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneGridConfig {
    pub bbox_min: [f64; 3],
    pub bbox_max: [f64; 3],
    pub step: [f64; 3],
    #[serde(default = "default_scene_elev")]
    pub n_elev: usize,
    #[serde(default = "default_scene_azim")]
    pub n_azim: usize,
    #[serde(default = "default_max_elevation")]
    pub max_elevation_deg: f64,
}

fn default_scene_elev() -> usize {
    4
}

fn default_scene_azim() -> usize {
    8
}

fn default_max_elevation() -> f64 {
    60.0
}

/// Planner overrides; unset fields take protocol defaults.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    pub policy: PolicyKind,
    pub steps: Option<usize>,
    pub eps: Option<f64>,
    pub eps_cloud: Option<f64>,
    pub mu: Option<f64>,
    pub eta: Option<f64>,
    pub proxies: Option<usize>,
    pub gain_directions: Option<usize>,
    pub gain_camera_distance: Option<f64>,
    pub p0_points: Option<usize>,
    pub carving_resolution: Option<usize>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            policy: PolicyKind::Gain,
            steps: None,
            eps: None,
            eps_cloud: None,
            mu: None,
            eta: None,
            proxies: None,
            gain_directions: None,
            gain_camera_distance: None,
            p0_points: None,
            carving_resolution: None,
        }
    }
}

/// Convergence-order check on an analytic shape centered at the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TheoremConfig {
    pub shape: ShapeKind,
    pub resolution: Option<u32>,
    /// Positions of the candidate rig, each looking at the origin.
    pub cameras: Vec<[f64; 3]>,
    /// Positions of the history poses, each looking at the origin.
    pub history: Vec<[f64; 3]>,
    pub mus: Vec<f64>,
    pub volume_samples: usize,
    pub surface_samples: usize,
    pub replicates: usize,
}

impl Default for TheoremConfig {
    fn default() -> Self {
        TheoremConfig {
            shape: ShapeKind::Sphere { radius: 1.0 },
            resolution: None,
            cameras: vec![[0.0, 0.0, -2.0]],
            history: Vec::new(),
            mus: vec![0.2, 0.1, 0.05, 0.025],
            volume_samples: 1_000_000,
            surface_samples: 100_000,
            replicates: 8,
        }
    }
}

/// One experiment: a protocol, its inputs and the seeds to run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    #[serde(default)]
    pub mesh: Option<MeshSource>,
    #[serde(default)]
    pub sensor: Option<SensorConfig>,
    #[serde(default)]
    pub sphere_grid: SphereGridConfig,
    #[serde(default)]
    pub scene_grid: Option<SceneGridConfig>,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub theorem: TheoremConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub svg: bool,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

fn config_err(field: &str, message: impl Into<String>) -> NbvError {
    NbvError::Config {
        field: field.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    /// Defaults for a protocol, with no mesh set.
    pub fn new(protocol: Protocol) -> Self {
        ExperimentConfig {
            protocol,
            mesh: None,
            sensor: None,
            sphere_grid: SphereGridConfig::default(),
            scene_grid: None,
            planner: PlannerConfig::default(),
            theorem: TheoremConfig::default(),
            seeds: default_seeds(),
            output_dir: default_output_dir(),
            svg: false,
        }
    }

    /// Parses TOML text, applies `key=value` overrides (dotted keys, TOML
    /// values; bare words are taken as strings), then validates.
    pub fn from_toml_str(text: &str, overrides: &[String], origin: &Path) -> Result<Self> {
        let mut value: toml::Value = toml::from_str(text).map_err(|e| NbvError::Format {
            path: origin.display().to_string(),
            line: e.span().map(|s| text[..s.start].lines().count().max(1)).unwrap_or(0),
            message: e.message().to_string(),
        })?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let cfg: ExperimentConfig = value
            .try_into()
            .map_err(|e: toml::de::Error| config_err("config", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| NbvError::io(path, e))?;
        Self::from_toml_str(&text, overrides, path)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    pub fn sensor_config(&self) -> SensorConfig {
        self.sensor.unwrap_or(match self.protocol {
            Protocol::ObjectSphere => SensorConfig::object_default(),
            Protocol::Scene5d => SensorConfig::scene_default(),
            Protocol::VerifyTheorem => SensorConfig::theorem_default(),
        })
    }

    pub fn steps(&self) -> usize {
        self.planner.steps.unwrap_or(match self.protocol {
            Protocol::Scene5d => 100,
            _ => 10,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(config_err("seeds", "at least one seed is required"));
        }
        self.sensor_config().intrinsics()?;
        let pos = |field: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(config_err(field, format!("must be positive, got {x}"))),
            _ => Ok(()),
        };
        pos("planner.eps", self.planner.eps)?;
        pos("planner.eps_cloud", self.planner.eps_cloud)?;
        pos("planner.mu", self.planner.mu)?;
        pos("planner.eta", self.planner.eta)?;
        pos("planner.gain_camera_distance", self.planner.gain_camera_distance)?;
        if self.planner.steps == Some(0) {
            return Err(config_err("planner.steps", "must be at least 1"));
        }
        if self.planner.proxies == Some(0) {
            return Err(config_err("planner.proxies", "must be at least 1"));
        }
        if matches!(self.planner.gain_directions, Some(n) if n < 500) {
            return Err(config_err("planner.gain_directions", "must be at least 500"));
        }
        if self.planner.p0_points == Some(0) {
            return Err(config_err("planner.p0_points", "must be at least 1"));
        }
        if self.planner.carving_resolution == Some(0) {
            return Err(config_err("planner.carving_resolution", "must be at least 1"));
        }
        match self.protocol {
            Protocol::ObjectSphere | Protocol::Scene5d => {
                let mesh = self.mesh.as_ref().ok_or_else(|| config_err("mesh", "a mesh path or analytic shape is required"))?;
                match (&mesh.path, &mesh.analytic) {
                    (Some(_), Some(_)) => return Err(config_err("mesh", "give either path or analytic, not both")),
                    (None, None) => return Err(config_err("mesh", "a mesh path or analytic shape is required")),
                    (None, Some(k)) => k.validate().map_err(|e| config_err("mesh.analytic", e.to_string()))?,
                    _ => {}
                }
            }
            Protocol::VerifyTheorem => {}
        }
        match self.protocol {
            Protocol::ObjectSphere => {
                let g = &self.sphere_grid;
                if !(g.radius > 0.0) || g.n_elev == 0 || g.n_azim == 0 {
                    return Err(config_err("sphere_grid", "radius and counts must be positive"));
                }
            }
            Protocol::Scene5d => {
                let g = self
                    .scene_grid
                    .as_ref()
                    .ok_or_else(|| config_err("scene_grid", "required for the scene5d protocol"))?;
                if (0..3).any(|i| !(g.bbox_max[i] > g.bbox_min[i])) {
                    return Err(config_err("scene_grid.bbox_max", "must exceed bbox_min on every axis"));
                }
                if g.step.iter().any(|s| !(*s > 0.0)) {
                    return Err(config_err("scene_grid.step", "steps must be positive"));
                }
                if g.n_elev == 0 || g.n_azim == 0 {
                    return Err(config_err("scene_grid", "angular counts must be positive"));
                }
                if !(0.0..90.0).contains(&g.max_elevation_deg) {
                    return Err(config_err("scene_grid.max_elevation_deg", "must lie in [0, 90)"));
                }
            }
            Protocol::VerifyTheorem => {
                let t = &self.theorem;
                t.shape.validate().map_err(|e| config_err("theorem.shape", e.to_string()))?;
                if t.cameras.is_empty() {
                    return Err(config_err("theorem.cameras", "at least one camera is required"));
                }
                if t.mus.len() < 4 {
                    return Err(config_err("theorem.mus", "at least four values are required"));
                }
                if t.replicates < 2 {
                    return Err(config_err("theorem.replicates", "at least two replicates are required"));
                }
            }
        }
        Ok(())
    }
}

/// Sets a dotted key in a TOML tree, creating tables as needed.
pub fn apply_override(root: &mut toml::Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_err("--set", format!("expected key=value, got '{assignment}'")))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() {
        return Err(config_err("--set", "empty key"));
    }
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = root;
    for part in &parts[..parts.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| config_err(key, "path crosses a non-table value"))?;
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    node.as_table_mut()
        .ok_or_else(|| config_err(key, "path crosses a non-table value"))?
        .insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const OBJECT: &str = r#"
protocol = "object-sphere"
seeds = [1, 2, 3]

[mesh]
analytic = { kind = "torus", major = 1.0, minor = 0.4 }

[planner]
policy = "random"
steps = 5
"#;

    #[test]
    fn parses_and_applies_overrides() {
        let cfg = ExperimentConfig::from_toml_str(
            OBJECT,
            &["planner.steps=7".into(), "planner.policy=entropy".into(), "sphere_grid.radius=2.5".into()],
            Path::new("inline.toml"),
        )
        .unwrap();
        assert_eq!(cfg.steps(), 7);
        assert_eq!(cfg.planner.policy, PolicyKind::Entropy);
        assert_eq!(cfg.sphere_grid.radius, 2.5);
        assert_eq!(cfg.seeds, vec![1, 2, 3]);
        assert_eq!(cfg.mesh.as_ref().unwrap().label(), "torus");
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string(), &[], Path::new("echo.toml")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn validation_names_the_field() {
        let err = ExperimentConfig::from_toml_str(OBJECT, &["planner.steps=0".into()], Path::new("x")).unwrap_err();
        assert!(matches!(err, NbvError::Config { ref field, .. } if field == "planner.steps"), "{err}");
        let err = ExperimentConfig::from_toml_str(OBJECT, &["seeds=[]".into()], Path::new("x")).unwrap_err();
        assert!(matches!(err, NbvError::Config { ref field, .. } if field == "seeds"));
        let err = ExperimentConfig::from_toml_str("protocol = \"scene5d\"\n[mesh]\npath = \"a.ply\"\n", &[], Path::new("x")).unwrap_err();
        assert!(matches!(err, NbvError::Config { ref field, .. } if field == "scene_grid"));
    }

    #[test]
    fn syntax_errors_report_a_line() {
        let err = ExperimentConfig::from_toml_str("protocol = \"object-sphere\"\nseeds = [1,\n", &[], Path::new("bad.toml")).unwrap_err();
        match err {
            NbvError::Format { line, .. } => assert!(line >= 2, "{line}"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn theorem_defaults_validate() {
        let cfg = ExperimentConfig::from_toml_str("protocol = \"verify-theorem\"\n", &[], Path::new("t")).unwrap();
        assert_eq!(cfg.theorem.mus.len(), 4);
        assert_eq!(cfg.sensor_config().width, 4);
    }
}
