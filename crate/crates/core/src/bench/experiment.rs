use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, MeshSource, Protocol};
use super::plot::coverage_svg;
use crate::coverage::PoseHistory;
use crate::error::{NbvError, Result};
use crate::geometry::{io::load_mesh, Aabb, AnalyticShape, TriangleMesh};
use crate::occupancy::OracleOccupancy;
use crate::planner::{run_reconstruction, scene5d_grid, sphere_grid, PolicyKind, PoseGrid, ReconstructionConfig, Scene5dParams, Trajectory};
use crate::sensor::CameraPose;
use crate::stats::{mean, std_dev};
use crate::theorem::{order_fit, MuResult, OrderFit, TheoremTrial};

pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Outcome of one seed; exactly one of `trajectory` and `error` is set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub auc: Option<f64>,
    pub trajectory: Option<Trajectory>,
    pub error: Option<String>,
}

/// Statistics over the seeds that succeeded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub mean_auc: f64,
    pub std_auc: f64,
    pub mean_curve: Vec<f64>,
}

impl Aggregate {
    pub fn from_seeds(seeds: &[SeedResult]) -> Option<Aggregate> {
        let ok: Vec<&Trajectory> = seeds.iter().filter_map(|s| s.trajectory.as_ref()).collect();
        if ok.is_empty() {
            return None;
        }
        let aucs: Vec<f64> = seeds.iter().filter_map(|s| s.auc).collect();
        let len = ok.iter().map(|t| t.coverage.len()).min().unwrap_or(0);
        let mean_curve = (0..len).map(|i| mean(&ok.iter().map(|t| t.coverage[i]).collect::<Vec<_>>())).collect();
        Some(Aggregate {
            n: aucs.len(),
            mean_auc: mean(&aucs),
            std_auc: std_dev(&aucs),
            mean_curve,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremVerdict {
    pub coverage_gain: f64,
    pub area: f64,
    pub volume: f64,
    pub per_mu: Vec<MuResult>,
    pub fit: OrderFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub toolkit_version: String,
    pub protocol: Protocol,
    /// Mesh or shape name, the row key of comparisons.
    pub label: String,
    pub policy: Option<PolicyKind>,
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedResult>,
    pub aggregate: Option<Aggregate>,
    pub theorem: Option<TheoremVerdict>,
    pub wall_time_s: f64,
}

impl RunReport {
    /// True when the planner protocols produced no successful seed.
    pub fn all_failed(&self) -> bool {
        self.protocol != Protocol::VerifyTheorem && self.seeds.iter().all(|s| s.trajectory.is_none())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes to JSON")
    }

    pub fn from_json(text: &str) -> Result<RunReport> {
        serde_json::from_str(text).map_err(|e| NbvError::Format {
            path: "<report>".into(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<RunReport> {
        let text = fs::read_to_string(path).map_err(|e| NbvError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| NbvError::Format {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    /// `seed,auc,final_coverage` for every successful seed.
    pub fn summary_csv(&self) -> String {
        let mut s = String::from("seed,auc,final_coverage\n");
        for r in &self.seeds {
            if let (Some(auc), Some(t)) = (r.auc, &r.trajectory) {
                let last = t.coverage.last().copied().unwrap_or(0.0);
                let _ = writeln!(s, "{},{auc},{last}", r.seed);
            }
        }
        s
    }
}

pub fn load_experiment_mesh(src: &MeshSource, protocol: Protocol) -> Result<TriangleMesh> {
    let normalize = src.normalize.unwrap_or(protocol == Protocol::ObjectSphere);
    if let Some(p) = &src.path {
        return load_mesh(p, normalize);
    }
    let kind = src.analytic.ok_or_else(|| NbvError::Config {
        field: "mesh".into(),
        message: "a mesh path or analytic shape is required".into(),
    })?;
    let mesh = AnalyticShape::new(kind, src.resolution)?.mesh;
    if normalize {
        mesh.normalized_to_unit_cube()
    } else {
        Ok(mesh)
    }
}

/// Grid and reconstruction settings of a planner protocol.
pub fn planner_setup(config: &ExperimentConfig, mesh: &TriangleMesh) -> Result<(PoseGrid, ReconstructionConfig)> {
    let intr = config.sensor_config().intrinsics()?;
    let p = &config.planner;
    let steps = config.steps();
    let (grid, mut rc) = match config.protocol {
        Protocol::ObjectSphere => {
            let g = &config.sphere_grid;
            let grid = sphere_grid(mesh.bounds().center(), g.radius, g.n_elev, g.n_azim)?;
            (grid, ReconstructionConfig::object(mesh, intr, g.radius, p.policy, steps))
        }
        Protocol::Scene5d => {
            let g = config.scene_grid.as_ref().ok_or_else(|| NbvError::Config {
                field: "scene_grid".into(),
                message: "required for the scene5d protocol".into(),
            })?;
            let bbox = Aabb::new(Point3::from(g.bbox_min), Point3::from(g.bbox_max));
            let mut grid = scene5d_grid(&Scene5dParams {
                bbox,
                step: g.step,
                n_elev: g.n_elev,
                n_azim: g.n_azim,
                max_elevation: g.max_elevation_deg.to_radians(),
            })?;
            let region = bbox.union(&mesh.bounds());
            grid.mask_collisions(&OracleOccupancy::new(Some(mesh), region)?);
            (grid, ReconstructionConfig::scene(region, intr, p.policy, steps))
        }
        Protocol::VerifyTheorem => return Err(NbvError::invalid("the theorem protocol has no planner")),
    };
    if let Some(v) = p.eps {
        rc.eps = v;
    }
    if let Some(v) = p.eps_cloud {
        rc.eps_cloud = v;
        if p.mu.is_none() {
            rc.mu = 2.0 * v;
        }
    }
    if let Some(v) = p.mu {
        rc.mu = v;
    }
    if p.eta.is_some() {
        rc.eta = p.eta;
    }
    if let Some(v) = p.proxies {
        rc.proxies = v;
    }
    if let Some(v) = p.gain_directions {
        rc.gain_directions = v;
    }
    if let Some(v) = p.gain_camera_distance {
        rc.gain_camera_distance = v;
    }
    if let Some(v) = p.p0_points {
        rc.p0_points = v;
    }
    if let Some(v) = p.carving_resolution {
        rc.carving_resolution = v;
    }
    rc.validate()?;
    Ok((grid, rc))
}

fn look_at_origin(p: &[f64; 3]) -> Result<CameraPose> {
    CameraPose::look_at(Point3::from(*p), Point3::origin())
}

/// Runs the configured protocol without touching the filesystem beyond
/// reading the mesh.
pub fn execute(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let start = Instant::now();
    let mut report = RunReport {
        toolkit_version: TOOLKIT_VERSION.to_string(),
        protocol: config.protocol,
        label: String::new(),
        policy: None,
        config: config.clone(),
        seeds: Vec::new(),
        aggregate: None,
        theorem: None,
        wall_time_s: 0.0,
    };
    match config.protocol {
        Protocol::VerifyTheorem => {
            let t = &config.theorem;
            let intr = config.sensor_config().intrinsics()?;
            let shape = AnalyticShape::new(t.shape, t.resolution)?;
            report.label = t.shape.name().to_string();
            let trial = TheoremTrial {
                shape,
                history: PoseHistory::with_poses(t.history.iter().map(look_at_origin).collect::<Result<_>>()?, intr),
                candidate: t.cameras.iter().map(look_at_origin).collect::<Result<_>>()?,
                mus: t.mus.clone(),
                volume_samples: t.volume_samples,
                surface_samples: t.surface_samples,
                replicates: t.replicates,
                seed: config.seeds[0],
            };
            let r = trial.run()?;
            let fit = order_fit(&r.fit_points())?;
            report.theorem = Some(TheoremVerdict {
                coverage_gain: r.coverage_gain,
                area: r.area,
                volume: r.volume,
                per_mu: r.per_mu,
                fit,
            });
        }
        Protocol::ObjectSphere | Protocol::Scene5d => {
            let src = config.mesh.as_ref().expect("validated");
            let mesh = load_experiment_mesh(src, config.protocol)?;
            report.label = src.label();
            report.policy = Some(config.planner.policy);
            let (grid, rc) = planner_setup(config, &mesh)?;
            report.seeds = config
                .seeds
                .par_iter()
                .map(|&seed| match run_reconstruction(&mesh, &grid, seed, &rc) {
                    Ok(r) => SeedResult {
                        seed,
                        auc: Some(r.curve.auc),
                        trajectory: Some(r.trajectory),
                        error: None,
                    },
                    Err(e) => SeedResult {
                        seed,
                        auc: None,
                        trajectory: None,
                        error: Some(e.to_string()),
                    },
                })
                .collect();
            report.aggregate = Aggregate::from_seeds(&report.seeds);
        }
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Writes the report, config echo, per-seed curves and trajectories (and
/// the optional plot) into `dir`.
pub fn write_outputs(report: &RunReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| NbvError::io(dir, e))?;
    let put = |name: &str, text: &str| {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| NbvError::io(&p, e))
    };
    put("report.json", &report.to_json())?;
    put("config.toml", &report.config.to_toml_string())?;
    if let Some(t) = &report.theorem {
        let mut csv = String::from("mu,integral,linear_term,gap,sigma\n");
        for m in &t.per_mu {
            let _ = writeln!(csv, "{},{},{},{},{}", m.mu, m.integral, m.linear_term, m.gap, m.sigma);
        }
        put("theorem.csv", &csv)?;
        put("verdict.json", &serde_json::to_string_pretty(&t.fit).expect("verdict serializes"))?;
        return Ok(());
    }
    put("summary.csv", &report.summary_csv())?;
    for s in &report.seeds {
        if let Some(t) = &s.trajectory {
            let mut csv = String::from("step,coverage,points,pose\n");
            for i in 0..t.coverage.len() {
                let _ = writeln!(csv, "{i},{},{},{}", t.coverage[i], t.point_counts[i], t.pose_indices[i]);
            }
            put(&format!("seed_{}.csv", s.seed), &csv)?;
            put(
                &format!("trajectory_{}.json", s.seed),
                &serde_json::to_string_pretty(t).expect("trajectory serializes"),
            )?;
        }
    }
    if report.config.svg {
        let curves: Vec<(String, Vec<f64>)> = report
            .seeds
            .iter()
            .filter_map(|s| s.trajectory.as_ref().map(|t| (format!("seed {}", s.seed), t.coverage.clone())))
            .collect();
        let title = format!("{} / {}", report.label, report.policy.map(|p| p.name()).unwrap_or(""));
        put("coverage.svg", &coverage_svg(&title, &curves, report.aggregate.as_ref().map(|a| a.mean_curve.as_slice())))?;
    }
    Ok(())
}

/// Fresh directory `<output_dir>/<protocol>-<label>[-<policy>]-<unix time>`.
pub fn timestamped_dir(report: &RunReport) -> PathBuf {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut stem = format!("{}-{}", report.protocol.name(), report.label);
    if let Some(p) = report.policy {
        stem.push('-');
        stem.push_str(p.name());
    }
    let base = report.config.output_dir.join(format!("{stem}-{secs}"));
    let mut dir = base.clone();
    let mut k = 2;
    while dir.exists() {
        dir = PathBuf::from(format!("{}-{k}", base.display()));
        k += 1;
    }
    dir
}

/// `execute` followed by `write_outputs` into a timestamped directory.
pub fn run(config: &ExperimentConfig) -> Result<(RunReport, PathBuf)> {
    let report = execute(config)?;
    let dir = timestamped_dir(&report);
    write_outputs(&report, &dir)?;
    Ok((report, dir))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ShapeKind;

    fn small_object(policy: PolicyKind) -> ExperimentConfig {
        let mut c = ExperimentConfig::new(Protocol::ObjectSphere);
        c.mesh = Some(MeshSource {
            analytic: Some(ShapeKind::Sphere { radius: 1.0 }),
            resolution: Some(3),
            ..MeshSource::default()
        });
        c.sensor = Some(super::super::config::SensorConfig {
            width: 48,
            height: 48,
            ..super::super::config::SensorConfig::object_default()
        });
        c.sphere_grid.n_elev = 3;
        c.sphere_grid.n_azim = 4;
        c.planner.policy = policy;
        c.planner.steps = Some(4);
        c.planner.p0_points = Some(2000);
        c.seeds = vec![1, 2, 3];
        c
    }

    #[test]
    fn object_report_shape_and_round_trip() {
        let r = execute(&small_object(PolicyKind::Random)).unwrap();
        assert_eq!(r.seeds.len(), 3);
        for s in &r.seeds {
            assert_eq!(s.trajectory.as_ref().unwrap().coverage.len(), 4);
        }
        let agg = r.aggregate.as_ref().unwrap();
        let aucs: Vec<f64> = r.seeds.iter().map(|s| s.auc.unwrap()).collect();
        assert_eq!(agg.mean_auc, mean(&aucs));
        assert_eq!(agg.std_auc, std_dev(&aucs));
        let back = RunReport::from_json(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn outputs_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small_object(PolicyKind::Random);
        c.svg = true;
        c.output_dir = dir.path().to_path_buf();
        let (report, out) = run(&c).unwrap();
        for name in ["report.json", "config.toml", "summary.csv", "seed_1.csv", "trajectory_2.json", "coverage.svg"] {
            assert!(out.join(name).is_file(), "{name}");
        }
        assert_eq!(RunReport::load(&out.join("report.json")).unwrap(), report);
        assert_ne!(timestamped_dir(&report), out);
    }

    #[test]
    fn missing_mesh_file_names_the_path() {
        let mut c = ExperimentConfig::new(Protocol::ObjectSphere);
        c.mesh = Some(MeshSource {
            path: Some(PathBuf::from("/nonexistent/bunny.ply")),
            ..MeshSource::default()
        });
        let err = execute(&c).unwrap_err();
        assert!(matches!(err, NbvError::Io { .. }));
        assert!(err.to_string().contains("/nonexistent/bunny.ply"));
    }
}
