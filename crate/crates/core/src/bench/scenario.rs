//! Scenario files.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::config::ConfigError;
use crate::geom::{HistoryConfig, RobotPoseSample};
use crate::io::{parse_point_cloud, parse_trajectory};
use crate::planner::PlannerConfig;
use crate::support::{EstimationConfig, EstimationMode};
use crate::world::{parse_world_spec, Bounds, SensorNoise, WorldSpec};

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_stride() -> f64 {
    0.2
}

/// On-disk scenario. Relative paths resolve against the scenario file's
/// directory.
///
/// ```toml
/// name = "default"
/// world = "worlds/default.toml"
/// start = [1.0, 5.0]
/// goal = [9.0, 5.0]
/// mode = "fused"                  # optional; bench runs every mode if absent
/// seeds = [0, 1, 2]
/// traverse = [[0.5, 4.0], [9.5, 4.0]]   # or: trajectory_file = "ride.txt"
/// stride = 0.2
/// # cloud_file = "cloud.xyz"      # otherwise simulated from the world
/// # cloud_region = { min = [0.0, 0.0], max = [10.0, 10.0] }
///
/// [planner]
/// step = 0.5
/// inflation_r = 0.25
/// max_iters = 3000
///
/// [estimation.surf]
/// radius = 0.15
///
/// [estimation.traversability]
/// h_crit = 0.4
///
/// [history]
/// capacity = 50
///
/// [noise]                         # optional; overrides the world's noise
/// cloud_sigma = 0.02
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    pub world: String,
    pub start: [f64; 2],
    pub goal: [f64; 2],
    #[serde(default)]
    pub mode: Option<EstimationMode>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub traverse: Vec<[f64; 2]>,
    #[serde(default = "default_stride")]
    pub stride: f64,
    #[serde(default)]
    pub trajectory_file: Option<String>,
    #[serde(default)]
    pub cloud_file: Option<String>,
    #[serde(default)]
    pub cloud_region: Option<Bounds>,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub estimation: EstimationConfig,
    #[serde(default)]
    pub history: HistoryConfig,
    #[serde(default)]
    pub noise: Option<SensorNoise>,
}

/// Parses a scenario without touching the files it references.
pub fn parse_scenario(text: &str) -> Result<ScenarioFile, ConfigError> {
    let s: ScenarioFile = toml::from_str(text)?;
    let invalid = |m: String| Err(ConfigError::Invalid(m));
    if s.seeds.is_empty() {
        return invalid("at least one seed is required".into());
    }
    if s.trajectory_file.is_none() && s.traverse.len() < 2 {
        return invalid("need a trajectory_file or at least two traverse waypoints".into());
    }
    if !(s.stride > 0.0) {
        return invalid(format!("stride must be positive, got {}", s.stride));
    }
    if s.start.iter().chain(&s.goal).chain(s.traverse.iter().flatten()).any(|v| !v.is_finite()) {
        return invalid("coordinates must be finite".into());
    }
    s.planner.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    s.estimation.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    if s.history.capacity < 2 || !(s.history.min_stride >= 0.0) || !(s.history.sigma_n_pro > 0.0) {
        return invalid(format!("invalid history config: {:?}", s.history));
    }
    if let Some(n) = &s.noise {
        n.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    }
    Ok(s)
}

/// A scenario with its world and any external inputs loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub file: ScenarioFile,
    pub world: WorldSpec,
    pub trajectory: Option<Vec<RobotPoseSample>>,
    pub cloud: Option<Vec<Vector3<f64>>>,
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })
}

impl Scenario {
    /// Loads referenced files relative to `base` and cross-checks them.
    pub fn resolve(file: ScenarioFile, name: String, base: &Path) -> Result<Self, ConfigError> {
        let at = |p: &str| -> PathBuf { base.join(p) };
        let world_path = at(&file.world);
        let world = parse_world_spec(&read(&world_path)?).map_err(|e| match e {
            ConfigError::Io { .. } => e,
            other => ConfigError::Invalid(format!("{}: {other}", world_path.display())),
        })?;
        let model = world.world();
        model
            .validate(Some(file.estimation.traversability.h_crit))
            .map_err(|e| ConfigError::Invalid(format!("{}: {e}", world_path.display())))?;
        let b = &model.bounds;
        for (what, p) in [("start", file.start), ("goal", file.goal)]
            .into_iter()
            .chain(file.traverse.iter().map(|p| ("traverse", *p)))
        {
            if !b.contains(p[0], p[1]) {
                return Err(ConfigError::Invalid(format!("{what} point {p:?} lies outside the world bounds")));
            }
        }
        if file.start == file.goal {
            return Err(ConfigError::Invalid("start and goal coincide".into()));
        }
        if let Some(r) = &file.cloud_region {
            if !b.contains_bounds(r) {
                return Err(ConfigError::Invalid("cloud_region must lie inside the world bounds".into()));
            }
        }
        let parse_err = |p: &PathBuf, e: crate::io::ParseError| ConfigError::Invalid(format!("{}: {e}", p.display()));
        let trajectory = match &file.trajectory_file {
            Some(f) => {
                let p = at(f);
                Some(parse_trajectory(&read(&p)?).map_err(|e| parse_err(&p, e))?)
            }
            None => None,
        };
        let cloud = match &file.cloud_file {
            Some(f) => {
                let p = at(f);
                Some(parse_point_cloud(&read(&p)?).map_err(|e| parse_err(&p, e))?)
            }
            None => None,
        };
        Ok(Self { name, file, world, trajectory, cloud })
    }

    /// Reads and resolves a scenario file. The name defaults to the file stem.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let file = parse_scenario(&read(path)?).map_err(|e| match e {
            ConfigError::Io { .. } => e,
            other => ConfigError::Invalid(format!("{}: {other}", path.display())),
        })?;
        let name = file
            .name
            .clone()
            .unwrap_or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default());
        let base = path.parent().unwrap_or(Path::new("."));
        Self::resolve(file, name, base)
    }

    /// Modes to run: `only` if given, else the scenario's mode, else all.
    pub fn modes(&self, only: Option<EstimationMode>) -> Vec<EstimationMode> {
        match only.or(self.file.mode) {
            Some(m) => vec![m],
            None => EstimationMode::ALL.to_vec(),
        }
    }

    pub fn noise(&self) -> SensorNoise {
        self.file.noise.unwrap_or(self.world.noise)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        world = "w.toml"
        start = [1.0, 1.0]
        goal = [8.0, 8.0]
        traverse = [[0.5, 0.5], [9.0, 0.5]]
    "#;

    #[test]
    fn minimal_scenario_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.seeds, vec![0]);
        assert_eq!(s.mode, None);
        assert_eq!(s.planner, PlannerConfig::default());
        assert_eq!(s.stride, 0.2);
    }

    #[test]
    fn nested_sections_and_mode() {
        let s = parse_scenario(&format!(
            "{MINIMAL}\nmode = \"surf_only\"\nseeds = [3, 4]\n[planner]\ninflation_r = 0.5\n[estimation.traversability]\nh_crit = 0.3\n"
        ))
        .unwrap();
        assert_eq!(s.mode, Some(EstimationMode::SurfOnly));
        assert_eq!(s.planner.inflation_r, 0.5);
        assert_eq!(s.estimation.traversability.h_crit, 0.3);
    }

    #[test]
    fn rejects_invalid() {
        assert!(parse_scenario("start = [0.0, 0.0]").is_err());
        assert!(parse_scenario(&format!("{MINIMAL}\nseeds = []")).is_err());
        assert!(parse_scenario(&format!("{MINIMAL}\nmode = \"both\"")).is_err());
        assert!(parse_scenario(&format!("{MINIMAL}\nbogus = 1")).is_err());
        assert!(parse_scenario(&format!("{MINIMAL}\n[estimation.traversability]\nalpha1 = 0.9")).is_err());
        let no_traverse = MINIMAL.replace("traverse = [[0.5, 0.5], [9.0, 0.5]]", "");
        assert!(parse_scenario(&no_traverse).is_err());
    }

    #[test]
    fn missing_world_is_io_error() {
        let s = parse_scenario(MINIMAL).unwrap();
        let e = Scenario::resolve(s, "x".into(), Path::new("/nonexistent")).unwrap_err();
        assert!(matches!(e, ConfigError::Io { .. }));
    }
}
