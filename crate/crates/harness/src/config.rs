//! Suite configuration: a single JSON document, validated as a whole so a
//! bad file reports every offending key at once.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use nbv_core::nbv::RobotGeometry;
use nbv_core::noise::OdometryNoiseModel;
use nbv_core::segmentation::SegmentationParams;
use nbv_core::views::CameraModel;
use nbv_core::voxel::{DEFAULT_EPSILON, DEFAULT_RESOLUTION, DEFAULT_V_BOUNDARY};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    SingleView,
    SameView,
    Random,
    Opposite,
    NextBestView,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::SingleView,
        Scenario::SameView,
        Scenario::Random,
        Scenario::Opposite,
        Scenario::NextBestView,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::SingleView => "single_view",
            Scenario::SameView => "same_view",
            Scenario::Random => "random",
            Scenario::Opposite => "opposite",
            Scenario::NextBestView => "next_best_view",
        }
    }

    /// Distinct depth captures the scenario consumes.
    pub fn renders(self) -> usize {
        match self {
            Scenario::SingleView | Scenario::SameView => 1,
            _ => 2,
        }
    }

    pub fn is_two_view(self) -> bool {
        self.renders() == 2
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How second viewpoints are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondViewMode {
    /// Anywhere on the standoff sphere: the next-best view sits at
    /// `centroid + d·v_nbv`, random views are uniform over the whole sphere.
    #[default]
    Sphere,
    /// Only where the robot can put its camera: the next-best view goes
    /// through `target_pose` (torso clamping included), random views use the
    /// first-view sampler.
    Robot,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProceduralMeshes {
    pub count: usize,
    pub seed: u64,
}

/// Where scores come from: the built-in carving baseline, or per-trial
/// files `<dir>/<mesh>_<pose>.bin` written by an external model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CompleterChoice {
    Shadow,
    File(PathBuf),
}

impl CompleterChoice {
    pub fn parse(s: &str) -> Option<Self> {
        if s == "shadow" {
            Some(Self::Shadow)
        } else {
            s.strip_prefix("file:").filter(|p| !p.is_empty()).map(|p| Self::File(PathBuf::from(p)))
        }
    }
}

/// Camera intrinsics; poses are chosen per trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraIntrinsics {
    pub width: u32,
    pub height: u32,
    pub vertical_fov_deg: f64,
    pub max_range: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        let c = CameraModel::default();
        Self {
            width: c.width,
            height: c.height,
            vertical_fov_deg: c.vertical_fov_deg,
            max_range: c.max_range,
        }
    }
}

impl CameraIntrinsics {
    pub fn model(&self) -> CameraModel {
        CameraModel {
            width: self.width,
            height: self.height,
            vertical_fov_deg: self.vertical_fov_deg,
            max_range: self.max_range,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub scenarios: Vec<Scenario>,
    pub meshes: Vec<PathBuf>,
    pub procedural_meshes: Option<ProceduralMeshes>,
    pub poses_per_mesh: usize,
    pub resolution: usize,
    pub d_optimal: f64,
    pub second_view: SecondViewMode,
    pub completer: String,
    /// When present, two-view scenarios also run with perturbed registration.
    pub noise: Option<OdometryNoiseModel>,
    pub seed: u64,
    pub camera: CameraIntrinsics,
    pub segmentation: SegmentationParams,
    pub table_heights: Vec<f64>,
    /// Grid padding around the segmented cloud, as a fraction of its largest extent.
    pub grid_padding: f64,
    pub hausdorff_samples: usize,
    pub v_boundary: f64,
    pub epsilon: f64,
    pub robot: RobotGeometry,
    /// Write predicted and ground-truth meshes per trial.
    pub write_meshes: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            scenarios: Scenario::ALL.to_vec(),
            meshes: Vec::new(),
            procedural_meshes: None,
            poses_per_mesh: 10,
            resolution: DEFAULT_RESOLUTION,
            d_optimal: 0.6,
            second_view: SecondViewMode::Sphere,
            completer: "shadow".into(),
            noise: None,
            seed: 0,
            camera: CameraIntrinsics::default(),
            segmentation: SegmentationParams::default(),
            table_heights: vec![0.65, 0.7, 0.75, 0.8],
            grid_padding: 0.25,
            hausdorff_samples: 2000,
            v_boundary: DEFAULT_V_BOUNDARY,
            epsilon: DEFAULT_EPSILON,
            robot: RobotGeometry::default(),
            write_meshes: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub key: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl ConfigError {
    fn single(key: &str, message: impl Into<String>) -> Self {
        Self {
            issues: vec![ConfigIssue {
                key: key.into(),
                message: message.into(),
            }],
        }
    }

    pub fn keys(&self) -> Vec<&str> {
        self.issues.iter().map(|i| i.key.as_str()).collect()
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration ({} issue{}):", self.issues.len(), if self.issues.len() == 1 { "" } else { "s" })?;
        for i in &self.issues {
            write!(f, "\n  {}: {}", i.key, i.message)?;
        }
        Ok(())
    }
}

const KNOWN_KEYS: &[&str] = &[
    "scenarios",
    "meshes",
    "procedural_meshes",
    "poses_per_mesh",
    "resolution",
    "d_optimal",
    "second_view",
    "completer",
    "noise",
    "seed",
    "camera",
    "segmentation",
    "table_heights",
    "grid_padding",
    "hausdorff_samples",
    "v_boundary",
    "epsilon",
    "robot",
    "write_meshes",
];

impl SuiteConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::single("<file>", format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json_str(&text)?;
        // Relative mesh paths are relative to the config file.
        if let Some(dir) = path.parent() {
            for m in &mut cfg.meshes {
                if m.is_relative() {
                    *m = dir.join(&*m);
                }
            }
            if let CompleterChoice::File(p) = cfg.completer_choice().expect("validated") {
                if p.is_relative() {
                    cfg.completer = format!("file:{}", dir.join(p).display());
                }
            }
        }
        Ok(cfg)
    }

    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ConfigError::single("<json>", e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| ConfigError::single("<root>", "configuration must be a JSON object"))?;
        let mut issues = Vec::new();
        let unknown: BTreeSet<&String> = obj.keys().filter(|k| !KNOWN_KEYS.contains(&k.as_str())).collect();
        for k in unknown {
            issues.push(ConfigIssue {
                key: k.clone(),
                message: "unknown key".into(),
            });
        }
        if !obj.contains_key("seed") {
            issues.push(ConfigIssue {
                key: "seed".into(),
                message: "a master seed is required".into(),
            });
        }
        // Deserialize field by field so type errors name their key.
        let mut cfg = SuiteConfig::default();
        for (k, v) in obj {
            let r: Result<(), serde_json::Error> = (|| {
                match k.as_str() {
                    "scenarios" => cfg.scenarios = serde_json::from_value(v.clone())?,
                    "meshes" => cfg.meshes = serde_json::from_value(v.clone())?,
                    "procedural_meshes" => cfg.procedural_meshes = serde_json::from_value(v.clone())?,
                    "poses_per_mesh" => cfg.poses_per_mesh = serde_json::from_value(v.clone())?,
                    "resolution" => cfg.resolution = serde_json::from_value(v.clone())?,
                    "d_optimal" => cfg.d_optimal = serde_json::from_value(v.clone())?,
                    "second_view" => cfg.second_view = serde_json::from_value(v.clone())?,
                    "completer" => cfg.completer = serde_json::from_value(v.clone())?,
                    "noise" => cfg.noise = serde_json::from_value(v.clone())?,
                    "seed" => cfg.seed = serde_json::from_value(v.clone())?,
                    "camera" => cfg.camera = serde_json::from_value(v.clone())?,
                    "segmentation" => cfg.segmentation = serde_json::from_value(v.clone())?,
                    "table_heights" => cfg.table_heights = serde_json::from_value(v.clone())?,
                    "grid_padding" => cfg.grid_padding = serde_json::from_value(v.clone())?,
                    "hausdorff_samples" => cfg.hausdorff_samples = serde_json::from_value(v.clone())?,
                    "v_boundary" => cfg.v_boundary = serde_json::from_value(v.clone())?,
                    "epsilon" => cfg.epsilon = serde_json::from_value(v.clone())?,
                    "robot" => cfg.robot = serde_json::from_value(v.clone())?,
                    "write_meshes" => cfg.write_meshes = serde_json::from_value(v.clone())?,
                    _ => {}
                }
                Ok(())
            })();
            if let Err(e) = r {
                issues.push(ConfigIssue {
                    key: k.clone(),
                    message: e.to_string(),
                });
            }
        }
        if issues.is_empty() {
            if let Err(e) = cfg.validate() {
                issues.extend(e.issues);
            }
        } else if let Err(e) = cfg.validate() {
            // Report semantic problems too, skipping keys that already failed to parse.
            let seen: BTreeSet<String> = issues.iter().map(|i| i.key.clone()).collect();
            issues.extend(e.issues.into_iter().filter(|i| !seen.contains(&i.key)));
        }
        if issues.is_empty() {
            Ok(cfg)
        } else {
            Err(ConfigError { issues })
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut issues = Vec::new();
        let mut bad = |key: &str, message: String| {
            issues.push(ConfigIssue {
                key: key.into(),
                message,
            })
        };
        if self.scenarios.is_empty() {
            bad("scenarios", "at least one scenario is required".into());
        }
        let proc_count = self.procedural_meshes.as_ref().map_or(0, |p| p.count);
        if self.meshes.is_empty() && proc_count == 0 {
            bad("meshes", "no meshes: list mesh files or request procedural_meshes".into());
        }
        if self.poses_per_mesh == 0 {
            bad("poses_per_mesh", "must be at least 1".into());
        }
        if self.resolution < 2 {
            bad("resolution", format!("{} is below the minimum of 2", self.resolution));
        }
        if !(self.d_optimal > 0.0) {
            bad("d_optimal", "must be positive".into());
        }
        if CompleterChoice::parse(&self.completer).is_none() {
            bad("completer", format!("{:?} is neither \"shadow\" nor \"file:<dir>\"", self.completer));
        }
        if let Some(n) = &self.noise {
            if let Err(e) = n.validate() {
                bad("noise", e.to_string());
            }
        }
        if let Err(e) = self.camera.model().validate() {
            bad("camera", e.to_string());
        }
        if let Err(e) = self.segmentation.validate() {
            bad("segmentation", e.to_string());
        }
        if self.table_heights.is_empty() || self.table_heights.iter().any(|h| !(*h > 0.0)) {
            bad("table_heights", "need at least one positive height".into());
        }
        if !(self.grid_padding >= 0.0) {
            bad("grid_padding", "must be non-negative".into());
        }
        if self.hausdorff_samples == 0 {
            bad("hausdorff_samples", "must be at least 1".into());
        }
        if !(self.v_boundary > 0.0 && self.v_boundary < 1.0) {
            bad("v_boundary", "must lie in (0, 1)".into());
        }
        if !(self.epsilon > 0.0 && self.epsilon < self.v_boundary) {
            bad("epsilon", "must lie in (0, v_boundary)".into());
        }
        if let Err(e) = self.robot.validate() {
            bad("robot", e.to_string());
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { issues })
        }
    }

    pub fn completer_choice(&self) -> Option<CompleterChoice> {
        CompleterChoice::parse(&self.completer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = SuiteConfig::from_json_str(r#"{"seed": 7, "procedural_meshes": {"count": 3, "seed": 1}}"#).unwrap();
        assert_eq!(cfg.resolution, 40);
        assert_eq!(cfg.scenarios.len(), 5);
        assert_eq!(cfg.completer_choice(), Some(CompleterChoice::Shadow));
    }

    #[test]
    fn every_offending_key_is_listed() {
        let err = SuiteConfig::from_json_str(
            r#"{"seed": 1, "meshes": [], "resolution": 1, "colour": "red", "scenarios": ["three_view"], "completer": "cnn"}"#,
        )
        .unwrap_err();
        let keys = err.keys();
        for k in ["colour", "scenarios", "meshes", "resolution", "completer"] {
            assert!(keys.contains(&k), "{k} missing from {keys:?}");
        }
    }

    #[test]
    fn empty_mesh_list_is_rejected() {
        let err = SuiteConfig::from_json_str(r#"{"seed": 1, "meshes": []}"#).unwrap_err();
        assert_eq!(err.keys(), vec!["meshes"]);
    }

    #[test]
    fn seed_is_required() {
        let err = SuiteConfig::from_json_str(r#"{"procedural_meshes": {"count": 1, "seed": 0}}"#).unwrap_err();
        assert_eq!(err.keys(), vec!["seed"]);
    }

    #[test]
    fn completer_forms() {
        assert_eq!(CompleterChoice::parse("file:/tmp/x"), Some(CompleterChoice::File("/tmp/x".into())));
        assert_eq!(CompleterChoice::parse("file:"), None);
    }
}
