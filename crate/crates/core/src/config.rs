//! Scenario files: TOML documents describing the hand mount, the object,
//! physical parameters, controller settings and per-finger targets.
//!
//! ```toml
//! [hand]
//! description_path = "dexhand.urdf"
//! base_position = [0.0, 0.0, 0.2]
//! base_rpy = [3.141592653589793, 0.0, 0.0]
//!
//! [object]
//! half_extents = [0.0375, 0.015, 0.02]
//! mass = 0.1
//! pose = { xyz = [0.0875, 0.0, 0.15], rpy = [0.0, 0.0, 0.0] }
//!
//! [physics]
//! contact_stiffness = 10000.0
//!
//! [run]
//! seed = 42
//! steps = 1000
//! hz = 240.0
//!
//! [targets.thumb]
//! position = [0.0495, 0.0, 0.1298]
//! ```
//!
//! Every section and key is optional and falls back to the bundled default
//! scenario. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{ControllerError, RunConfig};
use crate::ik::{IkConfig, IkError};
use crate::kinematics::Pose;
use crate::model::{parse_robot_description, KinematicChain, ModelError, BUNDLED_HAND_FILE, BUNDLED_HAND_URDF};
use crate::perturbation::{PerturbConfig, PerturbError};
use crate::scene::{
    make_box_object, PhysicalParams, Scene, SceneError, DEFAULT_BASE_HEIGHT, DEFAULT_OBJECT_HALF_EXTENTS,
    DEFAULT_OBJECT_MASS, DEFAULT_OBJECT_RPY, DEFAULT_OBJECT_XYZ,
};
use crate::validation::{ValidationConfig, ValidationError};

/// Environment variable that overrides the bundled asset directory.
pub const DATA_DIR_ENV: &str = "GRASPFORGE_DATA_DIR";
pub const DEFAULT_SCENARIO_FILE: &str = "default_scenario.toml";
pub const BUNDLED_SCENARIO_TOML: &str = include_str!("../data/default_scenario.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("scenario parse error: {0}")]
    Toml(String),
    #[error("bad override {0:?}: expected key=value")]
    Override(String),
    #[error("override {key}: {reason}")]
    OverridePath { key: String, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Run(#[from] ControllerError),
    #[error(transparent)]
    Ik(#[from] IkError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
    #[error(transparent)]
    Perturb(#[from] PerturbError),
}

/// Directory holding the bundled hand and default scenario.
pub fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("data"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HandSection {
    pub description_path: PathBuf,
    pub base_position: [f64; 3],
    pub base_rpy: [f64; 3],
}

impl Default for HandSection {
    fn default() -> Self {
        Self {
            description_path: PathBuf::from(BUNDLED_HAND_FILE),
            base_position: [0.0, 0.0, DEFAULT_BASE_HEIGHT],
            base_rpy: [std::f64::consts::PI, 0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseSpec {
    pub xyz: [f64; 3],
    pub rpy: [f64; 3],
}

impl Default for PoseSpec {
    fn default() -> Self {
        Self {
            xyz: [0.0; 3],
            rpy: [0.0; 3],
        }
    }
}

impl PoseSpec {
    pub fn pose(&self) -> Pose {
        Pose::from_xyz_rpy(self.xyz, self.rpy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObjectSection {
    pub half_extents: [f64; 3],
    pub pose: PoseSpec,
    pub mass: f64,
}

impl Default for ObjectSection {
    fn default() -> Self {
        Self {
            half_extents: DEFAULT_OBJECT_HALF_EXTENTS,
            pose: PoseSpec {
                xyz: DEFAULT_OBJECT_XYZ,
                rpy: DEFAULT_OBJECT_RPY,
            },
            mass: DEFAULT_OBJECT_MASS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub steps: usize,
    pub hz: f64,
    pub joint_rate_limit: f64,
    pub servo_gain: f64,
    pub log_every: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        let r = RunConfig::default();
        Self {
            seed: 42,
            steps: r.max_steps,
            hz: r.hz,
            joint_rate_limit: r.joint_rate_limit,
            servo_gain: r.servo_gain,
            log_every: r.log_every,
        }
    }
}

impl RunSection {
    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            hz: self.hz,
            max_steps: self.steps,
            joint_rate_limit: self.joint_rate_limit,
            servo_gain: self.servo_gain,
            log_every: self.log_every,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbSection {
    pub iterations: usize,
    pub force_bound: f64,
    pub displacement_threshold: f64,
}

impl Default for PerturbSection {
    fn default() -> Self {
        let p = PerturbConfig::default();
        Self {
            iterations: p.iterations,
            force_bound: p.force_bound,
            displacement_threshold: p.displacement_threshold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    /// World-frame position, meters.
    pub position: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

impl TargetSpec {
    pub fn pose(&self) -> Pose {
        Pose::from_xyz_rpy(self.position, self.rpy)
    }
}

/// World-frame fingertip targets of the bundled scenario.
pub fn default_targets() -> BTreeMap<String, TargetSpec> {
    let t = |p: [f64; 3]| TargetSpec { position: p, rpy: [0.0; 3] };
    [
        ("thumb", t([0.049525, 0.0, 0.129845])),
        ("index", t([0.1, -0.0155, 0.15])),
        ("middle", t([0.12524, -0.01, 0.17044])),
        ("ring", t([0.145, 0.01, 0.15])),
        ("pinky", t([0.1, 0.0155, 0.15])),
    ]
    .into_iter()
    .map(|(f, s)| (f.to_string(), s))
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub hand: HandSection,
    pub object: ObjectSection,
    pub physics: PhysicalParams,
    pub run: RunSection,
    pub ik: IkConfig,
    pub validation: ValidationConfig,
    pub perturb: PerturbSection,
    pub targets: BTreeMap<String, TargetSpec>,
    pub output_dir: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            hand: HandSection::default(),
            object: ObjectSection::default(),
            physics: PhysicalParams::default(),
            run: RunSection::default(),
            ik: IkConfig::default(),
            validation: ValidationConfig::default(),
            perturb: PerturbSection::default(),
            targets: default_targets(),
            output_dir: None,
        }
    }
}

/// A scenario resolved into the objects the controller consumes.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub scene: Scene,
    pub targets: BTreeMap<String, Pose>,
    pub run: RunConfig,
    pub ik: IkConfig,
    pub validation: ValidationConfig,
    pub perturb: PerturbConfig,
}

/// Sets `key` (dotted path) in a TOML tree. The value is read as TOML and
/// taken as a bare string when that fails.
pub fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<(), ConfigError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(assignment.to_string()))?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() {
        return Err(ConfigError::Override(assignment.to_string()));
    }
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut table = doc;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| ConfigError::OverridePath {
            key: key.to_string(),
            reason: format!("{part} is not a table"),
        })?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| ConfigError::Toml(e.to_string()))?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        toml::Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Toml(e.to_string()))
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, overrides)
    }

    /// The bundled default scenario with overrides applied.
    pub fn bundled(overrides: &[String]) -> Result<Self, ConfigError> {
        Self::from_toml_str(BUNDLED_SCENARIO_TOML, overrides)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Loads the hand description. Relative paths are tried against
    /// `base_dir` and then the data directory; the bundled hand is used when
    /// its file name is not found on disk.
    pub fn load_chain(&self, base_dir: Option<&Path>) -> Result<KinematicChain, ConfigError> {
        let p = &self.hand.description_path;
        let mut candidates = Vec::new();
        if p.is_absolute() {
            candidates.push(p.clone());
        } else {
            if let Some(dir) = base_dir {
                candidates.push(dir.join(p));
            }
            candidates.push(data_dir().join(p));
        }
        for c in &candidates {
            if c.is_file() {
                let text = std::fs::read_to_string(c).map_err(|source| ConfigError::Io {
                    path: c.clone(),
                    source,
                })?;
                return Ok(parse_robot_description(&text)?);
            }
        }
        if p.as_os_str() == BUNDLED_HAND_FILE {
            return Ok(parse_robot_description(BUNDLED_HAND_URDF)?);
        }
        Err(ConfigError::Io {
            path: candidates.pop().unwrap_or_else(|| p.clone()),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "hand description not found"),
        })
    }

    pub fn resolve(&self, base_dir: Option<&Path>) -> Result<Resolved, ConfigError> {
        let chain = self.load_chain(base_dir)?;
        chain.check_hand_layout()?;
        self.physics.validate()?;
        let object = make_box_object(
            Vector3::from(self.object.half_extents),
            self.object.pose.pose(),
            self.object.mass,
            Some(self.physics),
        )?;
        let base = Pose::from_xyz_rpy(self.hand.base_position, self.hand.base_rpy);
        let scene = Scene::new(chain, base, object, self.physics)?;
        let targets: BTreeMap<String, Pose> = self.targets.iter().map(|(f, t)| (f.clone(), t.pose())).collect();
        for f in targets.keys() {
            scene.chain.finger(f)?;
        }
        let run = self.run.run_config();
        run.validate()?;
        self.ik.validate()?;
        let validation = self.validation;
        validation.validate()?;
        let perturb = PerturbConfig {
            iterations: self.perturb.iterations,
            force_bound: self.perturb.force_bound,
            displacement_threshold: self.perturb.displacement_threshold,
            seed: self.run.seed,
            validation,
        };
        perturb.validate()?;
        Ok(Resolved {
            scene,
            targets,
            run,
            ik: self.ik,
            validation,
            perturb,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::default_scene;

    #[test]
    fn bundled_file_matches_defaults() {
        let parsed = ScenarioConfig::bundled(&[]).unwrap();
        assert_eq!(parsed, ScenarioConfig::default());
        let r = parsed.resolve(None).unwrap();
        assert_eq!(r.scene, default_scene());
        assert_eq!(r.perturb.seed, 42);
        assert_eq!(r.targets.len(), 5);
    }

    #[test]
    fn empty_document_is_default() {
        assert_eq!(ScenarioConfig::from_toml_str("", &[]).unwrap(), ScenarioConfig::default());
    }

    #[test]
    fn overrides() {
        let over = [
            "physics.contact_stiffness=5000".to_string(),
            "run.steps = 200".to_string(),
            "output_dir=results".to_string(),
            "object.pose.xyz=[10.0, 0.0, 0.0]".to_string(),
        ];
        let c = ScenarioConfig::bundled(&over).unwrap();
        assert_eq!(c.physics.contact_stiffness, 5000.0);
        assert_eq!(c.run.steps, 200);
        assert_eq!(c.output_dir, Some(PathBuf::from("results")));
        assert_eq!(c.object.pose.xyz, [10.0, 0.0, 0.0]);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(ScenarioConfig::from_toml_str("bogus = 1", &[]), Err(ConfigError::Toml(_))));
        assert!(matches!(
            ScenarioConfig::from_toml_str("[physics]\nstiffness = 1.0", &[]),
            Err(ConfigError::Toml(_))
        ));
        assert!(ScenarioConfig::bundled(&["run.bogus=1".to_string()]).is_err());
        assert!(matches!(
            ScenarioConfig::bundled(&["novalue".to_string()]),
            Err(ConfigError::Override(_))
        ));
    }

    #[test]
    fn invalid_values_rejected_at_resolve() {
        for o in [
            "physics.contact_stiffness=0",
            "object.mass=-1",
            "run.hz=0",
            "perturb.iterations=0",
            "validation.min_contacts=0",
            "ik.damping_lambda=0",
        ] {
            let c = ScenarioConfig::bundled(&[o.to_string()]).unwrap();
            assert!(c.resolve(None).is_err(), "{o}");
        }
        let c = ScenarioConfig::bundled(&["targets.toe.position=[0,0,0]".to_string()]).unwrap();
        assert!(matches!(c.resolve(None), Err(ConfigError::Model(ModelError::UnknownFinger(_)))));
    }

    #[test]
    fn serialization_round_trip() {
        let c = ScenarioConfig::default();
        let again = ScenarioConfig::from_toml_str(&c.to_toml_string(), &[]).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn missing_hand_file() {
        let c = ScenarioConfig::bundled(&["hand.description_path=\"nope.urdf\"".to_string()]).unwrap();
        assert!(matches!(c.resolve(None), Err(ConfigError::Io { .. })));
    }
}
