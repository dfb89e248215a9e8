//! World state: the hand, where it is mounted, and the box it grasps.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contact::max_hand_penetration;
use crate::kinematics::{JointState, Pose};
use crate::model::{bundled_hand, KinematicChain};

/// Largest overlap between hand geometry and the object allowed at setup.
pub const MAX_INITIAL_PENETRATION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("object half-extents must be positive, got {0:?}")]
    NonPositiveDimension([f64; 3]),
    #[error("object mass must be positive, got {0}")]
    NonPositiveMass(f64),
    #[error("invalid physical parameter {0}")]
    InvalidParams(&'static str),
    #[error("object penetrates the hand by {0:.4} m at setup")]
    InitialPenetration(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalParams {
    pub lateral_friction: f64,
    pub spinning_friction: f64,
    pub rolling_friction: f64,
    /// N/m
    pub contact_stiffness: f64,
    pub contact_damping: f64,
    pub joint_damping: f64,
    /// N
    pub contact_force_threshold: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            lateral_friction: 1.0,
            spinning_friction: 0.1,
            rolling_friction: 0.1,
            contact_stiffness: 10_000.0,
            contact_damping: 1.0,
            joint_damping: 0.5,
            contact_force_threshold: 0.5,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<(), SceneError> {
        let fields = [
            ("lateral_friction", self.lateral_friction),
            ("spinning_friction", self.spinning_friction),
            ("rolling_friction", self.rolling_friction),
            ("contact_stiffness", self.contact_stiffness),
            ("contact_damping", self.contact_damping),
            ("joint_damping", self.joint_damping),
            ("contact_force_threshold", self.contact_force_threshold),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SceneError::InvalidParams(name));
            }
        }
        if self.contact_stiffness <= 0.0 {
            return Err(SceneError::InvalidParams("contact_stiffness"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub half_extents: Vector3<f64>,
    pub pose: Pose,
    /// kg
    pub mass: f64,
    pub params: PhysicalParams,
}

pub fn make_box_object(
    half_extents: Vector3<f64>,
    pose: Pose,
    mass: f64,
    params: Option<PhysicalParams>,
) -> Result<SceneObject, SceneError> {
    if !half_extents.iter().all(|h| h.is_finite() && *h > 0.0) {
        return Err(SceneError::NonPositiveDimension(half_extents.into()));
    }
    if !(mass.is_finite() && mass > 0.0) {
        return Err(SceneError::NonPositiveMass(mass));
    }
    let params = params.unwrap_or_default();
    params.validate()?;
    Ok(SceneObject {
        id: "box".to_string(),
        half_extents,
        pose,
        mass,
        params,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub chain: KinematicChain,
    pub hand_base: Pose,
    pub object: SceneObject,
    pub hand_params: PhysicalParams,
}

impl Scene {
    /// Builds a scene, rejecting setups where the object overlaps the open
    /// hand (all joints at zero, clamped) by more than 1 mm.
    pub fn new(
        chain: KinematicChain,
        hand_base: Pose,
        object: SceneObject,
        hand_params: PhysicalParams,
    ) -> Result<Self, SceneError> {
        hand_params.validate()?;
        let scene = Self {
            chain,
            hand_base,
            object,
            hand_params,
        };
        let depth = scene.initial_penetration();
        if depth > MAX_INITIAL_PENETRATION {
            return Err(SceneError::InitialPenetration(depth));
        }
        Ok(scene)
    }

    pub fn initial_state(&self) -> JointState {
        JointState::zeros(&self.chain)
    }

    pub fn initial_penetration(&self) -> f64 {
        max_hand_penetration(self, &self.initial_state())
    }

    /// Hand-frame pose expressed in the world.
    pub fn to_world(&self, local: &Pose) -> Pose {
        self.hand_base.compose(local)
    }

    /// World pose expressed in the hand frame.
    pub fn to_hand(&self, world: &Pose) -> Pose {
        self.hand_base.inverse().compose(world)
    }
}

/// Hand mount height above the world origin.
pub const DEFAULT_BASE_HEIGHT: f64 = 0.2;
/// Default object: a 7.5 × 3 × 4 cm box.
pub const DEFAULT_OBJECT_HALF_EXTENTS: [f64; 3] = [0.0375, 0.015, 0.02];
pub const DEFAULT_OBJECT_XYZ: [f64; 3] = [0.0875, 0.0, 0.15];
pub const DEFAULT_OBJECT_RPY: [f64; 3] = [0.0, 0.0, 0.0];
pub const DEFAULT_OBJECT_MASS: f64 = 0.1;

/// The bundled hand mounted palm-down with a box underneath the palm.
pub fn default_scene() -> Scene {
    let object = make_box_object(
        Vector3::from(DEFAULT_OBJECT_HALF_EXTENTS),
        Pose::from_xyz_rpy(DEFAULT_OBJECT_XYZ, DEFAULT_OBJECT_RPY),
        DEFAULT_OBJECT_MASS,
        None,
    )
    .expect("default object is valid");
    Scene::new(
        bundled_hand(),
        default_hand_base(),
        object,
        PhysicalParams::default(),
    )
    .expect("default scene is valid")
}

pub fn default_hand_base() -> Pose {
    Pose::from_xyz_rpy([0.0, 0.0, DEFAULT_BASE_HEIGHT], [std::f64::consts::PI, 0.0, 0.0])
}
