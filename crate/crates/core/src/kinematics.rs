//! Forward kinematics and positional Jacobians.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Isometry3, Translation3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::KinematicChain;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("unknown link index {0}")]
    UnknownLink(usize),
    #[error("no value for joint `{0}`")]
    MissingJoint(String),
}

/// Position plus orientation of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self { position, orientation }
    }

    pub fn from_position(position: Vector3<f64>) -> Self {
        Self::new(position, UnitQuaternion::identity())
    }

    pub fn from_xyz_rpy(xyz: [f64; 3], rpy: [f64; 3]) -> Self {
        Self::new(
            Vector3::from(xyz),
            UnitQuaternion::from_euler_angles(rpy[0], rpy[1], rpy[2]),
        )
    }

    pub fn identity() -> Self {
        Self::from_position(Vector3::zeros())
    }

    pub fn isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.position), self.orientation)
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Self::new(iso.translation.vector, iso.rotation)
    }

    /// Composition `self * other`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose::from_isometry(&(self.isometry() * other.isometry()))
    }

    pub fn inverse(&self) -> Pose {
        Pose::from_isometry(&self.isometry().inverse())
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.orientation * p + self.position
    }

    pub fn rpy(&self) -> [f64; 3] {
        let (r, p, y) = self.orientation.euler_angles();
        [r, p, y]
    }
}

/// Joint angles keyed by joint index. Only movable joints carry values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    pub values: BTreeMap<usize, f64>,
}

impl JointState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every movable joint at zero, clamped into its limits.
    pub fn zeros(chain: &KinematicChain) -> Self {
        clamp_to_limits(
            chain,
            &Self {
                values: chain.movable_joints().into_iter().map(|j| (j, 0.0)).collect(),
            },
        )
    }

    /// Every movable joint at the centre of its range.
    pub fn mid_range(chain: &KinematicChain) -> Self {
        Self {
            values: chain
                .movable_joints()
                .into_iter()
                .map(|j| {
                    let spec = &chain.joints()[j];
                    (j, 0.5 * (spec.lower_limit + spec.upper_limit))
                })
                .collect(),
        }
    }

    pub fn get(&self, joint: usize) -> Option<f64> {
        self.values.get(&joint).copied()
    }

    pub fn set(&mut self, joint: usize, angle: f64) {
        self.values.insert(joint, angle);
    }

    /// True when every stored angle lies inside its joint's limits.
    pub fn within_limits(&self, chain: &KinematicChain) -> bool {
        self.values.iter().all(|(&j, &v)| {
            chain
                .joints()
                .get(j)
                .is_some_and(|s| v >= s.lower_limit && v <= s.upper_limit)
        })
    }
}

fn joint_frames(
    chain: &KinematicChain,
    state: &JointState,
    link: usize,
) -> Result<(Vec<(usize, Isometry3<f64>)>, Isometry3<f64>), KinematicsError> {
    let path = chain.path_to(link).ok_or(KinematicsError::UnknownLink(link))?;
    let mut frame = Isometry3::identity();
    let mut frames = Vec::with_capacity(path.len());
    for &j in path {
        let spec = &chain.joints()[j];
        frame *= spec.origin.isometry();
        if spec.is_movable() {
            let angle = state
                .get(j)
                .ok_or_else(|| KinematicsError::MissingJoint(spec.name.clone()))?;
            frames.push((j, frame));
            frame *= UnitQuaternion::from_axis_angle(&Unit::new_unchecked(spec.axis), angle);
        }
    }
    Ok((frames, frame))
}

/// Pose of `link` in the chain's root frame.
pub fn forward_kinematics(
    chain: &KinematicChain,
    state: &JointState,
    link: usize,
) -> Result<Pose, KinematicsError> {
    joint_frames(chain, state, link).map(|(_, f)| Pose::from_isometry(&f))
}

/// Poses of every link reachable with the given state, indexed by link.
/// Links whose path has an unset joint are `None`.
pub fn all_link_poses(chain: &KinematicChain, state: &JointState) -> Vec<Option<Pose>> {
    let mut poses: Vec<Option<Isometry3<f64>>> = vec![None; chain.links().len()];
    poses[chain.root()] = Some(Isometry3::identity());
    // Paths are root-first, so resolving links by path length visits parents first.
    let mut order: Vec<usize> = (0..chain.links().len()).collect();
    order.sort_by_key(|&l| chain.path_to(l).map_or(0, <[usize]>::len));
    for l in order {
        let Some(j) = chain.parent_joint(l) else { continue };
        let spec = &chain.joints()[j];
        let Some(parent) = poses[spec.parent] else { continue };
        let mut frame = parent * spec.origin.isometry();
        if spec.is_movable() {
            let Some(angle) = state.get(j) else { continue };
            frame *= UnitQuaternion::from_axis_angle(&Unit::new_unchecked(spec.axis), angle);
        }
        poses[l] = Some(frame);
    }
    poses.into_iter().map(|p| p.map(|f| Pose::from_isometry(&f))).collect()
}

/// Positional Jacobian restricted to `columns` (joint indices). Columns for
/// joints that are not on the path to `link` are zero.
pub fn jacobian_for(
    chain: &KinematicChain,
    state: &JointState,
    link: usize,
    columns: &[usize],
) -> Result<DMatrix<f64>, KinematicsError> {
    let (frames, ee) = joint_frames(chain, state, link)?;
    let p_ee = ee.translation.vector;
    let mut jac = DMatrix::zeros(3, columns.len());
    for (c, &j) in columns.iter().enumerate() {
        if let Some((_, frame)) = frames.iter().find(|(k, _)| *k == j) {
            let axis = frame.rotation * chain.joints()[j].axis;
            let col = axis.cross(&(p_ee - frame.translation.vector));
            jac.fixed_view_mut::<3, 1>(0, c).copy_from(&col);
        }
    }
    Ok(jac)
}

/// 3×n positional Jacobian of `link` over all movable joints of the chain,
/// columns in [`KinematicChain::movable_joints`] order.
pub fn jacobian(
    chain: &KinematicChain,
    state: &JointState,
    link: usize,
) -> Result<DMatrix<f64>, KinematicsError> {
    jacobian_for(chain, state, link, &chain.movable_joints())
}

/// Clamps every angle into its joint's limits.
pub fn clamp_to_limits(chain: &KinematicChain, state: &JointState) -> JointState {
    JointState {
        values: state
            .values
            .iter()
            .map(|(&j, &v)| match chain.joints().get(j) {
                Some(spec) if spec.is_movable() => (j, spec.clamp(v)),
                _ => (j, v),
            })
            .collect(),
    }
}
