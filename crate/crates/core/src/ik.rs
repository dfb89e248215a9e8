//! Per-finger damped least-squares inverse kinematics.
//!
//! Each iteration takes `Δθ = Jᵀ (J Jᵀ + λ² I)⁻¹ e` where `e` is the positional
//! error of the finger's end effector, then clamps the finger joints into
//! their limits. A step that does not reduce the residual is halved until it
//! does, up to a fixed number of times. Target orientation is accepted but not part of the residual.

use std::collections::BTreeMap;

use nalgebra::{DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{forward_kinematics, jacobian_for, JointState, KinematicsError, Pose};
use crate::model::{KinematicChain, ModelError};

const MAX_BACKTRACKS: usize = 12;

#[derive(Debug, Error)]
pub enum IkError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("damped normal matrix is singular at iteration {0}")]
    Singular(usize),
    #[error("target position is not finite")]
    NonFiniteTarget,
    #[error("invalid ik config: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IkConfig {
    pub max_iterations: usize,
    /// Positional residual in meters at which the solve counts as converged.
    pub residual_threshold: f64,
    /// Scaled by the finger length, see [`finger_length`].
    pub damping_lambda: f64,
    pub step_scale: f64,
}

impl Default for IkConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            residual_threshold: 1e-5,
            damping_lambda: 0.05,
            step_scale: 1.0,
        }
    }
}

impl IkConfig {
    pub fn validate(&self) -> Result<(), IkError> {
        if self.max_iterations < 1 {
            return Err(IkError::Config("max_iterations must be at least 1"));
        }
        if !(self.residual_threshold > 0.0) {
            return Err(IkError::Config("residual_threshold must be positive"));
        }
        if !(self.damping_lambda > 0.0) {
            return Err(IkError::Config("damping_lambda must be positive"));
        }
        if !(self.step_scale > 0.0 && self.step_scale <= 1.0) {
            return Err(IkError::Config("step_scale must lie in (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkResult {
    pub state: JointState,
    /// Final positional error in meters.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Solves for the joints of one finger so that its end effector reaches
/// `target.position`. Joints outside the finger keep their seed values.
pub fn solve_finger_ik(
    chain: &KinematicChain,
    finger: &str,
    target: &Pose,
    seed: &JointState,
    config: &IkConfig,
) -> Result<IkResult, IkError> {
    config.validate()?;
    if !target.position.iter().all(|v| v.is_finite()) {
        return Err(IkError::NonFiniteTarget);
    }
    let f = chain.finger(finger)?;
    let ee = f.end_effector;
    let cols = &f.joints;
    let length = finger_length(chain, finger)?;
    let lambda_sq = (config.damping_lambda * length).powi(2);

    let mut state = seed.clone();
    for &j in cols {
        let spec = &chain.joints()[j];
        let v = state.get(j).ok_or_else(|| KinematicsError::MissingJoint(spec.name.clone()))?;
        state.set(j, spec.clamp(v));
    }

    let error_at = |s: &JointState| -> Result<Vector3<f64>, IkError> {
        Ok(target.position - forward_kinematics(chain, s, ee)?.position)
    };

    let mut error = error_at(&state)?;
    for iteration in 0..config.max_iterations {
        let residual = error.norm();
        if residual <= config.residual_threshold {
            return Ok(IkResult {
                state,
                residual,
                iterations: iteration,
                converged: true,
            });
        }
        let jac = jacobian_for(chain, &state, ee, cols)?;
        let normal: Matrix3<f64> = (&jac * jac.transpose()).fixed_view::<3, 3>(0, 0) + Matrix3::identity() * lambda_sq;
        let y = normal
            .cholesky()
            .map(|c| c.solve(&error))
            .ok_or(IkError::Singular(iteration))?;
        let step: DVector<f64> = jac.transpose() * DVector::from_column_slice(y.as_slice());

        // Halve the step until the residual drops; a step that never improves
        // is rejected and the state carries over unchanged.
        let mut scale = config.step_scale;
        for _ in 0..=MAX_BACKTRACKS {
            let mut trial = state.clone();
            for (c, &j) in cols.iter().enumerate() {
                let spec = &chain.joints()[j];
                trial.set(j, spec.clamp(state.values[&j] + scale * step[c]));
            }
            let trial_error = error_at(&trial)?;
            if trial_error.norm() < residual {
                state = trial;
                error = trial_error;
                break;
            }
            scale *= 0.5;
        }
        debug_assert!(state.within_limits(chain));
    }
    let residual = error.norm();
    Ok(IkResult {
        state,
        residual,
        iterations: config.max_iterations,
        converged: residual <= config.residual_threshold,
    })
}

/// Summed length of the segments from a finger's first movable joint to its
/// end effector. The damping term is `(λ · length)²` so that `λ` stays
/// dimensionless whatever the size of the hand.
pub fn finger_length(chain: &KinematicChain, finger: &str) -> Result<f64, IkError> {
    let f = chain.finger(finger)?;
    let path = chain.path_to(f.end_effector).unwrap_or_default();
    let first = f.joints.first().and_then(|j| path.iter().position(|p| p == j));
    let length: f64 = match first {
        Some(i) => path[i + 1..].iter().map(|&j| Vector3::from(chain.joints()[j].origin.xyz).norm()).sum(),
        None => 0.0,
    };
    Ok(if length > 0.0 { length } else { 1.0 })
}

/// Solves every finger independently. Fingers share no movable joints, so the
/// per-finger solutions merge into one state via [`merge_results`].
pub fn solve_hand_ik(
    chain: &KinematicChain,
    targets: &BTreeMap<String, Pose>,
    seed: &JointState,
    config: &IkConfig,
) -> Result<BTreeMap<String, IkResult>, IkError> {
    for finger in targets.keys() {
        chain.finger(finger)?;
    }
    targets
        .iter()
        .map(|(finger, target)| {
            solve_finger_ik(chain, finger, target, seed, config).map(|r| (finger.clone(), r))
        })
        .collect()
}

/// Seed state overwritten with each finger's solved joints.
pub fn merge_results(
    chain: &KinematicChain,
    seed: &JointState,
    results: &BTreeMap<String, IkResult>,
) -> JointState {
    let mut merged = seed.clone();
    for (finger, result) in results {
        if let Ok(f) = chain.finger(finger) {
            for &j in &f.joints {
                if let Some(v) = result.state.get(j) {
                    merged.set(j, v);
                }
            }
        }
    }
    merged
}
