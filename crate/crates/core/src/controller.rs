//! Grasp execution: phase sequencing over a first-order joint servo.
//!
//! A run moves through three phases. `PreGrasp` drives the fingers to poses
//! 3 cm outside the object along each target's surface normal. `ContactOpt`
//! closes on the true targets and latches every finger whose links press on
//! the object with at least the minimum contact force. `Monitor` holds the
//! hand once the grasp validates and ends the run after 50 consecutive
//! validated steps.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contact::{closest_point_box, detect_contacts};
use crate::ik::{merge_results, solve_hand_ik, IkConfig, IkError};
use crate::kinematics::{forward_kinematics, JointState, Pose};
use crate::model::{KinematicChain, ModelError};
use crate::scene::Scene;
use crate::validation::{validate_grasp, GraspAssessment, ValidationConfig, ValidationError};

/// Offset of pre-grasp targets from the object surface, meters.
pub const PRE_GRASP_OFFSET: f64 = 0.03;
/// Pre-grasp ends once every joint is this close to its goal, radians.
pub const PRE_GRASP_TOLERANCE: f64 = 1e-3;
/// Share of `max_steps` the pre-grasp phase may use.
pub const PRE_GRASP_BUDGET: f64 = 0.2;
/// Consecutive validated steps that end a run.
pub const HOLD_STEPS: usize = 50;

#[derive(Debug, Error)]
pub enum ControllerError {
    #[error("invalid run config: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Ik(#[from] IkError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub hz: f64,
    pub max_steps: usize,
    /// rad/s
    pub joint_rate_limit: f64,
    /// 1/s
    pub servo_gain: f64,
    pub log_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            hz: 240.0,
            max_steps: 1000,
            joint_rate_limit: 4.0,
            servo_gain: 20.0,
            log_every: 1,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        if !(self.hz.is_finite() && self.hz > 0.0) {
            return Err(ControllerError::Config("hz must be positive"));
        }
        if self.max_steps < 1 {
            return Err(ControllerError::Config("max_steps must be at least 1"));
        }
        if !(self.joint_rate_limit >= 0.0) {
            return Err(ControllerError::Config("joint_rate_limit must be non-negative"));
        }
        if !(self.servo_gain.is_finite() && self.servo_gain >= 0.0) {
            return Err(ControllerError::Config("servo_gain must be non-negative"));
        }
        if self.log_every < 1 {
            return Err(ControllerError::Config("log_every must be at least 1"));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    PreGrasp,
    ContactOpt,
    Monitor,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::PreGrasp => "pre_grasp",
            Phase::ContactOpt => "contact_opt",
            Phase::Monitor => "monitor",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    /// 1-based step index; `time = step / hz`.
    pub step: usize,
    pub time: f64,
    /// World-frame end-effector positions.
    pub fingertips: BTreeMap<String, Vector3<f64>>,
    pub state: JointState,
    pub contact_count: usize,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub hz: f64,
    /// End-effector positions before the first step.
    pub start: BTreeMap<String, Vector3<f64>>,
    pub entries: Vec<LogEntry>,
}

impl TrajectoryLog {
    /// Positions of one finger, starting point first.
    pub fn finger_path(&self, finger: &str) -> Vec<Vector3<f64>> {
        self.start
            .get(finger)
            .into_iter()
            .copied()
            .chain(self.entries.iter().filter_map(|e| e.fingertips.get(finger).copied()))
            .collect()
    }

    pub fn fingers(&self) -> Vec<&str> {
        self.start.keys().map(String::as_str).collect()
    }

    /// CSV with columns `time, finger, x, y, z, contact_count, phase`, one
    /// row per finger per logged step.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "finger", "x", "y", "z", "contact_count", "phase"])?;
        for e in &self.entries {
            for (finger, p) in &e.fingertips {
                w.write_record([
                    e.time.to_string(),
                    finger.clone(),
                    p.x.to_string(),
                    p.y.to_string(),
                    p.z.to_string(),
                    e.contact_count.to_string(),
                    e.phase.as_str().to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraspOutcome {
    pub state: JointState,
    pub log: TrajectoryLog,
    pub assessment: GraspAssessment,
    /// Fingers that stopped on contact.
    pub latched: BTreeSet<String>,
    pub steps: usize,
}

/// One explicit-Euler servo step:
/// `θ += clamp(gain · (goal − θ), ±rate) / hz`, then clamped to limits.
/// Joints missing from `goal` hold still.
pub fn step_servo(
    state: &JointState,
    goal: &JointState,
    run: &RunConfig,
    chain: &KinematicChain,
) -> JointState {
    let mut next = state.clone();
    for (&j, &theta) in &state.values {
        let target = goal.get(j).unwrap_or(theta);
        let rate = (run.servo_gain * (target - theta)).clamp(-run.joint_rate_limit, run.joint_rate_limit);
        let mut v = theta + rate / run.hz;
        if let Some(spec) = chain.joints().get(j) {
            v = spec.clamp(v);
        }
        next.set(j, v);
    }
    next
}

fn fingertips(
    scene: &Scene,
    fingers: &[String],
    state: &JointState,
) -> Result<BTreeMap<String, Vector3<f64>>, ControllerError> {
    fingers
        .iter()
        .map(|f| {
            let ee = scene.chain.finger(f)?.end_effector;
            let local = forward_kinematics(&scene.chain, state, ee).map_err(IkError::from)?;
            Ok((f.clone(), scene.to_world(&local).position))
        })
        .collect()
}

fn max_joint_error(state: &JointState, goal: &JointState) -> f64 {
    state
        .values
        .iter()
        .map(|(j, v)| goal.get(*j).map_or(0.0, |g| (g - v).abs()))
        .fold(0.0, f64::max)
}

/// Pre-grasp target: the true target pushed out along the object's surface
/// normal nearest to it.
pub fn pre_grasp_target(scene: &Scene, target: &Pose) -> Pose {
    let n = closest_point_box(&target.position, &scene.object).normal;
    Pose::new(target.position + n * PRE_GRASP_OFFSET, target.orientation)
}

/// Runs the three-phase grasp from the scene's open-hand state. Targets are
/// world-frame poses keyed by finger name.
pub fn execute_grasp(
    scene: &Scene,
    targets: &BTreeMap<String, Pose>,
    run: &RunConfig,
    ik: &IkConfig,
    validation: &ValidationConfig,
) -> Result<GraspOutcome, ControllerError> {
    run.validate()?;
    ik.validate()?;
    validation.validate()?;
    let chain = &scene.chain;
    for f in targets.keys() {
        chain.finger(f)?;
    }
    let fingers: Vec<String> = targets.keys().cloned().collect();

    let mut state = scene.initial_state();
    let to_hand = |m: &BTreeMap<String, Pose>| -> BTreeMap<String, Pose> {
        m.iter().map(|(f, p)| (f.clone(), scene.to_hand(p))).collect()
    };
    let pre_targets: BTreeMap<String, Pose> = targets
        .iter()
        .map(|(f, p)| (f.clone(), pre_grasp_target(scene, p)))
        .collect();
    let pre_goal = merge_results(chain, &state, &solve_hand_ik(chain, &to_hand(&pre_targets), &state, ik)?);
    let grasp_goal = merge_results(chain, &pre_goal, &solve_hand_ik(chain, &to_hand(targets), &pre_goal, ik)?);

    let mut log = TrajectoryLog {
        hz: run.hz,
        start: fingertips(scene, &fingers, &state)?,
        entries: Vec::new(),
    };
    let pre_budget = (PRE_GRASP_BUDGET * run.max_steps as f64).floor() as usize;
    let mut phase = Phase::PreGrasp;
    let mut goal = pre_goal;
    let mut latched = BTreeSet::new();
    let mut held = 0;
    let mut step = 0;
    if max_joint_error(&state, &goal) < PRE_GRASP_TOLERANCE || pre_budget == 0 {
        phase = Phase::ContactOpt;
        goal = grasp_goal.clone();
    }

    while step < run.max_steps {
        step += 1;
        state = step_servo(&state, &goal, run, chain);
        let contacts = detect_contacts(scene, &state);

        match phase {
            Phase::PreGrasp => {
                if max_joint_error(&state, &goal) < PRE_GRASP_TOLERANCE || step >= pre_budget {
                    phase = Phase::ContactOpt;
                    goal = grasp_goal.clone();
                }
            }
            Phase::ContactOpt | Phase::Monitor => {
                for c in &contacts {
                    if c.normal_force >= validation.min_contact_force && latched.insert(c.finger.clone()) {
                        for &j in &chain.finger(&c.finger)?.joints {
                            if let Some(v) = state.get(j) {
                                goal.set(j, v);
                            }
                        }
                    }
                }
                if validate_grasp(&contacts, validation).stable {
                    if phase == Phase::ContactOpt {
                        phase = Phase::Monitor;
                        goal = state.clone();
                    }
                    held += 1;
                } else if phase == Phase::Monitor {
                    phase = Phase::ContactOpt;
                    held = 0;
                }
            }
        }

        let last = held >= HOLD_STEPS || step == run.max_steps;
        if step % run.log_every == 0 || last {
            log.entries.push(LogEntry {
                step,
                time: step as f64 / run.hz,
                fingertips: fingertips(scene, &fingers, &state)?,
                state: state.clone(),
                contact_count: contacts.len(),
                phase,
            });
        }
        if held >= HOLD_STEPS {
            break;
        }
    }

    let assessment = validate_grasp(&detect_contacts(scene, &state), validation);
    Ok(GraspOutcome {
        state,
        log,
        assessment,
        latched,
        steps: step,
    })
}
