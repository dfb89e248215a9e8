//! Run evaluation: positional error, path length and movement efficiency.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::TrajectoryLog;
use crate::kinematics::Pose;

/// Guard in the efficiency denominator.
pub const EFFICIENCY_EPSILON: f64 = 1e-6;
/// A finger succeeds when it ends closer than this to its target, meters.
pub const SUCCESS_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("distances must be non-negative, got d_t={0}, d_m={1}")]
    Negative(f64, f64),
    #[error("trajectory has no positions")]
    EmptyTrajectory,
    #[error("no target for finger {0}")]
    MissingTarget(String),
}

/// What `d_t` measures in the efficiency ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EfficiencyBasis {
    /// Final distance to target.
    #[default]
    FinalError,
    /// Straight-line distance from the start position to the target.
    StraightLine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FingerMetrics {
    pub finger: String,
    pub distance_to_target: f64,
    pub total_movement: f64,
    pub efficiency: f64,
    pub success: bool,
    pub directional_error: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisErrors {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub fingers: Vec<FingerMetrics>,
    pub mean_distance: f64,
    /// Population standard deviation.
    pub std_distance: f64,
    pub success_rate: f64,
    pub axis_errors: AxisErrors,
    pub efficiency_basis: EfficiencyBasis,
}

/// `d_t / (d_m + ε)`.
pub fn movement_efficiency(d_t: f64, d_m: f64) -> Result<f64, MetricsError> {
    if !(d_t >= 0.0 && d_m >= 0.0) {
        return Err(MetricsError::Negative(d_t, d_m));
    }
    Ok(d_t / (d_m + EFFICIENCY_EPSILON))
}

pub fn path_length(points: &[Vector3<f64>]) -> Result<f64, MetricsError> {
    if points.is_empty() {
        return Err(MetricsError::EmptyTrajectory);
    }
    Ok(points.windows(2).map(|w| (w[1] - w[0]).norm()).sum())
}

/// Error vector `final − target` and its norm.
pub fn positional_error(final_pos: &Vector3<f64>, target: &Vector3<f64>) -> (Vector3<f64>, f64) {
    let e = final_pos - target;
    (e, e.norm())
}

pub fn finger_metrics(
    finger: &str,
    path: &[Vector3<f64>],
    target: &Vector3<f64>,
    basis: EfficiencyBasis,
) -> Result<FingerMetrics, MetricsError> {
    let total_movement = path_length(path)?;
    let last = path.last().ok_or(MetricsError::EmptyTrajectory)?;
    let (e, d) = positional_error(last, target);
    let d_t = match basis {
        EfficiencyBasis::FinalError => d,
        EfficiencyBasis::StraightLine => (target - path[0]).norm(),
    };
    Ok(FingerMetrics {
        finger: finger.to_string(),
        distance_to_target: d,
        total_movement,
        efficiency: movement_efficiency(d_t, total_movement)?,
        success: d < SUCCESS_THRESHOLD,
        directional_error: e,
    })
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn summarize_fingers(fingers: Vec<FingerMetrics>, basis: EfficiencyBasis) -> RunSummary {
    let distances: Vec<f64> = fingers.iter().map(|f| f.distance_to_target).collect();
    let (mean_distance, std_distance) = mean_std(&distances);
    let success_rate = if fingers.is_empty() {
        0.0
    } else {
        fingers.iter().filter(|f| f.success).count() as f64 / fingers.len() as f64
    };
    let axis = |k: usize| fingers.iter().map(|f| f.directional_error[k]).collect();
    RunSummary {
        axis_errors: AxisErrors { x: axis(0), y: axis(1), z: axis(2) },
        fingers,
        mean_distance,
        std_distance,
        success_rate,
        efficiency_basis: basis,
    }
}

/// Per-finger metrics from the last logged position of each finger.
pub fn summarize_run(
    log: &TrajectoryLog,
    targets: &BTreeMap<String, Pose>,
    basis: EfficiencyBasis,
) -> Result<RunSummary, MetricsError> {
    let mut fingers = Vec::new();
    for finger in log.fingers() {
        let target = targets
            .get(finger)
            .ok_or_else(|| MetricsError::MissingTarget(finger.to_string()))?;
        fingers.push(finger_metrics(finger, &log.finger_path(finger), &target.position, basis)?);
    }
    Ok(summarize_fingers(fingers, basis))
}

/// CSV with columns
/// `finger, distance_to_target_m, total_movement_m, efficiency, success, ex, ey, ez`.
pub fn write_metrics_csv<W: Write>(summary: &RunSummary, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "finger",
        "distance_to_target_m",
        "total_movement_m",
        "efficiency",
        "success",
        "ex",
        "ey",
        "ez",
    ])?;
    for f in &summary.fingers {
        w.write_record([
            f.finger.clone(),
            f.distance_to_target.to_string(),
            f.total_movement.to_string(),
            f.efficiency.to_string(),
            f.success.to_string(),
            f.directional_error.x.to_string(),
            f.directional_error.y.to_string(),
            f.directional_error.z.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
