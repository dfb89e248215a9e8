//! Grasp stability verdict from contact count, spread and normal balance.
//!
//! Checks run in a fixed order and the first failure is reported:
//! at least `min_contacts` contacts, every contact within
//! `distribution_threshold` of their mean, and `‖Σ nᵢ‖` no larger than
//! `force_closure_threshold`. Contacts whose normal force is below
//! `min_contact_force` are dropped before any check.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contact::ContactPoint;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("grasp center of an empty contact set")]
    Empty,
    #[error("invalid validation config: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub min_contacts: usize,
    /// meters
    pub distribution_threshold: f64,
    pub force_closure_threshold: f64,
    /// N
    pub min_contact_force: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            min_contacts: 4,
            distribution_threshold: 0.1,
            force_closure_threshold: 0.5,
            min_contact_force: 0.5,
        }
    }
}

impl ValidationConfig {
    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.min_contacts < 1 {
            return Err(ValidationError::Config("min_contacts must be at least 1"));
        }
        if !(self.distribution_threshold > 0.0) {
            return Err(ValidationError::Config("distribution_threshold must be positive"));
        }
        if !(self.force_closure_threshold > 0.0) {
            return Err(ValidationError::Config("force_closure_threshold must be positive"));
        }
        if !(self.min_contact_force > 0.0) {
            return Err(ValidationError::Config("min_contact_force must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    None,
    TooFewContacts,
    SpreadExceeded,
    ClosureExceeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspAssessment {
    pub stable: bool,
    pub contact_count: usize,
    pub center: Vector3<f64>,
    pub max_distance: f64,
    pub closure_residual: f64,
    pub failure_reason: FailureReason,
}

/// Mean of the contact positions.
pub fn grasp_center(contacts: &[ContactPoint]) -> Result<Vector3<f64>, ValidationError> {
    if contacts.is_empty() {
        return Err(ValidationError::Empty);
    }
    let sum: Vector3<f64> = contacts.iter().map(|c| c.position).sum();
    Ok(sum / contacts.len() as f64)
}

/// Contacts carrying at least the minimum force.
pub fn established_contacts<'a>(
    contacts: &'a [ContactPoint],
    config: &ValidationConfig,
) -> Vec<&'a ContactPoint> {
    contacts
        .iter()
        .filter(|c| c.normal_force >= config.min_contact_force)
        .collect()
}

pub fn validate_grasp(contacts: &[ContactPoint], config: &ValidationConfig) -> GraspAssessment {
    let kept: Vec<ContactPoint> = established_contacts(contacts, config)
        .into_iter()
        .cloned()
        .collect();
    let count = kept.len();
    let (center, max_distance, closure_residual) = if kept.is_empty() {
        (Vector3::zeros(), 0.0, 0.0)
    } else {
        let center = grasp_center(&kept).expect("non-empty");
        let max_distance = kept
            .iter()
            .map(|c| (c.position - center).norm())
            .fold(0.0, f64::max);
        let normal_sum: Vector3<f64> = kept
            .iter()
            .map(|c| {
                let n = c.normal.norm();
                if n > 0.0 { c.normal / n } else { c.normal }
            })
            .sum();
        (center, max_distance, normal_sum.norm())
    };
    let failure_reason = if count < config.min_contacts {
        FailureReason::TooFewContacts
    } else if max_distance > config.distribution_threshold {
        FailureReason::SpreadExceeded
    } else if closure_residual > config.force_closure_threshold {
        FailureReason::ClosureExceeded
    } else {
        FailureReason::None
    };
    GraspAssessment {
        stable: failure_reason == FailureReason::None,
        contact_count: count,
        center,
        max_distance,
        closure_residual,
        failure_reason,
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn contact(p: [f64; 3], n: [f64; 3]) -> ContactPoint {
        ContactPoint {
            finger: "index".into(),
            link: 0,
            position: Vector3::from(p),
            normal: Vector3::from(n).normalize(),
            penetration_depth: 1e-4,
            normal_force: 1.0,
        }
    }

    /// Six contacts on the faces of a 10 cm cube; normals cancel and span
    /// every axis.
    pub fn closed_cube() -> Vec<ContactPoint> {
        let mut v = Vec::new();
        for axis in 0..3 {
            for sign in [1.0, -1.0] {
                let mut p = [0.0; 3];
                let mut n = [0.0; 3];
                p[axis] = 0.05 * sign;
                n[axis] = sign;
                v.push(contact(p, n));
            }
        }
        v
    }
}
