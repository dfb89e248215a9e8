//! Random-force perturbation test of a held object.
//!
//! The object response is quasi-static. Contacts resist motion along their
//! normals with stiffness `k`, giving `K = Σ k nᵢ nᵢᵀ`. The displacement is
//! `K⁺ F` for the resisted part of the force, while the part of `F` in the
//! null space of `K` slides the object freely at [`FREE_SLIDE_GAIN`] m/N.

use std::io::Write;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contact::{detect_contacts, ContactPoint};
use crate::kinematics::JointState;
use crate::scene::{Scene, SceneObject};
use crate::validation::{established_contacts, validate_grasp, ValidationConfig, ValidationError};

/// Displacement per newton of force that no contact resists.
pub const FREE_SLIDE_GAIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerturbError {
    #[error("invalid perturbation config: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbConfig {
    pub iterations: usize,
    /// Half-width of the force cube, N. Zero disables the forces.
    pub force_bound: f64,
    /// meters
    pub displacement_threshold: f64,
    pub seed: u64,
    /// Used by the contact precheck.
    pub validation: ValidationConfig,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            force_bound: 1.0,
            displacement_threshold: 0.02,
            seed: 42,
            validation: ValidationConfig::default(),
        }
    }
}

impl PerturbConfig {
    pub fn validate(&self) -> Result<(), PerturbError> {
        if self.iterations < 1 {
            return Err(PerturbError::Config("iterations must be at least 1"));
        }
        if !(self.force_bound.is_finite() && self.force_bound >= 0.0) {
            return Err(PerturbError::Config("force_bound must be finite and non-negative"));
        }
        if !(self.displacement_threshold > 0.0) {
            return Err(PerturbError::Config("displacement_threshold must be positive"));
        }
        self.validation.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbSample {
    pub force: Vector3<f64>,
    /// Norm of the object displacement, meters.
    pub displacement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub passed: bool,
    pub iterations_run: usize,
    pub max_displacement: f64,
    pub samples: Vec<PerturbSample>,
    /// 1-based round at which the threshold was first exceeded.
    pub failure_iteration: Option<usize>,
    pub seed: u64,
    /// Whether the contact precheck passed.
    pub precheck_passed: bool,
}

/// Effective contact stiffness matrix `Σ k nᵢ nᵢᵀ`.
pub fn stiffness_matrix(object: &SceneObject, contacts: &[ContactPoint]) -> Matrix3<f64> {
    let k = object.params.contact_stiffness;
    contacts.iter().fold(Matrix3::zeros(), |acc, c| {
        let n = c.normal.normalize();
        acc + n * n.transpose() * k
    })
}

/// Quasi-static displacement of the object under `force`.
pub fn object_response(
    object: &SceneObject,
    contacts: &[ContactPoint],
    force: &Vector3<f64>,
) -> Vector3<f64> {
    let k = stiffness_matrix(object, contacts);
    let tol = 1e-9 * object.params.contact_stiffness.max(k.trace());
    let eig = SymmetricEigen::new(k);
    let mut d = Vector3::zeros();
    for i in 0..3 {
        let v = eig.eigenvectors.column(i).into_owned();
        let f = v.dot(force);
        let lambda = eig.eigenvalues[i];
        d += if lambda > tol { v * (f / lambda) } else { v * (f * FREE_SLIDE_GAIN) };
    }
    d
}

/// Applies `config.iterations` random forces to the object held in `state`
/// and fails on the first displacement above the threshold. A grasp that
/// does not validate fails before any force is applied.
pub fn perturbation_test(
    scene: &Scene,
    state: &JointState,
    config: &PerturbConfig,
) -> Result<PerturbationReport, PerturbError> {
    perturb_contacts(&scene.object, &detect_contacts(scene, state), config)
}

/// [`perturbation_test`] on a given contact set.
pub fn perturb_contacts(
    object: &SceneObject,
    contacts: &[ContactPoint],
    config: &PerturbConfig,
) -> Result<PerturbationReport, PerturbError> {
    config.validate()?;
    let mut report = PerturbationReport {
        passed: false,
        iterations_run: 0,
        max_displacement: 0.0,
        samples: Vec::new(),
        failure_iteration: None,
        seed: config.seed,
        precheck_passed: false,
    };
    if !validate_grasp(contacts, &config.validation).stable {
        return Ok(report);
    }
    report.precheck_passed = true;
    let held: Vec<ContactPoint> = established_contacts(contacts, &config.validation)
        .into_iter()
        .cloned()
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let b = config.force_bound;
    for i in 1..=config.iterations {
        let force = Vector3::from_fn(|_, _| b * (2.0 * rng.gen::<f64>() - 1.0));
        let displacement = object_response(object, &held, &force).norm();
        report.samples.push(PerturbSample { force, displacement });
        report.iterations_run = i;
        report.max_displacement = report.max_displacement.max(displacement);
        if displacement > config.displacement_threshold {
            report.failure_iteration = Some(i);
            return Ok(report);
        }
    }
    report.passed = true;
    Ok(report)
}

/// Writes the per-round samples as CSV with columns
/// `iteration, fx, fy, fz, displacement`.
pub fn write_samples_csv<W: Write>(report: &PerturbationReport, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iteration", "fx", "fy", "fz", "displacement"])?;
    for (i, s) in report.samples.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            s.force.x.to_string(),
            s.force.y.to_string(),
            s.force.z.to_string(),
            s.displacement.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
