use graspforge::config::{Resolved, ScenarioConfig};
use graspforge::contact::detect_contacts;
use graspforge::controller::{execute_grasp, GraspOutcome, Phase};
use graspforge::kinematics::all_link_poses;
use graspforge::perturbation::perturbation_test;
use graspforge::validation::FailureReason;

fn resolve(overrides: &[&str]) -> Resolved {
    let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    ScenarioConfig::bundled(&o).unwrap().resolve(None).unwrap()
}

fn run(r: &Resolved) -> GraspOutcome {
    execute_grasp(&r.scene, &r.targets, &r.run, &r.ik, &r.validation).unwrap()
}

#[test]
fn default_grasp_survives_perturbation() {
    let r = resolve(&[]);
    let out = run(&r);
    assert!(out.assessment.stable);
    let report = perturbation_test(&r.scene, &out.state, &r.perturb).unwrap();
    assert!(report.precheck_passed);
    assert!(report.passed, "max displacement {}", report.max_displacement);
    assert_eq!(report.iterations_run, 100);
    assert_eq!(report.seed, 42);
}

#[test]
fn phases_run_in_order() {
    let out = run(&resolve(&[]));
    let phases: Vec<Phase> = out.log.entries.iter().map(|e| e.phase).collect();
    let first_contact = phases.iter().position(|p| *p != Phase::PreGrasp).unwrap();
    assert!(first_contact > 0);
    assert!(phases[first_contact..].iter().all(|p| *p != Phase::PreGrasp));
    assert_eq!(*phases.last().unwrap(), Phase::Monitor);
    assert!(!out.latched.is_empty());
}

#[test]
fn contact_count_never_drops_while_closing() {
    let out = run(&resolve(&[]));
    for w in out.log.entries.windows(2) {
        assert!(w[1].contact_count >= w[0].contact_count, "step {}", w[1].step);
    }
}

#[test]
fn contact_forces_and_normals() {
    let r = resolve(&[]);
    let out = run(&r);
    let contacts = detect_contacts(&r.scene, &out.state);
    assert!(contacts.len() >= 4);
    let k = r.scene.object.params.contact_stiffness;
    let poses = all_link_poses(&r.scene.chain, &out.state);
    for c in &contacts {
        assert!((c.normal_force - k * c.penetration_depth).abs() < 1e-9);
        assert!((c.normal.norm() - 1.0).abs() < 1e-9);
        let link = r.scene.chain.links()[c.link].clone();
        let local = poses[c.link].unwrap().compose(&graspforge::kinematics::Pose::from_isometry(
            &link.geometry_origin.isometry(),
        ));
        let center = r.scene.to_world(&local).position;
        assert!((center - c.position).dot(&c.normal) > 0.0, "normal of {} points into the link", c.finger);
    }
}

#[test]
fn timestamps_and_limits() {
    let r = resolve(&[]);
    let out = run(&r);
    for (i, e) in out.log.entries.iter().enumerate() {
        assert_eq!(e.step, i + 1);
        assert_eq!(e.time, e.step as f64 / 240.0);
        assert!(e.state.within_limits(&r.scene.chain));
        assert_eq!(e.fingertips.len(), 5);
    }
    assert_eq!(out.steps, out.log.entries.last().unwrap().step);
}

#[test]
fn sparse_logging_keeps_last_step() {
    let r = resolve(&["run.log_every=7"]);
    let out = run(&r);
    let steps: Vec<usize> = out.log.entries.iter().map(|e| e.step).collect();
    assert!(steps[..steps.len() - 1].iter().all(|s| s % 7 == 0));
    assert_eq!(*steps.last().unwrap(), out.steps);
}

#[test]
fn repeated_runs_match() {
    let r = resolve(&[]);
    assert_eq!(run(&r), run(&r));
}

#[test]
fn far_object_gives_too_few_contacts() {
    let r = resolve(&["object.pose.xyz=[0.6, 0.0, 0.15]"]);
    let out = run(&r);
    assert!(!out.assessment.stable);
    assert_eq!(out.assessment.failure_reason, FailureReason::TooFewContacts);
    assert_eq!(out.steps, 1000);
    assert!(out.latched.is_empty());
}

#[test]
fn zero_rate_limit_freezes_hand() {
    let r = resolve(&["run.joint_rate_limit=0", "run.steps=50"]);
    let out = run(&r);
    assert_eq!(out.steps, 50);
    assert_eq!(out.state, r.scene.initial_state());
    for e in &out.log.entries {
        assert_eq!(e.fingertips, out.log.start);
    }
}

#[test]
fn subset_of_fingers() {
    let mut c = ScenarioConfig::default();
    c.targets.retain(|f, _| f == "index" || f == "thumb");
    let r = c.resolve(None).unwrap();
    let out = run(&r);
    assert_eq!(out.log.fingers(), vec!["index", "thumb"]);
    assert!(!out.assessment.stable);
}
