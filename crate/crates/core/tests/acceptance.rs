//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use graspforge::config::ScenarioConfig;
use graspforge::contact::{closest_point_box, ContactPoint};
use graspforge::controller::execute_grasp;
use graspforge::ik::{solve_finger_ik, IkConfig};
use graspforge::kinematics::{forward_kinematics, jacobian, JointState};
use graspforge::metrics::{
    finger_metrics, movement_efficiency, summarize_fingers, summarize_run, write_metrics_csv, EfficiencyBasis,
};
use graspforge::model::{bundled_hand, KinematicChain};
use graspforge::perturbation::{perturb_contacts, PerturbConfig};
use graspforge::scene::{make_box_object, SceneObject};
use graspforge::kinematics::Pose;
use graspforge::validation::{validate_grasp, FailureReason, ValidationConfig};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn random_state(chain: &KinematicChain, rng: &mut ChaCha8Rng) -> JointState {
    let mut s = JointState::zeros(chain);
    for j in chain.movable_joints() {
        let spec = &chain.joints()[j];
        s.set(j, rng.gen_range(spec.lower_limit..=spec.upper_limit));
    }
    s
}

fn ik_contract() -> Outcome {
    let chain = bundled_hand();
    let fingers: Vec<String> = chain.fingers().keys().cloned().collect();
    let config = IkConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let seed = JointState::mid_range(&chain);
    let (mut converged, mut in_limits) = (0, 0);
    let n = 200;
    for i in 0..n {
        let finger = &fingers[i % fingers.len()];
        let ee = chain.finger(finger).unwrap().end_effector;
        let target = forward_kinematics(&chain, &random_state(&chain, &mut rng), ee).unwrap();
        let r = solve_finger_ik(&chain, finger, &target, &seed, &config).map_err(|e| e.to_string())?;
        if r.converged && r.residual <= 1e-5 && r.iterations <= 100 {
            converged += 1;
        }
        if r.state.within_limits(&chain) {
            in_limits += 1;
        }
    }
    let rate = converged as f64 / n as f64;
    check(rate >= 0.95, format!("convergence rate {rate:.3} < 0.95"))?;
    check(in_limits == n, format!("{} of {n} outputs violate limits", n - in_limits))?;
    Ok(format!("{converged}/{n} converged, {in_limits}/{n} within limits"))
}

fn jacobian_fd() -> Outcome {
    let chain = bundled_hand();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cols = chain.movable_joints();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let s = random_state(&chain, &mut rng);
        for f in chain.fingers().values() {
            let jac = jacobian(&chain, &s, f.end_effector).unwrap();
            for (c, &j) in cols.iter().enumerate() {
                let mut plus = s.clone();
                let mut minus = s.clone();
                plus.set(j, s.values[&j] + h);
                minus.set(j, s.values[&j] - h);
                let fd = (forward_kinematics(&chain, &plus, f.end_effector).unwrap().position
                    - forward_kinematics(&chain, &minus, f.end_effector).unwrap().position)
                    / (2.0 * h);
                for r in 0..3 {
                    worst = worst.max((fd[r] - jac[(r, c)]).abs());
                }
            }
        }
    }
    check(worst <= 1e-5, format!("max deviation {worst:e}"))?;
    Ok(format!("max deviation {worst:.2e}"))
}

fn contact(p: [f64; 3], n: [f64; 3], force: f64) -> ContactPoint {
    ContactPoint {
        finger: String::new(),
        link: 0,
        position: Vector3::from(p),
        normal: Vector3::from(n).normalize(),
        penetration_depth: 0.0,
        normal_force: force,
    }
}

/// Plain-loop recomputation of the verdict.
fn oracle_stable(contacts: &[ContactPoint], c: &ValidationConfig) -> bool {
    let held: Vec<&ContactPoint> = contacts.iter().filter(|p| p.normal_force >= c.min_contact_force).collect();
    if held.len() < c.min_contacts {
        return false;
    }
    let mut center = [0.0; 3];
    for p in &held {
        for k in 0..3 {
            center[k] += p.position[k] / held.len() as f64;
        }
    }
    for p in &held {
        let d2: f64 = (0..3).map(|k| (p.position[k] - center[k]).powi(2)).sum();
        if d2.sqrt() > c.distribution_threshold {
            return false;
        }
    }
    let mut sum = [0.0; 3];
    for p in &held {
        let len = p.normal.norm();
        for k in 0..3 {
            sum[k] += p.normal[k] / len;
        }
    }
    (sum[0] * sum[0] + sum[1] * sum[1] + sum[2] * sum[2]).sqrt() <= c.force_closure_threshold
}

fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        if v.norm() > 1e-3 && v.norm() <= 1.0 {
            return v.normalize().into();
        }
    }
}

fn random_contacts(rng: &mut ChaCha8Rng) -> Vec<ContactPoint> {
    let n = rng.gen_range(0..=8);
    let spread = if rng.gen_bool(0.5) { 0.05 } else { 0.15 };
    let paired = rng.gen_bool(0.5);
    let mut v = Vec::new();
    while v.len() < n {
        let p = [0; 3].map(|_| rng.gen_range(-spread..spread));
        let nrm = random_unit(rng);
        let force = rng.gen_range(0.0..2.0);
        v.push(contact(p, nrm, force));
        if paired && v.len() < n {
            let q = [0; 3].map(|_| rng.gen_range(-spread..spread));
            let jitter = random_unit(rng);
            let opposite = [0, 1, 2].map(|k| -nrm[k] + 0.2 * jitter[k]);
            v.push(contact(q, opposite, force));
        }
    }
    v
}

fn validation_oracle() -> Outcome {
    let c = ValidationConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut stable = 0;
    for i in 0..1000 {
        let contacts = random_contacts(&mut rng);
        let got = validate_grasp(&contacts, &c).stable;
        let want = oracle_stable(&contacts, &c);
        check(got == want, format!("set {i}: verdict {got}, oracle {want}"))?;
        stable += usize::from(want);
    }
    check(stable > 0 && stable < 1000, format!("degenerate sample: {stable} stable"))?;

    let s = 0.03;
    let antipodal = [
        contact([s, 0.0, 0.0], [1.0, 0.0, 0.0], 1.0),
        contact([-s, 0.0, 0.0], [-1.0, 0.0, 0.0], 1.0),
        contact([0.0, s, 0.0], [0.0, 1.0, 0.0], 1.0),
        contact([0.0, -s, 0.0], [0.0, -1.0, 0.0], 1.0),
    ];
    check(validate_grasp(&antipodal, &c).stable, "antipodal fixture unstable")?;
    let aligned: Vec<ContactPoint> = antipodal.iter().map(|p| contact(p.position.into(), [0.0, 0.0, 1.0], 1.0)).collect();
    let a = validate_grasp(&aligned, &c);
    check(!a.stable && a.failure_reason == FailureReason::ClosureExceeded, "aligned fixture not rejected on closure")?;
    let three = validate_grasp(&antipodal[..3], &c);
    check(
        !three.stable && three.failure_reason == FailureReason::TooFewContacts,
        "3-contact fixture not rejected",
    )?;
    Ok(format!("1000 sets agree ({stable} stable), fixtures behave"))
}

fn cube() -> SceneObject {
    make_box_object(Vector3::repeat(0.05), Pose::identity(), 0.1, None).unwrap()
}

fn perturbation_bound() -> Outcome {
    let object = cube();
    let mut closed = Vec::new();
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            let mut p = [0.0; 3];
            let mut n = [0.0; 3];
            p[axis] = 0.05 * sign;
            n[axis] = sign;
            closed.push(contact(p, n, 1.0));
        }
    }
    let single = [contact([0.0, 0.0, 0.05], [0.0, 0.0, 1.0], 1.0)];
    let bound = 3f64.sqrt() / object.params.contact_stiffness;
    let relaxed = ValidationConfig {
        min_contacts: 1,
        force_closure_threshold: 1.0,
        ..ValidationConfig::default()
    };
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let config = PerturbConfig { seed, ..PerturbConfig::default() };
        let r = perturb_contacts(&object, &closed, &config).map_err(|e| e.to_string())?;
        check(r.passed && r.iterations_run == 100, format!("closed fixture failed for seed {seed}"))?;
        check(r.max_displacement <= bound, format!("seed {seed}: {} above bound", r.max_displacement))?;
        worst = worst.max(r.max_displacement);

        let r = perturb_contacts(&object, &single, &config).map_err(|e| e.to_string())?;
        check(!r.passed && !r.precheck_passed, format!("single contact passed precheck for seed {seed}"))?;
        let loose = PerturbConfig { validation: relaxed, ..config };
        let r = perturb_contacts(&object, &single, &loose).map_err(|e| e.to_string())?;
        check(
            !r.passed && r.failure_iteration.is_some(),
            format!("single contact survived forces for seed {seed}"),
        )?;
    }
    Ok(format!("50 seeds, worst displacement {worst:.2e} m <= {bound:.2e} m; single contact fails"))
}

const TABLE_NAMES: [&str; 5] = ["thumb", "index", "middle", "ring", "pinky"];
const TABLE_DISTANCE_MM: [f64; 5] = [51.9, 28.3, 27.6, 27.5, 26.7];
const TABLE_MOVEMENT_MM: [f64; 5] = [34.4, 18.4, 18.5, 18.5, 18.7];
const TABLE_EFFICIENCY: [f64; 5] = [0.879, 0.996, 0.979, 0.990, 0.966];

fn success_rate() -> Outcome {
    let fingers = TABLE_NAMES
        .iter()
        .zip(TABLE_DISTANCE_MM)
        .map(|(name, d)| {
            let path = [Vector3::new(0.2, 0.0, 0.0), Vector3::new(d / 1000.0, 0.0, 0.0)];
            finger_metrics(name, &path, &Vector3::zeros(), EfficiencyBasis::FinalError).unwrap()
        })
        .collect();
    let s = summarize_fingers(fingers, EfficiencyBasis::FinalError);
    let mean_mm = s.mean_distance * 1000.0;
    check(s.success_rate == 1.0, format!("success rate {}", s.success_rate))?;
    check((mean_mm - 32.4).abs() <= 0.05, format!("mean {mean_mm:.3} mm"))?;
    Ok(format!("success 100%, mean {mean_mm:.2} mm"))
}

fn end_to_end() -> Outcome {
    let config = ScenarioConfig::bundled(&[]).map_err(|e| e.to_string())?;
    let r = config.resolve(None).map_err(|e| e.to_string())?;
    check(r.run.hz == 240.0 && r.run.max_steps == 1000, "bundled run settings changed")?;
    let out = execute_grasp(&r.scene, &r.targets, &r.run, &r.ik, &r.validation).map_err(|e| e.to_string())?;
    check(out.assessment.stable, format!("final grasp unstable: {:?}", out.assessment.failure_reason))?;
    check(out.steps <= 1000, format!("{} steps", out.steps))?;
    let summary = summarize_run(&out.log, &r.targets, EfficiencyBasis::FinalError).map_err(|e| e.to_string())?;
    check(summary.fingers.len() == 5, "not all five fingers evaluated")?;
    let worst = summary.fingers.iter().map(|f| f.distance_to_target).fold(0.0, f64::max);
    check(worst < 0.1, format!("fingertip error {worst}"))?;
    let mut plateau: f64 = 0.0;
    for w in out.log.entries.windows(2) {
        check(w[1].step == w[0].step + 1, "log is not per-step")?;
        if w[0].step >= 150 {
            for (f, p) in &w[1].fingertips {
                plateau = plateau.max((p - w[0].fingertips[f]).norm());
            }
        }
    }
    check(out.steps > 150, format!("run ended at step {}, before the plateau window", out.steps))?;
    check(plateau < 1e-4, format!("per-step delta {plateau:e} after step 150"))?;
    Ok(format!(
        "stable after {} steps, {} contacts, worst error {:.4} m, max delta after 150 {plateau:.1e} m",
        out.steps, out.assessment.contact_count, worst
    ))
}

fn run_csvs() -> Result<(Vec<u8>, Vec<u8>), String> {
    let r = ScenarioConfig::bundled(&[]).and_then(|c| c.resolve(None)).map_err(|e| e.to_string())?;
    let out = execute_grasp(&r.scene, &r.targets, &r.run, &r.ik, &r.validation).map_err(|e| e.to_string())?;
    let summary = summarize_run(&out.log, &r.targets, EfficiencyBasis::FinalError).map_err(|e| e.to_string())?;
    let mut traj = Vec::new();
    out.log.write_csv(&mut traj).map_err(|e| e.to_string())?;
    let mut metrics = Vec::new();
    write_metrics_csv(&summary, &mut metrics).map_err(|e| e.to_string())?;
    Ok((traj, metrics))
}

fn determinism() -> Outcome {
    let a = run_csvs()?;
    let b = run_csvs()?;
    check(a.0 == b.0, "trajectory CSVs differ")?;
    check(a.1 == b.1, "metrics CSVs differ")?;
    Ok(format!("trajectory {} bytes, metrics {} bytes identical", a.0.len(), a.1.len()))
}

/// Closest point on one face by repeated grid sampling around the best
/// sample. Distance to a planar rectangle is convex, so the refinement keeps
/// the minimiser inside the window.
fn sample_face(object: &SceneObject, axis: usize, sign: f64, q: &Vector3<f64>) -> (f64, Vector3<f64>) {
    let h = object.half_extents;
    let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
    let n = 40;
    let (mut cu, mut cv, mut ru, mut rv) = (0.0, 0.0, h[u], h[v]);
    let mut best = (f64::INFINITY, Vector3::zeros());
    for _ in 0..8 {
        let (lo_u, hi_u) = ((cu - ru).max(-h[u]), (cu + ru).min(h[u]));
        let (lo_v, hi_v) = ((cv - rv).max(-h[v]), (cv + rv).min(h[v]));
        for a in 0..=n {
            for b in 0..=n {
                let mut p = Vector3::zeros();
                p[axis] = sign * h[axis];
                p[u] = lo_u + (hi_u - lo_u) * a as f64 / n as f64;
                p[v] = lo_v + (hi_v - lo_v) * b as f64 / n as f64;
                let world = object.pose.transform_point(&p);
                let d = (world - q).norm();
                if d < best.0 {
                    best = (d, world);
                    cu = p[u];
                    cv = p[v];
                }
            }
        }
        ru = 2.0 * (hi_u - lo_u) / n as f64;
        rv = 2.0 * (hi_v - lo_v) / n as f64;
    }
    best
}

fn contact_geometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_d: f64 = 0.0;
    let mut worst_p: f64 = 0.0;
    let mut compared = 0;
    for _ in 0..1000 {
        let half = Vector3::new(rng.gen_range(0.01..0.1), rng.gen_range(0.01..0.1), rng.gen_range(0.01..0.1));
        let pose = Pose::from_xyz_rpy(
            [0; 3].map(|_| rng.gen_range(-0.2..0.2)),
            [0; 3].map(|_| rng.gen_range(-3.2..3.2)),
        );
        let object = make_box_object(half, pose, 0.1, None).unwrap();
        let local = Vector3::from_fn(|k, _| rng.gen_range(-2.0..2.0) * half[k]);
        let q = object.pose.transform_point(&local);

        let mut faces = Vec::new();
        for axis in 0..3 {
            for sign in [1.0, -1.0] {
                faces.push(sample_face(&object, axis, sign, &q));
            }
        }
        faces.sort_by(|a, b| a.0.total_cmp(&b.0));
        let got = closest_point_box(&q, &object);
        worst_d = worst_d.max((got.distance.abs() - faces[0].0).abs());
        // points equidistant from two faces have no unique closest point
        if faces[1].0 - faces[0].0 > 1e-3 || (got.point - faces[0].1).norm() < 1e-4 {
            worst_p = worst_p.max((got.point - faces[0].1).norm());
            compared += 1;
        }
    }
    check(worst_d <= 1e-4, format!("distance deviation {worst_d:e}"))?;
    check(worst_p <= 1e-4, format!("point deviation {worst_p:e}"))?;
    check(compared >= 900, format!("only {compared} unique closest points"))?;
    Ok(format!("distance dev {worst_d:.1e} m, point dev {worst_p:.1e} m over {compared} unique queries"))
}

fn efficiency_discrepancy() -> Outcome {
    let mut computed = BTreeMap::new();
    for i in 0..5 {
        let eta = movement_efficiency(TABLE_DISTANCE_MM[i] / 1000.0, TABLE_MOVEMENT_MM[i] / 1000.0).unwrap();
        check(
            (eta - TABLE_EFFICIENCY[i]).abs() > 0.1,
            format!("{} efficiency {eta:.4} reproduces the tabulated {}", TABLE_NAMES[i], TABLE_EFFICIENCY[i]),
        )?;
        check(eta > 1.0, format!("{} efficiency {eta:.4} not above 1", TABLE_NAMES[i]))?;
        computed.insert(TABLE_NAMES[i], eta);
    }
    check((computed["thumb"] - 1.5087).abs() <= 1e-3, format!("thumb {:.4}", computed["thumb"]))?;
    let pinned = [("index", 1.5380), ("middle", 1.4919), ("ring", 1.4865), ("pinky", 1.4278)];
    for (f, v) in pinned {
        check((computed[f] - v).abs() <= 1e-3, format!("{f} {:.4}", computed[f]))?;
    }
    let list: Vec<String> = TABLE_NAMES.iter().map(|n| format!("{n} {:.4}", computed[n])).collect();
    Ok(format!("computed {} vs tabulated 0.879-0.996", list.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("ik contract", ik_contract),
        ("jacobian vs finite differences", jacobian_fd),
        ("validation oracle equivalence", validation_oracle),
        ("perturbation bound", perturbation_bound),
        ("success rate from tabulated distances", success_rate),
        ("default end-to-end scenario", end_to_end),
        ("determinism", determinism),
        ("closest point vs surface sampling", contact_geometry),
        ("efficiency column not reproducible", efficiency_discrepancy),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".to_string());
            Err(msg)
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail}) [{secs:.2}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail}) [{secs:.2}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
