//! `graspforge` command-line driver.
//!
//! Exit codes: 0 success, 2 unstable grasp or failed test, 1 configuration
//! or I/O error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use graspforge::config::{Resolved, ScenarioConfig};
use graspforge::contact::ContactPoint;
use graspforge::controller::{execute_grasp, GraspOutcome};
use graspforge::metrics::{summarize_run, write_metrics_csv, EfficiencyBasis, RunSummary};
use graspforge::perturbation::{perturbation_test, write_samples_csv};
use graspforge::validation::validate_grasp;
use rayon::prelude::*;

const DEFAULT_OUT: &str = "graspforge-out";
const NORMAL_TOLERANCE: f64 = 1e-3;

#[derive(Parser)]
#[command(name = "graspforge", version, about = "Multi-finger grasp execution and stability testing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the grasp and write trajectory, metrics and assessment.
    Run(RunArgs),
    /// Execute the grasp, then apply random forces to the held object.
    Perturb(PerturbArgs),
    /// Validate a contact set read from a JSON file.
    Validate(ValidateArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario TOML file; the bundled scenario when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    hz: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit the timestamp comment line from CSV outputs.
    #[arg(long)]
    no_timestamp: bool,
    /// Override any scenario key, e.g. `--set physics.contact_stiffness=5000`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Run N independent seeds (seed, seed+1, ...) into numbered subdirectories.
    #[arg(long, default_value_t = 1)]
    repeat: usize,
}

#[derive(Copy, Clone, ValueEnum)]
enum Basis {
    FinalError,
    StraightLine,
}

impl From<Basis> for EfficiencyBasis {
    fn from(b: Basis) -> Self {
        match b {
            Basis::FinalError => EfficiencyBasis::FinalError,
            Basis::StraightLine => EfficiencyBasis::StraightLine,
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "final-error")]
    efficiency_basis: Basis,
}

#[derive(Args)]
struct PerturbArgs {
    #[command(flatten)]
    common: Common,
    /// Number of random forces to apply.
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Args)]
struct ValidateArgs {
    /// JSON array of contacts, or an object with a `contacts` array.
    contacts: PathBuf,
    /// Override validation thresholds, e.g. `--set validation.min_contacts=3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Unstable,
}

type Outcome = Result<(), Failure>;

fn config_err(e: impl std::fmt::Display) -> Failure {
    Failure::Config(e.to_string())
}

struct Job {
    config: ScenarioConfig,
    base_dir: Option<PathBuf>,
    out: PathBuf,
    timestamp: Option<String>,
}

fn load(common: &Common, extra: &[String]) -> Result<(ScenarioConfig, Option<PathBuf>), Failure> {
    let mut overrides = common.set.clone();
    if let Some(s) = common.seed {
        overrides.push(format!("run.seed={s}"));
    }
    if let Some(s) = common.steps {
        overrides.push(format!("run.steps={s}"));
    }
    if let Some(h) = common.hz {
        overrides.push(format!("run.hz={h:?}"));
    }
    overrides.extend_from_slice(extra);
    match &common.scenario {
        Some(path) => {
            let config = ScenarioConfig::load(path, &overrides).map_err(config_err)?;
            Ok((config, path.parent().map(Path::to_path_buf)))
        }
        None => Ok((ScenarioConfig::bundled(&overrides).map_err(config_err)?, None)),
    }
}

fn jobs(common: &Common, extra: &[String]) -> Result<Vec<Job>, Failure> {
    if common.repeat < 1 {
        return Err(Failure::Config("--repeat must be at least 1".into()));
    }
    let (config, base_dir) = load(common, extra)?;
    let out = common
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let timestamp = (!common.no_timestamp)
        .then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
    if common.repeat == 1 {
        return Ok(vec![Job { config, base_dir, out, timestamp }]);
    }
    Ok((0..common.repeat)
        .map(|i| {
            let mut c = config.clone();
            c.run.seed = config.run.seed.wrapping_add(i as u64);
            Job {
                config: c,
                base_dir: base_dir.clone(),
                out: out.join(format!("run_{i:03}")),
                timestamp: timestamp.clone(),
            }
        })
        .collect())
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: serde::Serialize + ?Sized>(dir: &Path, name: &str, value: &T) -> Outcome {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(config_err)?;
    writeln!(w).and_then(|_| w.flush()).map_err(config_err)
}

fn write_csv(
    dir: &Path,
    name: &str,
    timestamp: &Option<String>,
    body: impl FnOnce(&mut Vec<u8>) -> Result<(), Failure>,
) -> Outcome {
    let mut buf = Vec::new();
    if let Some(ts) = timestamp {
        writeln!(buf, "# generated {ts}").map_err(config_err)?;
    }
    body(&mut buf)?;
    let mut w = create(dir, name)?;
    w.write_all(&buf).and_then(|_| w.flush()).map_err(config_err)
}

fn execute(job: &Job) -> Result<(Resolved, GraspOutcome), Failure> {
    let r = job.config.resolve(job.base_dir.as_deref()).map_err(config_err)?;
    fs::create_dir_all(&job.out).map_err(|e| Failure::Config(format!("cannot create {}: {e}", job.out.display())))?;
    let outcome = execute_grasp(&r.scene, &r.targets, &r.run, &r.ik, &r.validation).map_err(config_err)?;
    Ok((r, outcome))
}

fn print_summary(prefix: &str, summary: &RunSummary) {
    for f in &summary.fingers {
        println!(
            "{prefix}{:<7} distance {:.4} m  movement {:.4} m  efficiency {:.3}  {}",
            f.finger,
            f.distance_to_target,
            f.total_movement,
            f.efficiency,
            if f.success { "ok" } else { "missed" }
        );
    }
}

fn run_job(job: &Job, basis: EfficiencyBasis, prefix: &str) -> Outcome {
    let (r, outcome) = execute(job)?;
    let summary = summarize_run(&outcome.log, &r.targets, basis).map_err(config_err)?;
    write_csv(&job.out, "trajectory.csv", &job.timestamp, |b| {
        outcome.log.write_csv(b).map_err(config_err)
    })?;
    write_csv(&job.out, "metrics.csv", &job.timestamp, |b| {
        write_metrics_csv(&summary, b).map_err(config_err)
    })?;
    write_json(&job.out, "metrics.json", &summary)?;
    write_json(&job.out, "assessment.json", &outcome.assessment)?;
    print_summary(prefix, &summary);
    let a = &outcome.assessment;
    println!(
        "{prefix}grasp {} after {} steps: {} contacts, closure residual {:.3}, reason {:?}",
        if a.stable { "stable" } else { "unstable" },
        outcome.steps,
        a.contact_count,
        a.closure_residual,
        a.failure_reason,
    );
    if a.stable && summary.fingers.iter().all(|f| f.success) {
        Ok(())
    } else {
        Err(Failure::Unstable)
    }
}

fn perturb_job(job: &Job, prefix: &str) -> Outcome {
    let (r, outcome) = execute(job)?;
    let report = perturbation_test(&r.scene, &outcome.state, &r.perturb).map_err(config_err)?;
    write_json(&job.out, "perturbation.json", &report)?;
    write_csv(&job.out, "perturbation_samples.csv", &job.timestamp, |b| {
        write_samples_csv(&report, b).map_err(config_err)
    })?;
    println!(
        "{prefix}perturbation {} (seed {}): {} of {} rounds, max displacement {:.3e} m",
        if report.passed { "passed" } else { "failed" },
        report.seed,
        report.iterations_run,
        r.perturb.iterations,
        report.max_displacement,
    );
    if report.passed {
        Ok(())
    } else {
        Err(Failure::Unstable)
    }
}

fn run_all(jobs: Vec<Job>, f: impl Fn(&Job, &str) -> Outcome + Sync) -> Vec<Outcome> {
    if jobs.len() == 1 {
        return vec![f(&jobs[0], "")];
    }
    jobs.par_iter()
        .enumerate()
        .map(|(i, job)| f(job, &format!("[run_{i:03} seed {}] ", job.config.run.seed)))
        .collect()
}

fn parse_contacts(text: &str) -> Result<Vec<ContactPoint>, Failure> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| config_err(format!("malformed JSON: {e}")))?;
    let list = match value {
        serde_json::Value::Object(mut m) => m
            .remove("contacts")
            .ok_or_else(|| Failure::Config("expected a `contacts` array".into()))?,
        other => other,
    };
    let contacts: Vec<ContactPoint> =
        serde_json::from_value(list).map_err(|e| config_err(format!("malformed contacts: {e}")))?;
    for (i, c) in contacts.iter().enumerate() {
        let len = c.normal.norm();
        if !((len - 1.0).abs() <= NORMAL_TOLERANCE) {
            return Err(Failure::Config(format!("contact {i}: normal has length {len}")));
        }
        if !(c.position.iter().all(|v| v.is_finite()) && c.normal_force.is_finite()) {
            return Err(Failure::Config(format!("contact {i}: non-finite value")));
        }
    }
    Ok(contacts)
}

fn validate_cmd(args: &ValidateArgs) -> Outcome {
    let config = ScenarioConfig::bundled(&args.set).map_err(config_err)?;
    config.validation.validate().map_err(config_err)?;
    let text = fs::read_to_string(&args.contacts)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", args.contacts.display())))?;
    let contacts = parse_contacts(&text)?;
    let assessment = validate_grasp(&contacts, &config.validation);
    println!("{}", serde_json::to_string_pretty(&assessment).map_err(config_err)?);
    if assessment.stable {
        Ok(())
    } else {
        Err(Failure::Unstable)
    }
}

fn exit_code(results: &[Outcome]) -> ExitCode {
    let mut code = 0;
    for r in results {
        match r {
            Ok(()) => {}
            Err(Failure::Unstable) if code == 0 => code = 2,
            Err(Failure::Unstable) => {}
            Err(Failure::Config(msg)) => {
                eprintln!("error: {msg}");
                code = 1;
            }
        }
    }
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let results = match &cli.command {
        Command::Run(args) => match jobs(&args.common, &[]) {
            Ok(jobs) => {
                let basis = args.efficiency_basis.into();
                run_all(jobs, |job, prefix| run_job(job, basis, prefix))
            }
            Err(e) => vec![Err(e)],
        },
        Command::Perturb(args) => {
            let extra: Vec<String> = args.iterations.map(|k| format!("perturb.iterations={k}")).into_iter().collect();
            match jobs(&args.common, &extra) {
                Ok(jobs) => run_all(jobs, perturb_job),
                Err(e) => vec![Err(e)],
            }
        }
        Command::Validate(args) => vec![validate_cmd(args)],
    };
    exit_code(&results)
}
