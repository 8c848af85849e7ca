//! `subrough` command line: one subcommand per experiment kind, JSON reports
//! on stdout or `--out`, CSV series next to the report where useful.
//!
//! Exit codes: 0 success, 1 error, 2 acceptance gate failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use subrough::capacity::{capacity_of_set, CapacityConfig, TargetSet};
use subrough::distance::{ball_volume, calibrated_gauge, control_distance, DistanceQuery, MetricHandle};
use subrough::fields::{builtin, SystemJson, VectorFieldSystem};
use subrough::gaussian::{small_ball_decay_fit, SmallBallVariant, SplittingOptions};
use subrough::hitting::{
    capacity_sandwich_check, hitting_exponent_fit, hitting_probability, joint_density_bound_check, DensityConfig,
    HitExperiment, SandwichConfig,
};
use subrough::rde::holder_moment_fit;
use subrough::report::render;
use subrough::signatures::signature_scaling_check;
use subrough::verify::{run_suite, Scale};
use subrough::{rng, Error, Result};

#[derive(Parser)]
#[command(name = "subrough", version, about = "Rough paths, control distances and capacities for fBM-driven systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Master seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true, env = "SUBROUGH_WORKERS", default_value_t = 0)]
    workers: usize,
    /// Report path; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Control distance between two points.
    Dist(DistArgs),
    /// Monte Carlo volume of metric balls.
    Vol(VolArgs),
    /// Capacity of a sampled set.
    Cap(CapArgs),
    /// Hitting probability, or an exponent fit when `radii` is given.
    Hit(ConfigArgs),
    /// Capacity sandwich over a ball family.
    Sandwich(ConfigArgs),
    /// Two-time density bound check.
    Density(ConfigArgs),
    /// Log-signature window scaling in law.
    Scaling(ScalingArgs),
    /// Small-ball decay fit.
    Smallball(SmallBallArgs),
    /// Holder moment slope.
    Moments(MomentArgs),
    /// Acceptance suite.
    Verify(VerifyArgs),
}

#[derive(Args, Serialize)]
struct DistArgs {
    /// Built-in name or path to a system JSON file.
    #[arg(long)]
    system: String,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    from: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    to: Vec<f64>,
    #[arg(long, default_value_t = 32)]
    segments: usize,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
}

#[derive(Args, Serialize)]
struct VolArgs {
    #[arg(long)]
    system: String,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    center: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    radii: Vec<f64>,
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    #[arg(long, default_value_t = 200)]
    calibration_pairs: usize,
}

#[derive(Args, Serialize)]
struct CapArgs {
    #[arg(long)]
    system: String,
    /// `ball:x1,..:r`, `segment:a1,..:b1,..` or `box:lo1,..:hi1,..`.
    #[arg(long, allow_hyphen_values = true)]
    set: String,
    #[arg(long, allow_hyphen_values = true)]
    alpha: f64,
    #[arg(long, default_value_t = 400)]
    points: usize,
    #[arg(long, default_value_t = 200)]
    calibration_pairs: usize,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON experiment file.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args, Serialize)]
struct ScalingArgs {
    #[arg(long)]
    hurst: f64,
    #[arg(long, default_value_t = 2)]
    level: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.25")]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
}

#[derive(Args, Serialize)]
struct SmallBallArgs {
    #[arg(long)]
    hurst: f64,
    #[arg(long, value_delimiter = ',')]
    x: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    dim: usize,
    #[arg(long, default_value_t = 1024)]
    steps: usize,
    #[arg(long, default_value_t = 1000)]
    particles: usize,
    #[arg(long, default_value_t = 64)]
    stages: usize,
    #[arg(long, default_value_t = 4)]
    replicates: usize,
}

#[derive(Args, Serialize)]
struct MomentArgs {
    #[arg(long)]
    system: String,
    #[arg(long)]
    hurst: f64,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    /// Lags `t − s` (multiples of 1/1024) with `s = 0.25`.
    #[arg(long, value_delimiter = ',', default_value = "0.0078125,0.015625,0.03125,0.0625,0.125")]
    lags: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    calibration_pairs: usize,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    #[arg(long, default_value = "core")]
    suite: String,
    /// Shrunken sample sizes (smoke runs; verdicts carry no statistical weight).
    #[arg(long)]
    quick: bool,
    /// Criteria to run, e.g. `1,2,6`.
    #[arg(long, value_delimiter = ',')]
    only: Vec<u8>,
}

/// A built-in name or an inline definition.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum SystemRef {
    Name(String),
    Inline(SystemJson),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HitFile {
    system: SystemRef,
    experiment: HitExperiment,
    #[serde(default)]
    radii: Option<Vec<f64>>,
    #[serde(default = "default_pairs")]
    calibration_pairs: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SandwichFile {
    system: SystemRef,
    experiment: HitExperiment,
    sandwich: SandwichConfig,
    #[serde(default = "default_pairs")]
    calibration_pairs: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DensityFile {
    system: SystemRef,
    density: DensityConfig,
    #[serde(default = "default_pairs")]
    calibration_pairs: usize,
}

fn default_pairs() -> usize {
    200
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    seed: u64,
    #[serde(flatten)]
    args: &'a T,
}

fn load_system(spec: &str) -> Result<VectorFieldSystem> {
    if Path::new(spec).is_file() {
        VectorFieldSystem::load(Path::new(spec))
    } else {
        builtin(spec).map_err(|_| Error::Config(format!("'{spec}' is neither a built-in system nor a readable file")))
    }
}

fn resolve(r: &SystemRef) -> Result<VectorFieldSystem> {
    match r {
        SystemRef::Name(n) => load_system(n),
        SystemRef::Inline(j) => VectorFieldSystem::from_json(j),
    }
}

fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Gauge mode when a gauge is registered, exact optimization otherwise.
fn metric_for(system: &VectorFieldSystem, pairs: usize, seed: u64) -> Result<MetricHandle> {
    match calibrated_gauge(system, pairs, seed) {
        Ok(h) => Ok(h),
        Err(Error::Domain(_)) if subrough::distance::Gauge::for_system(system).is_none() => Ok(MetricHandle::exact(system.clone())),
        Err(e) => Err(e),
    }
}

struct Output {
    json: String,
    csv: Option<String>,
    gate_failed: bool,
}

fn csv_rows(header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = format!("{header}\n");
    for r in rows {
        s.push_str(&r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

fn run(cli: &Cli) -> Result<Output> {
    let seed = cli.seed;
    let plain = |json| Ok(Output { json, csv: None, gate_failed: false });
    match &cli.command {
        Command::Dist(a) => {
            let system = load_system(&a.system)?;
            let q = DistanceQuery { segments: a.segments, restarts: a.restarts, seed, ..DistanceQuery::new(a.from.clone(), a.to.clone()) };
            let r = control_distance(&system, &q)?;
            plain(render("dist", &Envelope { seed, args: a }, &r)?)
        }
        Command::Vol(a) => {
            let system = load_system(&a.system)?;
            let h = calibrated_gauge(&system, a.calibration_pairs, seed)?;
            let vols = a.radii.iter().map(|&r| ball_volume(&h, &a.center, r, a.samples, seed)).collect::<Result<Vec<_>>>()?;
            let csv = csv_rows("r,volume,stderr", vols.iter().map(|v| vec![v.r, v.value, v.stderr]));
            let result = serde_json::json!({ "calibration": h.calibration(), "volumes": vols });
            Ok(Output { json: render("vol", &Envelope { seed, args: a }, &result)?, csv: Some(csv), gate_failed: false })
        }
        Command::Cap(a) => {
            let system = load_system(&a.system)?;
            let set = TargetSet::parse(&a.set)?;
            let h = metric_for(&system, a.calibration_pairs, seed)?;
            let r = capacity_of_set(&set, &CapacityConfig::new(a.alpha, h), a.points, seed)?;
            plain(render("cap", &Envelope { seed, args: a }, &r)?)
        }
        Command::Hit(c) => {
            let file: HitFile = read_config(&c.config)?;
            let system = resolve(&file.system)?;
            let h = metric_for(&system, file.calibration_pairs, seed)?;
            match &file.radii {
                Some(radii) => {
                    let fit = hitting_exponent_fit(&system, &h, &file.experiment, radii)?;
                    let csv = csv_rows(
                        "radius,estimate,lower,upper,successes,trials",
                        fit.points.iter().map(|p| {
                            let e = &p.estimate;
                            vec![p.radius, e.estimate, e.lower, e.upper, e.successes as f64, e.trials as f64]
                        }),
                    );
                    Ok(Output { json: render("hit", &Envelope { seed, args: &file }, &fit)?, csv: Some(csv), gate_failed: false })
                }
                None => plain(render("hit", &Envelope { seed, args: &file }, &hitting_probability(&system, &h, &file.experiment)?)?),
            }
        }
        Command::Sandwich(c) => {
            let file: SandwichFile = read_config(&c.config)?;
            let system = resolve(&file.system)?;
            let h = metric_for(&system, file.calibration_pairs, seed)?;
            let r = capacity_sandwich_check(&system, &h, &file.experiment, &file.sandwich)?;
            let csv = csv_rows(
                "radius,hit,cap_alpha_minus,cap_alpha_plus,ratio_upper,ratio_lower",
                r.rows.iter().map(|w| vec![w.radius, w.hit.estimate, w.cap_upper_index, w.cap_lower_index, w.ratio_upper, w.ratio_lower]),
            );
            Ok(Output { json: render("sandwich", &Envelope { seed, args: &file }, &r)?, csv: Some(csv), gate_failed: false })
        }
        Command::Density(c) => {
            let file: DensityFile = read_config(&c.config)?;
            let system = resolve(&file.system)?;
            let h = metric_for(&system, file.calibration_pairs, seed)?;
            plain(render("density", &Envelope { seed, args: &file }, &joint_density_bound_check(&system, &h, &file.density)?)?)
        }
        Command::Scaling(a) => {
            let r = signature_scaling_check(a.hurst, a.level, &a.eps, a.paths, seed)?;
            plain(render("scaling", &Envelope { seed, args: a }, &r)?)
        }
        Command::Smallball(a) => {
            let opts = SplittingOptions { steps: a.steps, particles: a.particles, stages: a.stages, replicates: a.replicates };
            let variant = if a.dim == 1 { SmallBallVariant::Fixed { phi: vec![1.0] } } else { SmallBallVariant::Net { size: 32 } };
            let fit = small_ball_decay_fit(a.hurst, a.dim, &a.x, &variant, &opts, seed)?;
            let csv = csv_rows("x,log_p,log_p_stderr", fit.points.iter().map(|p| vec![p.x, p.log_p, p.log_p_stderr]));
            Ok(Output { json: render("smallball", &Envelope { seed, args: a }, &fit)?, csv: Some(csv), gate_failed: false })
        }
        Command::Moments(a) => {
            let system = load_system(&a.system)?;
            let h = metric_for(&system, a.calibration_pairs, seed)?;
            let metric = |x: &[f64], y: &[f64]| h.distance(x, y).unwrap_or(f64::NAN);
            let pairs: Vec<(f64, f64)> = a.lags.iter().map(|l| (0.25, 0.25 + l)).collect();
            let fit = holder_moment_fit(&system, a.hurst, a.p, &pairs, a.paths, seed, &vec![0.0; system.n()], &metric)?;
            plain(render("moments", &Envelope { seed, args: a }, &fit)?)
        }
        Command::Verify(a) => {
            if a.suite != "core" {
                return Err(Error::Config(format!("unknown suite '{}'; available: core", a.suite)));
            }
            let scale = if a.quick { Scale::Quick } else { Scale::Full };
            let report = run_suite(seed, scale, &a.only, |o| {
                eprintln!("criterion {:>2} {} {} ({:.1} s)", o.id, if o.passed { "PASS" } else { "FAIL" }, o.name, o.elapsed.as_secs_f64());
            });
            Ok(Output { json: render("verify", &Envelope { seed, args: a }, &report)?, csv: None, gate_failed: !report.passed })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = rng::with_workers(cli.workers, || run(&cli));
    let out = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &out.json)
            .and_then(|_| match &out.csv {
                Some(csv) => std::fs::write(path.with_extension("csv"), csv),
                None => Ok(()),
            })
            .map_err(|e| e.to_string()),
        None => {
            println!("{}", out.json);
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(1);
    }
    if out.gate_failed {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}
