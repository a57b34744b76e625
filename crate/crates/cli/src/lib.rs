//! `daecbf` command-line front end.
//!
//! Exit codes: 0 success, 1 a verification check found a counterexample,
//! 2 usage or configuration error, 3 runtime error.

pub mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use daecbf_core::filter::{aware_filter, dae_unaware_filter};
use daecbf_core::model::regularity_failures;
use daecbf_core::parallel::with_threads;
use daecbf_core::simulator::{consistent_init, reproject, run, ControllerMode, Scenario};
use daecbf_core::verifier::{sobol_point, verify_correctness, verify_feasibility, FeasibilityKind, VerificationReport};

use config::{parse_override, resolve, ConfigFile, FlagValues, Resolved, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

/// Domain samples used by `analyze` for the regularity sweep.
const REGULARITY_SAMPLES: usize = 256;

#[derive(Parser, Debug)]
#[command(
    name = "daecbf",
    version,
    about = "Safety filters and barrier verification for control-affine DAEs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Closed-loop simulation; writes trajectory.csv and summary.json.
    Simulate(CommonArgs),
    /// Correctness and feasibility checks; writes report.json.
    Verify(CommonArgs),
    /// One QP solve at a single state.
    FilterStep(CommonArgs),
    /// Index, relative degree and regularity report.
    Analyze(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Verify(_) => "verify",
            Command::FilterStep(_) => "filter-step",
            Command::Analyze(_) => "analyze",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Simulate(a) | Command::Verify(a) | Command::FilterStep(a) | Command::Analyze(a) => a,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModeArg {
    Aware,
    Unaware,
    Nominal,
}

impl From<ModeArg> for ControllerMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Aware => ControllerMode::Aware,
            ModeArg::Unaware => ControllerMode::Unaware,
            ModeArg::Nominal => ControllerMode::Nominal,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct CommonArgs {
    /// Preset name: wind_turbine or manipulator.
    #[arg(long)]
    pub benchmark: Option<String>,
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub seed: Option<u32>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Worker threads for sampling; 0 or absent uses all logical cores.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated subset of correctness,interior,boundary.
    #[arg(long, value_delimiter = ',')]
    pub checks: Option<Vec<String>>,
    /// KEY=VALUE; parameter, tolerance or verifier setting, or b_offset.
    #[arg(long = "override", value_parser = parse_override)]
    pub overrides: Vec<(String, f64)>,
    /// State for filter-step: full state, or differential part only.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub state: Option<Vec<f64>>,
    /// Nominal input for filter-step; defaults to the preset controller.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub u_nom: Option<Vec<f64>>,
}

impl CommonArgs {
    fn flags(&self) -> FlagValues {
        FlagValues {
            benchmark: self.benchmark.clone(),
            mode: self.mode.map(Into::into),
            dt: self.dt,
            horizon: self.horizon,
            seed: self.seed,
            samples: self.samples,
            threads: self.threads,
            checks: self.checks.clone(),
            overrides: self.overrides.clone(),
            out: self.out.clone(),
            state: self.state.clone(),
            u_nom: self.u_nom.clone(),
        }
    }
}

/// Outcome of a command that ran to completion.
struct Outcome {
    code: i32,
    stdout: Value,
    timing: Value,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let args = cli.command.args();
    let file = match &args.config {
        Some(p) => match ConfigFile::load(p) {
            Ok(f) => f,
            Err(e) => return usage(&e),
        },
        None => ConfigFile::default(),
    };
    let resolved = match resolve(cli.command.name(), file, args.flags()) {
        Ok(r) => r,
        Err(e) => return usage(&e),
    };
    let clock = Instant::now();
    let threads = resolved.config.threads;
    let result = with_threads(threads, || execute(&cli.command, &resolved));
    let outcome = match result {
        Ok(Ok(o)) => o,
        Ok(Err(e)) | Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    let mut timing = outcome.timing;
    timing["total_s"] = json!(clock.elapsed().as_secs_f64());
    let out = &resolved.config.out;
    let written = write_json(&out.join("manifest.json"), &manifest(&resolved)).and_then(|_| write_json(&out.join("timing.json"), &timing));
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_RUNTIME;
    }
    let text = serde_json::to_string_pretty(&outcome.stdout).unwrap_or_default();
    let _ = writeln!(std::io::stdout().lock(), "{text}");
    outcome.code
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("DAECBF_LOG", "error");
    let _ = env_logger::Builder::from_env(env).try_init();
}

fn usage(msg: &str) -> i32 {
    eprintln!("usage error: {msg}");
    EXIT_USAGE
}

fn manifest(r: &Resolved) -> Value {
    json!({
        "tool": "daecbf",
        "version": env!("CARGO_PKG_VERSION"),
        "config": r.config,
        "parameters": r.preset.params,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> daecbf_core::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| daecbf_core::Error::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn execute(cmd: &Command, r: &Resolved) -> daecbf_core::Result<Outcome> {
    match cmd {
        Command::Simulate(_) => simulate(r),
        Command::Verify(_) => verify(r),
        Command::FilterStep(_) => filter_step(r),
        Command::Analyze(_) => analyze(r),
    }
}

fn scenario(r: &Resolved) -> Scenario {
    let c = &r.config;
    let mut sc = r.preset.scenario_for(c.mode);
    sc.dt = c.dt;
    sc.horizon = c.horizon;
    sc
}

fn simulate(r: &Resolved) -> daecbf_core::Result<Outcome> {
    let c: &RunConfig = &r.config;
    let pd = r.preset.projected_dynamics(&c.tolerances)?;
    let sc = scenario(r);
    let t0 = Instant::now();
    let traj = run(&pd, &sc)?;
    let sim_s = t0.elapsed().as_secs_f64();
    fs::create_dir_all(&c.out)?;
    traj.write_csv(fs::File::create(c.out.join("trajectory.csv"))?)?;
    let tip = traj.x.iter().map(|x| x[x.len() - 1]).fold(f64::NEG_INFINITY, f64::max);
    let summary = json!({
        "benchmark": c.benchmark,
        "mode": c.mode,
        "b0": traj.b.first(),
        "max_last_state": tip,
        "summary": traj.summary,
    });
    write_json(&c.out.join("summary.json"), &summary)?;
    let code = if traj.summary.halted { EXIT_RUNTIME } else { EXIT_OK };
    if traj.summary.halted {
        log::error!("run halted at t = {:?}", traj.summary.first_infeasible_time);
    }
    Ok(Outcome {
        code,
        stdout: summary,
        timing: json!({ "simulate_s": sim_s }),
    })
}

fn verify(r: &Resolved) -> daecbf_core::Result<Outcome> {
    let c = &r.config;
    let preset = &r.preset;
    let pd = preset.projected_dynamics(&c.tolerances)?;
    let mut report = VerificationReport::default();
    let mut timing = serde_json::Map::new();
    for check in &c.checks {
        log::info!("running {check} check");
        let res = match check.as_str() {
            "correctness" => {
                let rep = verify_correctness(&preset.system, &preset.barrier, &preset.domain, &c.tolerances, &c.verifier)?;
                report.correctness = Some(rep.clone());
                rep
            }
            "interior" => {
                let rep = verify_feasibility(&pd, &preset.barrier, &preset.domain, FeasibilityKind::Interior, &c.verifier)?;
                report.interior = Some(rep.clone());
                rep
            }
            _ => {
                let rep = verify_feasibility(&pd, &preset.barrier, &preset.domain, FeasibilityKind::Boundary, &c.verifier)?;
                report.boundary = Some(rep.clone());
                rep
            }
        };
        timing.insert(format!("{check}_s"), json!(res.wall_time_s));
    }
    let stable = report.without_timing();
    write_json(&c.out.join("report.json"), &stable)?;
    let code = if report.any_violated() { EXIT_VIOLATED } else { EXIT_OK };
    Ok(Outcome {
        code,
        stdout: serde_json::to_value(&stable).unwrap_or(Value::Null),
        timing: Value::Object(timing),
    })
}

fn filter_step(r: &Resolved) -> daecbf_core::Result<Outcome> {
    let c = &r.config;
    let preset = &r.preset;
    let sys = &preset.system;
    let sc = scenario(r);
    let tol = &c.tolerances;
    let x = match &c.state {
        Some(s) if s.len() == sys.n_d => consistent_init(sys, s, &sc.x_a_guess, tol.newton_tol, tol.newton_max_iter)?,
        Some(s) if s.len() == sys.n_x() => s.clone(),
        Some(s) => {
            return Err(daecbf_core::Error::InvalidInput(format!(
                "state has {} entries, expected {} or {}",
                s.len(),
                sys.n_d,
                sys.n_x()
            )))
        }
        None => consistent_init(sys, &sc.x_d0, &sc.x_a_guess, tol.newton_tol, tol.newton_max_iter)?,
    };
    let u_nom = c.u_nom.clone().unwrap_or_else(|| (sc.nominal)(&x));
    let result = match c.mode {
        ControllerMode::Aware => Some(aware_filter(&preset.projected_dynamics(tol)?, &sc.barrier, &x, &u_nom)?),
        ControllerMode::Unaware => Some(dae_unaware_filter(sys, &sc.barrier, &x, &u_nom)?),
        ControllerMode::Nominal => None,
    };
    let out = match &result {
        Some(res) => json!({
            "state": x,
            "u_nom": u_nom,
            "status": res.status,
            "u": res.u,
            "active_set": res.active_set,
            "objective": res.objective,
            "certificate": res.certificate,
        }),
        None => json!({ "state": x, "u_nom": u_nom, "status": "Nominal", "u": u_nom, "active_set": [] }),
    };
    write_json(&c.out.join("filter_step.json"), &out)?;
    Ok(Outcome {
        code: EXIT_OK,
        stdout: out,
        timing: json!({}),
    })
}

fn analyze(r: &Resolved) -> daecbf_core::Result<Outcome> {
    let c = &r.config;
    let preset = &r.preset;
    let tol = &c.tolerances;
    let t0 = Instant::now();
    let a = preset.analyze(tol)?;
    let analyze_s = t0.elapsed().as_secs_f64();
    let sys = &preset.system;
    let samples: Vec<Vec<f64>> = (0..REGULARITY_SAMPLES)
        .filter_map(|i| {
            reproject(
                sys,
                &sobol_point(&preset.domain, i, c.verifier.seed),
                tol.newton_tol,
                tol.newton_max_iter,
            )
            .ok()
        })
        .filter(|x| preset.domain.contains(x, 0.0))
        .collect();
    let failures = regularity_failures(sys, &samples, a.nu, a.d_prime, tol)?;
    let out = json!({
        "benchmark": c.benchmark,
        "nu": a.nu,
        "d_prime": a.d_prime,
        "d": a.d,
        "j_a_rank": a.j_a_rank,
        "regular_at_probes": a.regular,
        "domain_samples": samples.len(),
        "regularity_failures": failures.len(),
    });
    write_json(&c.out.join("analysis.json"), &out)?;
    Ok(Outcome {
        code: EXIT_OK,
        stdout: out,
        timing: json!({ "analyze_s": analyze_s }),
    })
}
