use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use daecbf_core::benchmarks::{by_name, from_params, BenchmarkPreset, DomainBox, ParameterRecord};
use daecbf_core::simulator::ControllerMode;
use daecbf_core::verifier::VerifierConfig;
use daecbf_core::Tolerances;

pub const CHECKS: [&str; 3] = ["correctness", "interior", "boundary"];
const VERIFIER_KEYS: [&str; 5] = ["grid_resolution", "grid_max_points", "local_starts", "local_iters", "refine_iters"];
const TOLERANCE_KEYS: [&str; 5] = ["rank_tol", "manifold_tol", "boundary_band", "newton_tol", "newton_max_iter"];

/// Settings from a JSON config file. Every field is optional except the
/// benchmark; flags given on the command line take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub benchmark: Option<String>,
    pub mode: Option<ControllerMode>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub seed: Option<u32>,
    pub samples: Option<usize>,
    pub threads: Option<usize>,
    pub checks: Option<Vec<String>>,
    pub tolerances: Option<Tolerances>,
    pub domain: Option<Vec<(f64, f64)>>,
    pub overrides: Option<BTreeMap<String, f64>>,
    pub out: Option<PathBuf>,
    pub state: Option<Vec<f64>>,
    pub u_nom: Option<Vec<f64>>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))
    }
}

/// Fully resolved run settings, as recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub benchmark: String,
    pub mode: ControllerMode,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u32,
    pub samples: usize,
    pub checks: Vec<String>,
    pub tolerances: Tolerances,
    pub domain: Vec<(f64, f64)>,
    pub overrides: BTreeMap<String, f64>,
    pub verifier: VerifierConfig,
    pub state: Option<Vec<f64>>,
    pub u_nom: Option<Vec<f64>>,
    #[serde(skip)]
    pub threads: usize,
    #[serde(skip)]
    pub out: PathBuf,
}

/// Command-line values layered over a config file.
#[derive(Debug, Clone, Default)]
pub struct FlagValues {
    pub benchmark: Option<String>,
    pub mode: Option<ControllerMode>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub seed: Option<u32>,
    pub samples: Option<usize>,
    pub threads: Option<usize>,
    pub checks: Option<Vec<String>>,
    pub overrides: Vec<(String, f64)>,
    pub out: Option<PathBuf>,
    pub state: Option<Vec<f64>>,
    pub u_nom: Option<Vec<f64>>,
}

pub fn parse_override(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("override '{s}' is not of the form KEY=VALUE"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("override '{k}' needs a number, got '{v}'"))?;
    Ok((k.trim().to_string(), v))
}

/// Preset, barrier offset and resolved configuration.
pub struct Resolved {
    pub config: RunConfig,
    pub preset: BenchmarkPreset,
}

pub fn resolve(command: &str, file: ConfigFile, flags: FlagValues) -> Result<Resolved, String> {
    let benchmark = flags
        .benchmark
        .or(file.benchmark)
        .ok_or("no benchmark given (use --benchmark or a config file)")?;
    let base = by_name(&benchmark).map_err(|e| e.to_string())?;

    let mut overrides = file.overrides.unwrap_or_default();
    overrides.extend(flags.overrides);

    let mut tolerances = file.tolerances.unwrap_or_default();
    let mut verifier = VerifierConfig::default();
    let mut param_overrides = Vec::new();
    for (k, &v) in &overrides {
        let key = k.as_str();
        if key == "b_offset" {
            continue;
        }
        if TOLERANCE_KEYS.contains(&key) {
            set_field(&mut tolerances, key, v)?;
        } else if VERIFIER_KEYS.contains(&key) {
            set_field(&mut verifier, key, v)?;
        } else {
            param_overrides.push((key, v));
        }
    }
    tolerances.validate().map_err(|e| e.to_string())?;

    let mut preset = if param_overrides.is_empty() {
        base
    } else {
        let mut record = serde_json::to_value(&base.params).map_err(|e| e.to_string())?;
        for (k, v) in param_overrides {
            match record.get_mut(k) {
                Some(slot) if slot.is_number() => *slot = number(v, slot)?,
                _ => return Err(format!("unknown override key '{k}' for benchmark {benchmark}")),
            }
        }
        let params: ParameterRecord = serde_json::from_value(record).map_err(|e| e.to_string())?;
        from_params(params)
    };
    if let Some(offset) = overrides.get("b_offset") {
        let spec = preset.barrier.with_offset(*offset);
        preset.set_barrier(spec);
    }
    if let Some(bounds) = file.domain {
        preset.domain = DomainBox::new(bounds);
    }
    preset.domain.validate(preset.system.n_x()).map_err(|e| e.to_string())?;

    let mode = flags.mode.or(file.mode).unwrap_or(ControllerMode::Aware);
    let dt = flags.dt.or(file.dt).unwrap_or(preset.scenario.dt);
    let horizon = flags.horizon.or(file.horizon).unwrap_or(preset.scenario.horizon);
    verifier.seed = flags.seed.or(file.seed).unwrap_or(verifier.seed);
    verifier.samples = flags.samples.or(file.samples).unwrap_or(verifier.samples);
    verifier.validate().map_err(|e| e.to_string())?;
    let checks = flags
        .checks
        .or(file.checks)
        .unwrap_or_else(|| CHECKS.iter().map(|s| s.to_string()).collect());
    for c in &checks {
        if !CHECKS.contains(&c.as_str()) {
            return Err(format!("unknown check '{c}' (expected {})", CHECKS.join(", ")));
        }
    }
    if !(dt > 0.0 && dt.is_finite() && horizon >= dt && horizon.is_finite()) {
        return Err(format!("need 0 < dt ≤ horizon, got dt = {dt}, horizon = {horizon}"));
    }
    let config = RunConfig {
        command: command.to_string(),
        benchmark: preset.name.clone(),
        mode,
        dt,
        horizon,
        seed: verifier.seed,
        samples: verifier.samples,
        checks,
        tolerances,
        domain: preset.domain.bounds.clone(),
        overrides,
        verifier,
        state: flags.state.or(file.state),
        u_nom: flags.u_nom.or(file.u_nom),
        threads: flags.threads.or(file.threads).unwrap_or(0),
        out: flags.out.or(file.out).unwrap_or_else(|| PathBuf::from("daecbf-out")),
    };
    Ok(Resolved { config, preset })
}

fn number(v: f64, like: &Value) -> Result<Value, String> {
    if like.is_f64() {
        serde_json::Number::from_f64(v)
            .map(Value::Number)
            .ok_or_else(|| format!("{v} is not finite"))
    } else if v >= 0.0 && v.fract() == 0.0 {
        Ok(Value::from(v as u64))
    } else {
        Err(format!("{v} must be a non-negative integer"))
    }
}

fn set_field<T: Serialize + serde::de::DeserializeOwned>(target: &mut T, key: &str, v: f64) -> Result<(), String> {
    let mut value = serde_json::to_value(&*target).map_err(|e| e.to_string())?;
    let slot = value.get_mut(key).ok_or_else(|| format!("unknown key '{key}'"))?;
    *slot = number(v, slot)?;
    *target = serde_json::from_value(value).map_err(|e| e.to_string())?;
    Ok(())
}
