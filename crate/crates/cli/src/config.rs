//! Experiment configuration files.
//!
//! One JSON object per run:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "seed": 7,
//!   "trials": 10000,
//!   "experiment": { "kind": "csnr-sweep", "...": "..." }
//! }
//! ```
//!
//! `seed`, `trials`, `out` and `format` may be overridden from the command
//! line. A run without a seed from either source is rejected.

use std::path::{Path, PathBuf};

use cimsim::acim::{AnalogConfig, AnalogMode};
use cimsim::csnr::{InputSpec, DEFAULT_TRIALS};
use cimsim::dcim::{CostTable, NodeKind, Preset, ProbMode};
use cimsim::hybrid::BoundaryPolicy;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub trials: Option<usize>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    CsnrSweep(CsnrSweep),
    DatEval(DatEval),
    ProbEval(ProbEval),
    SparsityEval(SparsityEval),
    HybridSweep(HybridSweep),
    NetEval(NetEval),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::CsnrSweep(_) => "csnr-sweep",
            Experiment::DatEval(_) => "dat-eval",
            Experiment::ProbEval(_) => "prob-eval",
            Experiment::SparsityEval(_) => "sparsity-eval",
            Experiment::HybridSweep(_) => "hybrid-sweep",
            Experiment::NetEval(_) => "net-eval",
        }
    }
}

/// CSNR over a grid of `n x R x sigma`. The analog template's `rows` and
/// `adc_bits` are replaced by each grid point; empty axes fall back to
/// `input.n` and `analog.adc_bits`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsnrSweep {
    pub analog: AnalogConfig,
    pub input: InputSpec,
    pub sigmas: Vec<f64>,
    #[serde(default)]
    pub ns: Vec<usize>,
    #[serde(default)]
    pub adc_bits: Vec<u32>,
}

/// A named per-level, per-bit-position substitution map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedProfile {
    pub name: String,
    pub positions: Vec<Vec<NodeKind>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatEval {
    pub fan_ins: Vec<usize>,
    #[serde(default)]
    pub presets: Vec<Preset>,
    #[serde(default)]
    pub profiles: Vec<NamedProfile>,
    #[serde(default)]
    pub costs: CostTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbEval {
    pub ns: Vec<usize>,
    pub modes: Vec<ProbMode>,
}

/// Known-zero MSBs per input popcount, with a randomized check that the
/// reduced conversion reproduces every full-resolution code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparsityEval {
    pub n: usize,
    pub adc_bits: u32,
    pub ones: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OseConfig {
    /// Plane pairs evaluated per MAC.
    pub s: u32,
    pub policy: BoundaryPolicy,
}

/// Straight-split boundaries on shared noise, optionally followed by a
/// saliency-gated row. `b_das` defaults to `0..=m+p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridSweep {
    pub analog: AnalogConfig,
    pub input: InputSpec,
    #[serde(default)]
    pub b_das: Option<Vec<u32>>,
    #[serde(default)]
    pub ose: Option<OseConfig>,
}

/// Accuracy against layer CSNR on a model and dataset. Relative paths are
/// resolved against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetEval {
    pub model: PathBuf,
    pub dataset: PathBuf,
    pub analog: AnalogConfig,
    pub sigmas: Vec<f64>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

fn default_repeats() -> usize {
    20
}

/// Flag overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

/// A validated configuration with overrides applied.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub seed: u64,
    pub trials: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub experiment: Experiment,
    /// Directory used to resolve relative paths.
    pub base_dir: PathBuf,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    serde_json::from_str(text).map_err(|e| config_err(format!("config does not parse: {e}")))
}

pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

fn check<T>(r: cimsim::Result<T>, what: &str) -> Result<T, CliError> {
    r.map_err(|e| config_err(format!("{what}: {e}")))
}

fn check_sigmas(sigmas: &[f64]) -> Result<(), CliError> {
    if sigmas.is_empty() {
        return Err(config_err("sigmas must not be empty"));
    }
    if sigmas.iter().any(|s| !s.is_finite() || *s < 0.0) {
        return Err(config_err("sigmas must be finite and >= 0"));
    }
    Ok(())
}

fn nonempty<T>(v: &[T], what: &str) -> Result<(), CliError> {
    if v.is_empty() {
        Err(config_err(format!("{what} must not be empty")))
    } else {
        Ok(())
    }
}

/// Applies overrides and checks every sub-configuration. `kind` is the
/// subcommand, which must match the file.
pub fn resolve(
    cfg: ExperimentConfig,
    kind: &str,
    overrides: Overrides,
    base_dir: PathBuf,
) -> Result<Resolved, CliError> {
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(config_err(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            cfg.schema_version
        )));
    }
    if cfg.experiment.kind() != kind {
        return Err(config_err(format!(
            "config describes a {} experiment but {kind} was requested",
            cfg.experiment.kind()
        )));
    }
    let seed = overrides
        .seed
        .or(cfg.seed)
        .ok_or_else(|| config_err("no seed: set \"seed\" in the config or pass --seed"))?;
    let trials = overrides.trials.or(cfg.trials).unwrap_or(DEFAULT_TRIALS);
    if trials == 0 {
        return Err(config_err("trials must be at least 1"));
    }
    match &cfg.experiment {
        Experiment::CsnrSweep(c) => {
            check(c.analog.validate(), "analog")?;
            check(c.input.validate(), "input")?;
            check_sigmas(&c.sigmas)?;
            if c.ns.contains(&0) {
                return Err(config_err("ns entries must be >= 1"));
            }
            for &r in &c.adc_bits {
                let mut a = c.analog.clone();
                a.adc_bits = r;
                check(a.validate(), "adc_bits")?;
            }
        }
        Experiment::DatEval(c) => {
            nonempty(&c.fan_ins, "fan_ins")?;
            if c.fan_ins.contains(&0) {
                return Err(config_err("fan_ins entries must be >= 1"));
            }
            if c.presets.is_empty() && c.profiles.is_empty() {
                return Err(config_err("dat-eval needs at least one preset or profile"));
            }
            if trials < 1000 {
                return Err(config_err("dat-eval needs at least 1000 trials"));
            }
        }
        Experiment::ProbEval(c) => {
            nonempty(&c.ns, "ns")?;
            nonempty(&c.modes, "modes")?;
            if c.ns.contains(&0) {
                return Err(config_err("ns entries must be >= 1"));
            }
        }
        Experiment::SparsityEval(c) => {
            let mut a = AnalogConfig::ideal(c.n.max(1));
            a.rows = c.n;
            a.adc_bits = c.adc_bits;
            check(a.validate(), "sparsity")?;
            nonempty(&c.ones, "ones")?;
            if let Some(bad) = c.ones.iter().find(|&&o| o > c.n as u64) {
                return Err(config_err(format!("ones {bad} exceeds n = {}", c.n)));
            }
        }
        Experiment::HybridSweep(c) => {
            check(c.analog.validate(), "analog")?;
            check(c.input.validate(), "input")?;
            if c.analog.mode != AnalogMode::BitSerial {
                return Err(config_err("hybrid-sweep needs a bit_serial analog config"));
            }
            if c.analog.rows != c.input.n {
                return Err(config_err(format!(
                    "analog.rows {} differs from input.n {}",
                    c.analog.rows, c.input.n
                )));
            }
            if let Some(b) = &c.b_das {
                nonempty(b, "b_das")?;
            }
            if let Some(ose) = &c.ose {
                check(ose.policy.validate(), "ose.policy")?;
                let pairs = c.input.input_bits * c.input.weight_bits;
                if ose.s == 0 || ose.s > pairs {
                    return Err(config_err(format!("ose.s must lie in [1, {pairs}]")));
                }
            }
        }
        Experiment::NetEval(c) => {
            check(c.analog.validate(), "analog")?;
            check_sigmas(&c.sigmas)?;
            if c.repeats == 0 {
                return Err(config_err("repeats must be at least 1"));
            }
        }
    }
    Ok(Resolved {
        seed,
        trials,
        out: overrides.out.or(cfg.out),
        format: overrides.format.or(cfg.format).unwrap_or_default(),
        experiment: cfg.experiment,
        base_dir,
    })
}
