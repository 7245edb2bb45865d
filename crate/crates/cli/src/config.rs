//! The TOML run configuration.
//!
//! ```toml
//! command = "simulate"
//! seed = 42
//! replicas = 2
//!
//! [graph.generator]
//! kind = "grid"
//! n = 3
//!
//! [model]
//! beta = inf
//!
//! [corruption]
//! policy = "pin_minus"
//! vertices = "diagonal"
//!
//! [stop]
//! hit = "all_minus"
//! max_steps = 1000000
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use corrupted_glauber::experiments::ScenarioParams;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Simulate,
    Exact,
    Scenario,
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "one")]
    pub replicas: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thinning: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<GraphSource>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corruption: Option<CorruptionConfig>,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub stop: StopConfig,
    #[serde(default)]
    pub exact: ExactConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analytic: Option<AnalyticConfig>,
}

fn one() -> usize {
    1
}

/// Exactly one of `generator` and `file`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorSpec {
    Grid { n: usize },
    GridRect { rows: usize, cols: usize },
    Complete { n: usize },
    Path { n: usize },
    Star { leaves: usize },
    RandomRegular { n: usize, d: usize, seed: u64 },
    Named { name: String },
}

impl GeneratorSpec {
    /// Parses the inline form `kind:arg[:arg…]`, e.g. `grid:3` or
    /// `random_regular:16:3:7`.
    pub fn parse_inline(s: &str) -> Result<Self, CliError> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize| -> Result<u64, CliError> {
            parts
                .get(i)
                .ok_or_else(|| CliError::Usage(format!("graph `{s}` is missing argument {i}")))?
                .parse()
                .map_err(|_| CliError::Usage(format!("graph `{s}`: argument {i} is not a nonnegative integer")))
        };
        let arity = |k: usize| -> Result<(), CliError> {
            if parts.len() == k + 1 {
                Ok(())
            } else {
                Err(CliError::Usage(format!("graph `{s}` takes {k} argument(s)")))
            }
        };
        let spec = match parts[0] {
            "grid" => {
                arity(1)?;
                GeneratorSpec::Grid { n: num(1)? as usize }
            }
            "grid_rect" => {
                arity(2)?;
                GeneratorSpec::GridRect {
                    rows: num(1)? as usize,
                    cols: num(2)? as usize,
                }
            }
            "complete" => {
                arity(1)?;
                GeneratorSpec::Complete { n: num(1)? as usize }
            }
            "path" => {
                arity(1)?;
                GeneratorSpec::Path { n: num(1)? as usize }
            }
            "star" => {
                arity(1)?;
                GeneratorSpec::Star { leaves: num(1)? as usize }
            }
            "random_regular" => {
                arity(3)?;
                GeneratorSpec::RandomRegular {
                    n: num(1)? as usize,
                    d: num(2)? as usize,
                    seed: num(3)?,
                }
            }
            "named" => {
                arity(1)?;
                GeneratorSpec::Named { name: parts[1].to_string() }
            }
            other => return Err(CliError::Usage(format!("unknown graph kind `{other}`"))),
        };
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Inverse temperature; `inf` for zero temperature.
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub field: f64,
}

fn default_beta() -> f64 {
    1.0
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            beta: default_beta(),
            field: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    PinMinus,
    PinPlus,
    PinPattern,
    Oscillator,
}

/// A vertex list, or the grid sets `diagonal` and `boundary`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VertexSet {
    List(Vec<usize>),
    Named(String),
}

impl VertexSet {
    pub fn parse_inline(s: &str) -> Result<Self, CliError> {
        if s == "diagonal" || s == "boundary" {
            return Ok(VertexSet::Named(s.to_string()));
        }
        if s.is_empty() {
            return Ok(VertexSet::List(Vec::new()));
        }
        s.split(',')
            .map(|v| v.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map(VertexSet::List)
            .map_err(|_| CliError::Usage(format!("vertex set `{s}` is not a comma-separated index list")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorruptionConfig {
    pub policy: PolicyKind,
    pub vertices: VertexSet,
    /// Spins (`1` or `-1`) on `vertices`, in order, for `pin_pattern`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub up_threshold: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub down_threshold: Option<i64>,
    /// Sets both thresholds to `±⌈n^{0.5+eps/2}⌉` when they are not given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default)]
    pub select_free_only: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitConfig {
    AllPlus,
    AllMinus,
    #[default]
    Iid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitTarget {
    AllPlus,
    AllMinus,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hit: Option<HitTarget>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnetization_at_most: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub magnetization_at_least: Option<i64>,
}

impl StopConfig {
    fn is_empty(&self) -> bool {
        self == &StopConfig::default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactConfig {
    /// Total-variation level for the mixing time; skipped when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mixing_eps: Option<f64>,
    /// Also write the transition matrix.
    #[serde(default)]
    pub transition: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub params: ScenarioParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    DriftThreshold,
    BiasedWalk,
    ExpanderBound,
    GridTime,
    DeviationProb,
}

impl Formula {
    pub const NAMES: [&'static str; 5] = ["drift_threshold", "biased_walk", "expander_bound", "grid_time", "deviation_prob"];

    pub fn parse(s: &str) -> Result<Self, CliError> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| {
            CliError::Usage(format!("unknown formula `{s}`; expected one of {}", Formula::NAMES.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticConfig {
    pub formula: Formula,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// `β = c · ln n` for `deviation_prob`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<i64>,
}

impl AnalyticConfig {
    pub fn new(formula: Formula) -> Self {
        Self {
            formula,
            n: None,
            d: None,
            beta: None,
            c: None,
            eps: None,
            delta: None,
            alpha: None,
            a: None,
            s: None,
        }
    }
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            seed: None,
            replicas: 1,
            thinning: None,
            out: None,
            graph: None,
            model: ModelConfig::default(),
            corruption: None,
            init: InitConfig::default(),
            stop: StopConfig::default(),
            exact: ExactConfig::default(),
            scenario: None,
            analytic: None,
        }
    }

    /// Structural checks that need no graph.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Usage(m));
        if self.replicas == 0 {
            return bad("replicas must be positive".into());
        }
        if let Some(g) = &self.graph {
            match (&g.generator, &g.file) {
                (Some(_), Some(_)) => return bad("graph: give either `generator` or `file`, not both".into()),
                (None, None) => return bad("graph: one of `generator` or `file` is required".into()),
                _ => {}
            }
        }
        if self.model.beta.is_nan() || self.model.beta < 0.0 {
            return bad(format!("model.beta must be nonnegative, got {}", self.model.beta));
        }
        if !self.model.field.is_finite() {
            return bad("model.field must be finite".into());
        }
        match self.command {
            Command::Simulate | Command::Exact => {
                if self.graph.is_none() {
                    return bad(format!("{:?} needs a [graph] section", self.command).to_lowercase());
                }
                if self.command == Command::Simulate && self.stop.is_empty() {
                    return bad("simulate needs at least one [stop] rule".into());
                }
                if self.command == Command::Exact && self.model.beta.is_infinite() {
                    return bad("exact enumeration needs a finite beta".into());
                }
            }
            Command::Scenario => {
                if self.scenario.is_none() {
                    return bad("scenario needs a [scenario] section with a name".into());
                }
            }
            Command::Analytic => {
                if self.analytic.is_none() {
                    return bad("analytic needs an [analytic] section with a formula".into());
                }
            }
        }
        Ok(())
    }
}

/// Parses and validates a configuration; unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let config: RunConfig = toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))?;
    config.validate()?;
    Ok(config)
}

pub fn read_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn write_config(config: &RunConfig) -> Result<String, CliError> {
    toml::to_string(config).map_err(|e| CliError::Runtime(format!("cannot serialize configuration: {e}")))
}
