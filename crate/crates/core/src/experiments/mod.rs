//! Named scenario runners with tabular and JSON output.
//!
//! Replica `r` of a scenario seeded with `master_seed` draws from stream `r`
//! of a ChaCha8 generator seeded from `master_seed` (or from a seed derived
//! from it per sub-experiment, recorded in the provenance). Replicas run in
//! parallel and are collected in replica order, so results do not depend on
//! scheduling.

mod scenarios;
mod stats;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use scenarios::{named_graph, SCENARIOS};
pub use stats::{mean, quantile, scaling_fit, standard_error, ScalingFit};

use crate::error::{invalid, Error, Result};
use crate::graphs::Graph;
use crate::output::float;

/// Overrides for a scenario's defaults; unset fields take the documented
/// defaults of each scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioParams {
    /// Vertex count, or the grid side for grid scenarios.
    pub n: Option<usize>,
    /// Several sizes (grid sides) for scaling runs.
    pub sizes: Option<Vec<usize>>,
    pub degree: Option<usize>,
    pub beta: Option<f64>,
    /// `β = c · ln n` for the logarithmic-temperature scenario.
    pub beta_log_multiple: Option<f64>,
    pub field: Option<f64>,
    pub eps: Option<f64>,
    /// Step count or step cap.
    pub steps: Option<u64>,
    pub thinning: Option<u64>,
    /// Corrupted-set size override.
    pub corrupted: Option<usize>,
    /// Number of random sets in sampled closure sweeps.
    pub random_sets: Option<usize>,
    /// Named graphs for the exact scenarios.
    pub graphs: Option<Vec<String>>,
    /// Budgets for the influence scenario.
    pub budgets: Option<Vec<usize>>,
    /// Times for the submodularity scan.
    pub times: Option<Vec<u64>>,
    /// Steps of the post-hit persistence window.
    pub window: Option<u64>,
}

/// A CSV cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => float(*x),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}
impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}
impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width in table {}", self.name);
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// One named pass/fail condition of a verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl Verdict {
    fn from_checks(checks: Vec<Check>) -> Self {
        Self {
            passed: checks.iter().all(|c| c.passed),
            checks,
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngProvenance {
    pub generator: String,
    pub master_seed: u64,
    /// How streams and derived seeds map to replicas and sub-experiments.
    pub streams: Vec<(String, String)>,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub scenario: String,
    /// Fully resolved parameters.
    pub params: BTreeMap<String, serde_json::Value>,
    pub replicas: usize,
    /// The first table holds one row per replica.
    pub tables: Vec<Table>,
    pub aggregates: BTreeMap<String, serde_json::Value>,
    pub verdict: Verdict,
    pub warnings: Vec<String>,
    pub provenance: RngProvenance,
}

#[derive(Serialize)]
struct Summary<'a> {
    scenario: &'a str,
    params: &'a BTreeMap<String, serde_json::Value>,
    replicas: usize,
    aggregates: &'a BTreeMap<String, serde_json::Value>,
    verdict: &'a Verdict,
    warnings: &'a [String],
    provenance: &'a RngProvenance,
    tables: Vec<String>,
}

impl ExperimentResult {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn aggregate_f64(&self, key: &str) -> Option<f64> {
        self.aggregates.get(key).and_then(serde_json::Value::as_f64)
    }

    /// File name of each table: `<scenario>.csv` for the replica table and
    /// `<scenario>_<table>.csv` for the others.
    pub fn csv_file_names(&self) -> Vec<String> {
        self.tables
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if i == 0 {
                    format!("{}.csv", self.scenario)
                } else {
                    format!("{}_{}.csv", self.scenario, t.name)
                }
            })
            .collect()
    }

    /// The JSON summary: everything except the table contents.
    pub fn summary_json(&self) -> Result<String> {
        let s = Summary {
            scenario: &self.scenario,
            params: &self.params,
            replicas: self.replicas,
            aggregates: &self.aggregates,
            verdict: &self.verdict,
            warnings: &self.warnings,
            provenance: &self.provenance,
            tables: self.csv_file_names(),
        };
        Ok(serde_json::to_string_pretty(&s)? + "\n")
    }

    /// Writes every table as CSV and the summary as `<scenario>.json`.
    pub fn write_outputs(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for (table, name) in self.tables.iter().zip(self.csv_file_names()) {
            let p = dir.join(name);
            fs::write(&p, table.to_csv()?)?;
            paths.push(p);
        }
        let p = dir.join(format!("{}.json", self.scenario));
        fs::write(&p, self.summary_json()?)?;
        paths.push(p);
        Ok(paths)
    }
}

/// Runs a registered scenario. Replica counts of 0 are rejected.
pub fn run_scenario(name: &str, params: &ScenarioParams, replicas: usize, master_seed: u64) -> Result<ExperimentResult> {
    if replicas == 0 {
        return invalid("replica count must be positive");
    }
    scenarios::dispatch(name, params, replicas, master_seed)
}

/// The `m` largest-degree vertices, ties broken by ascending index, returned
/// ascending.
pub fn degree_heuristic_pick(graph: &Graph, m: usize) -> Result<Vec<usize>> {
    if m > graph.n() {
        return invalid(format!("budget {m} exceeds vertex count {}", graph.n()));
    }
    let mut order: Vec<usize> = (0..graph.n()).collect();
    order.sort_by(|&a, &b| graph.degree(b).cmp(&graph.degree(a)).then(a.cmp(&b)));
    let mut pick = order[..m].to_vec();
    pick.sort_unstable();
    Ok(pick)
}
