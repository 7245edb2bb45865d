//! Executes a validated [`RunConfig`] and writes its outputs.
//!
//! Every run writes, next to its data files, `manifest.json` (version,
//! command, seed, output list and the configuration echo) and `run.toml`
//! (the configuration with the seed filled in, replayable with `cglauber run`).

use std::collections::hash_map::RandomState;
use std::env;
use std::fs;
use std::hash::{BuildHasher, Hasher};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use corrupted_glauber::dynamics::{run, CorruptionSpec, InitialState, OscillatorSpec, Policy, RunOptions, StopRule};
use corrupted_glauber::exact::{
    biased_walk_hit_prob, deviation_prob, drift_threshold_l1, enumerate_model, expander_bottleneck_bound,
    grid_zero_temp_expected_time, magnetization_cut_scan, tv_mixing_time, BetaSpec,
};
use corrupted_glauber::experiments::{named_graph, run_scenario, Table};
use corrupted_glauber::graphs::{
    generate_complete, generate_grid, generate_grid_rect, generate_path, generate_random_regular, generate_star,
    grid_boundary, grid_diagonal,
};
use corrupted_glauber::rng::StreamRng;
use corrupted_glauber::{Graph, ModelParams, Spin, SpinConfig};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{
    write_config, AnalyticConfig, Command, CorruptionConfig, Formula, GeneratorSpec, GraphSource, HitTarget,
    InitConfig, PolicyKind, RunConfig, VertexSet,
};
use crate::CliError;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "CGLAUBER_OUT";
const DEFAULT_OUT: &str = "cglauber-out";

#[derive(Debug, Clone)]
pub struct Outcome {
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Data files followed by `run.toml` and `manifest.json`.
    pub files: Vec<PathBuf>,
    /// Human-readable report for stdout.
    pub report: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: Command,
    seed: u64,
    outputs: Vec<String>,
    config: &'a str,
}

/// `--out` or the configured directory, then `$CGLAUBER_OUT`, then
/// `./cglauber-out`.
pub fn resolve_output_dir(config: &RunConfig) -> PathBuf {
    config
        .out
        .clone()
        .or_else(|| env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn fresh_seed() -> u64 {
    RandomState::new().build_hasher().finish()
}

pub fn execute(config: &RunConfig) -> Result<Outcome, CliError> {
    config.validate()?;
    let mut config = config.clone();
    let seed = *config.seed.get_or_insert_with(fresh_seed);
    let out_dir = resolve_output_dir(&config);
    fs::create_dir_all(&out_dir).map_err(|e| io_error(&out_dir, e))?;

    let (mut files, report) = match config.command {
        Command::Simulate => simulate(&config, seed, &out_dir)?,
        Command::Exact => exact(&config, &out_dir)?,
        Command::Scenario => scenario(&config, seed, &out_dir)?,
        Command::Analytic => analytic(&config, &out_dir)?,
    };

    let echo = write_config(&config)?;
    let run_toml = out_dir.join("run.toml");
    write_file(&run_toml, &echo)?;
    let manifest = Manifest {
        tool: "cglauber",
        version: env!("CARGO_PKG_VERSION"),
        command: config.command,
        seed,
        outputs: files.iter().filter_map(|p| p.file_name()).map(|s| s.to_string_lossy().into_owned()).collect(),
        config: &echo,
    };
    let manifest_path = out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Runtime(e.to_string()))? + "\n";
    write_file(&manifest_path, &text)?;
    files.push(run_toml);
    files.push(manifest_path);

    Ok(Outcome {
        out_dir,
        seed,
        files,
        report,
    })
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn write_table(out_dir: &Path, file: &str, table: &Table) -> Result<PathBuf, CliError> {
    let path = out_dir.join(file);
    write_file(&path, &table.to_csv()?)?;
    Ok(path)
}

fn write_json(out_dir: &Path, file: &str, value: &Value) -> Result<PathBuf, CliError> {
    let path = out_dir.join(file);
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))? + "\n";
    write_file(&path, &text)?;
    Ok(path)
}

pub fn load_graph(source: &GraphSource) -> Result<Graph, CliError> {
    if let Some(path) = &source.file {
        let file = fs::File::open(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        return Ok(Graph::read_edge_list(BufReader::new(file))?);
    }
    let spec = source
        .generator
        .as_ref()
        .ok_or_else(|| CliError::Usage("graph: one of `generator` or `file` is required".into()))?;
    Ok(match spec {
        GeneratorSpec::Grid { n } => generate_grid(*n)?,
        GeneratorSpec::GridRect { rows, cols } => generate_grid_rect(*rows, *cols)?,
        GeneratorSpec::Complete { n } => generate_complete(*n)?,
        GeneratorSpec::Path { n } => generate_path(*n)?,
        GeneratorSpec::Star { leaves } => generate_star(*leaves)?,
        GeneratorSpec::RandomRegular { n, d, seed } => generate_random_regular(*n, *d, *seed)?,
        GeneratorSpec::Named { name } => named_graph(name)?,
    })
}

fn graph_of(config: &RunConfig) -> Result<Graph, CliError> {
    load_graph(config.graph.as_ref().expect("validated"))
}

fn resolve_vertices(set: &VertexSet, config: &RunConfig) -> Result<Vec<usize>, CliError> {
    match set {
        VertexSet::List(v) => Ok(v.clone()),
        VertexSet::Named(name) => {
            let side = match config.graph.as_ref().and_then(|g| g.generator.as_ref()) {
                Some(GeneratorSpec::Grid { n }) => *n,
                _ => return Err(CliError::Usage(format!("vertex set `{name}` needs a square grid generator"))),
            };
            match name.as_str() {
                "diagonal" => Ok(grid_diagonal(side)),
                "boundary" => Ok(grid_boundary(side)),
                other => Err(CliError::Usage(format!(
                    "unknown vertex set `{other}`; expected a list, `diagonal` or `boundary`"
                ))),
            }
        }
    }
}

fn corruption_spec(c: &CorruptionConfig, config: &RunConfig, graph: &Graph) -> Result<CorruptionSpec, CliError> {
    let n = graph.n();
    let vertices = resolve_vertices(&c.vertices, config)?;
    if c.pattern.is_some() && c.policy != PolicyKind::PinPattern {
        return Err(CliError::Usage("corruption.pattern is only used by `pin_pattern`".into()));
    }
    let policy = match c.policy {
        PolicyKind::PinMinus => Policy::PinMinus,
        PolicyKind::PinPlus => Policy::PinPlus,
        PolicyKind::PinPattern => {
            let pattern = c
                .pattern
                .as_ref()
                .ok_or_else(|| CliError::Usage("`pin_pattern` needs corruption.pattern".into()))?;
            Policy::PinPattern(pattern.iter().map(|&s| Spin::from_value(s)).collect::<Result<Vec<_>, _>>()?)
        }
        PolicyKind::Oscillator => {
            let defaults = c.eps.map(|eps| OscillatorSpec::from_eps(n, eps));
            let pick = |given: Option<i64>, default: Option<i64>, key: &str| {
                given
                    .or(default)
                    .ok_or_else(|| CliError::Usage(format!("oscillator needs corruption.{key} or corruption.eps")))
            };
            Policy::Oscillator(OscillatorSpec {
                up_threshold: pick(c.up_threshold, defaults.as_ref().map(|d| d.up_threshold), "up_threshold")?,
                down_threshold: pick(c.down_threshold, defaults.as_ref().map(|d| d.down_threshold), "down_threshold")?,
                observed: None,
            })
        }
    };
    Ok(CorruptionSpec::new(n, vertices, policy)?.with_free_only_selection(c.select_free_only))
}

fn spin_string(config: &SpinConfig) -> String {
    config.spins().iter().map(|&s| if s == Spin::Plus { '+' } else { '-' }).collect()
}

fn snake(value: impl Serialize) -> String {
    match serde_json::to_value(value) {
        Ok(Value::String(s)) => s,
        other => format!("{other:?}"),
    }
}

fn graph_json(graph: &Graph) -> Value {
    json!({
        "n": graph.n(),
        "edges": graph.edge_count(),
        "provenance": graph.provenance(),
    })
}

fn simulate(config: &RunConfig, seed: u64, out_dir: &Path) -> Result<(Vec<PathBuf>, String), CliError> {
    let graph = graph_of(config)?;
    let n = graph.n();
    let params = ModelParams::new(config.model.beta, config.model.field)?;
    let spec = config
        .corruption
        .as_ref()
        .map(|c| corruption_spec(c, config, &graph))
        .transpose()?;
    let init = match config.init {
        InitConfig::AllPlus => InitialState::AllPlus,
        InitConfig::AllMinus => InitialState::AllMinus,
        InitConfig::Iid => InitialState::IidUniform,
    };
    let mut rules = Vec::new();
    if let Some(t) = config.stop.max_steps {
        rules.push(StopRule::MaxSteps(t));
    }
    if let Some(hit) = config.stop.hit {
        let spin = match hit {
            HitTarget::AllPlus => Spin::Plus,
            HitTarget::AllMinus => Spin::Minus,
        };
        rules.push(StopRule::HitConfig(SpinConfig::uniform(n, spin)));
    }
    if let Some(m) = config.stop.magnetization_at_most {
        rules.push(StopRule::MagnetizationAtMost(m));
    }
    if let Some(m) = config.stop.magnetization_at_least {
        rules.push(StopRule::MagnetizationAtLeast(m));
    }
    let options = RunOptions {
        thinning: config.thinning,
        observed: None,
        trace_adversary: false,
    };

    let mut replicas = Table::new(
        "replicas",
        &[
            "replica",
            "stop_reason",
            "steps",
            "magnetization",
            "restricted_magnetization",
            "plus_count",
            "adversary_switches",
            "final_digest",
        ],
    );
    let mut trajectory = Table::new(
        "trajectory",
        &["replica", "time", "magnetization", "restricted_magnetization", "plus_count"],
    );
    let mut report = String::new();
    for r in 0..config.replicas {
        let t = run(&graph, params, spec.clone(), &init, &rules, StreamRng::new(seed, r as u64), &options)?;
        for s in &t.samples {
            trajectory.push(vec![
                r.into(),
                s.time.into(),
                s.magnetization.into(),
                s.restricted_magnetization.into(),
                s.plus_count.into(),
            ]);
        }
        let last = t.samples.last().expect("time 0 is always sampled");
        let reason = snake(t.stop_reason);
        report += &format!("replica {r}: {reason} after {} steps, magnetization {}\n", t.steps, last.magnetization);
        replicas.push(vec![
            r.into(),
            reason.into(),
            t.steps.into(),
            last.magnetization.into(),
            last.restricted_magnetization.into(),
            last.plus_count.into(),
            t.adversary_switches.into(),
            t.final_digest.clone().into(),
        ]);
    }
    let summary = json!({
        "graph": graph_json(&graph),
        "beta": if params.is_zero_temperature() { json!("inf") } else { json!(params.beta()) },
        "field": params.field(),
        "corrupted": spec.as_ref().map(|s| s.vertices().to_vec()),
        "policy": spec.as_ref().map(|s| s.policy().name()),
        "replicas": config.replicas,
        "seed": seed,
        "stream": "replica r uses stream r of the master seed",
    });
    let files = vec![
        write_table(out_dir, "simulate.csv", &replicas)?,
        write_table(out_dir, "simulate_trajectory.csv", &trajectory)?,
        write_json(out_dir, "simulate.json", &summary)?,
    ];
    Ok((files, report))
}

fn exact(config: &RunConfig, out_dir: &Path) -> Result<(Vec<PathBuf>, String), CliError> {
    let graph = graph_of(config)?;
    let params = ModelParams::new(config.model.beta, config.model.field)?;
    let pins = match &config.corruption {
        None => Vec::new(),
        Some(c) => corruption_spec(c, config, &graph)?
            .pinned_spins()
            .ok_or_else(|| CliError::Usage("exact enumeration supports pin policies only".into()))?,
    };
    let model = enumerate_model(&graph, params, &pins)?;

    let mut states = Table::new("states", &["state", "spins", "plus_count", "magnetization", "probability"]);
    for (x, &p) in model.mu().iter().enumerate() {
        states.push(vec![
            x.into(),
            spin_string(&model.config(x)).into(),
            model.plus_count(x).into(),
            model.magnetization(x).into(),
            p.into(),
        ]);
    }
    let scan = magnetization_cut_scan(&model);
    let mut cuts = Table::new("cuts", &["k", "mu", "phi"]);
    for row in &scan.rows {
        cuts.push(vec![row.k.into(), row.mu.into(), row.phi.into()]);
    }
    let mixing = config.exact.mixing_eps.map(|eps| tv_mixing_time(&model, eps)).transpose()?;
    let expected_plus = model.expected_plus(model.mu());

    let mut files = vec![
        write_table(out_dir, "exact.csv", &states)?,
        write_table(out_dir, "exact_cuts.csv", &cuts)?,
    ];
    if config.exact.transition {
        let path = out_dir.join("exact_transition.csv");
        let file = fs::File::create(&path).map_err(|e| io_error(&path, e))?;
        model.write_transition_csv(std::io::BufWriter::new(file))?;
        files.push(path);
    }
    let summary = json!({
        "graph": graph_json(&graph),
        "beta": params.beta(),
        "field": params.field(),
        "free_vertices": model.free_vertices(),
        "pinned": model.pinned().iter().map(|&(v, s)| json!([v, s.value()])).collect::<Vec<_>>(),
        "states": model.num_states(),
        "log_z": model.log_z(),
        "expected_plus": expected_plus,
        "cut_upper_bound": scan.upper_bound,
        "mixing_eps": config.exact.mixing_eps,
        "mixing_time": mixing,
        "detailed_balance_residual": model.detailed_balance_residual(),
        "stationarity_residual": model.stationarity_residual(),
    });
    files.push(write_json(out_dir, "exact.json", &summary)?);
    let mut report = format!(
        "{} states, log Z = {:.12}, E[plus count] = {expected_plus:.12}\n",
        model.num_states(),
        model.log_z()
    );
    if let Some(b) = scan.upper_bound {
        report += &format!("smallest threshold cut: k = {}, mu = {:.6e}, phi = {:.6e}\n", b.k, b.mu, b.phi);
    }
    if let Some(m) = mixing {
        report += &format!(
            "mixing time: {}{}\n",
            m.steps,
            if m.capped { " (capped, lower bound)" } else { "" }
        );
    }
    Ok((files, report))
}

fn scenario(config: &RunConfig, seed: u64, out_dir: &Path) -> Result<(Vec<PathBuf>, String), CliError> {
    let sc = config.scenario.as_ref().expect("validated");
    let result = run_scenario(&sc.name, &sc.params, config.replicas, seed)?;
    let files = result.write_outputs(out_dir)?;
    let mut report = String::new();
    for c in &result.verdict.checks {
        report += &format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for w in &result.warnings {
        report += &format!("warning: {w}\n");
    }
    report += &format!(
        "{}: {}\n",
        sc.name,
        if result.verdict.passed { "all checks passed" } else { "some checks failed" }
    );
    Ok((files, report))
}

fn need<T: Copy>(value: Option<T>, key: &str, formula: Formula) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("{} needs `{key}`", snake(formula))))
}

pub fn evaluate(a: &AnalyticConfig) -> Result<Value, CliError> {
    let f = a.formula;
    let usize_of = |v: u64| v as usize;
    Ok(match f {
        Formula::DriftThreshold => {
            let l1 = drift_threshold_l1(
                usize_of(need(a.n, "n", f)?),
                usize_of(need(a.d, "d", f)?),
                need(a.beta, "beta", f)?,
                need(a.eps, "eps", f)?,
                need(a.delta, "delta", f)?,
            )?;
            json!({ "l1": l1 })
        }
        Formula::BiasedWalk => serde_json::to_value(biased_walk_hit_prob(need(a.delta, "delta", f)?, need(a.a, "a", f)?)?)
            .map_err(|e| CliError::Runtime(e.to_string()))?,
        Formula::ExpanderBound => {
            let b = expander_bottleneck_bound(
                usize_of(need(a.n, "n", f)?),
                usize_of(need(a.d, "d", f)?),
                need(a.alpha, "alpha", f)?,
                need(a.beta, "beta", f)?,
                need(a.eps, "eps", f)?,
            );
            let mut v = serde_json::to_value(b).map_err(|e| CliError::Runtime(e.to_string()))?;
            v["in_regime"] = json!(b.in_regime());
            v
        }
        Formula::GridTime => {
            let n = need(a.n, "n", f)?;
            json!({ "expected_time": grid_zero_temp_expected_time(n).to_string() })
        }
        Formula::DeviationProb => {
            let beta = match (a.beta, a.c) {
                (Some(b), None) => BetaSpec::Value(b),
                (None, Some(c)) => BetaSpec::LogMultiple(c),
                _ => return Err(CliError::Usage("deviation_prob needs exactly one of `beta` and `c`".into())),
            };
            let n = usize_of(need(a.n, "n", f)?);
            json!({ "probability": deviation_prob(need(a.s, "s", f)?, n, beta)?, "beta": beta.value(n) })
        }
    })
}

fn analytic(config: &RunConfig, out_dir: &Path) -> Result<(Vec<PathBuf>, String), CliError> {
    let a = config.analytic.as_ref().expect("validated");
    let result = evaluate(a)?;
    let inputs = serde_json::to_value(a).map_err(|e| CliError::Runtime(e.to_string()))?;
    let doc = json!({ "formula": snake(a.formula), "inputs": inputs, "result": result });
    let path = write_json(out_dir, "analytic.json", &doc)?;
    let report = serde_json::to_string_pretty(&result).map_err(|e| CliError::Runtime(e.to_string()))? + "\n";
    Ok((vec![path], report))
}
