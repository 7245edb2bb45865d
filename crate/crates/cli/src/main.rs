use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use corrupted_glauber::experiments::{ScenarioParams, SCENARIOS};
use corrupted_glauber_cli::config::{
    AnalyticConfig, Command, CorruptionConfig, Formula, GeneratorSpec, GraphSource, HitTarget, InitConfig,
    PolicyKind, ScenarioConfig, VertexSet,
};
use corrupted_glauber_cli::{execute, read_config, CliError, RunConfig};

#[derive(Parser)]
#[command(
    name = "cglauber",
    version,
    about = "Corrupted Glauber dynamics for the Ising model: simulation, exact enumeration and scenarios",
    after_help = "The default output directory is $CGLAUBER_OUT, or ./cglauber-out when unset.\n\
                  Exit codes: 0 success, 1 runtime failure, 2 usage or validation error."
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run corrupted Glauber chains and write per-replica results and trajectories.
    Simulate(SimulateArgs),
    /// Enumerate the Gibbs measure of a small graph, optionally with pinned vertices.
    Exact(ExactArgs),
    /// Run a named scenario.
    Scenario(ScenarioArgs),
    /// Evaluate a closed-form expression.
    Analytic(AnalyticArgs),
    /// Run a configuration file (for example a `run.toml` written by an earlier run).
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelArgs {
    /// Graph generator, e.g. `grid:5`, `grid_rect:2:3`, `complete:400`, `path:4`,
    /// `star:4`, `random_regular:16:3:7` or `named:irregular6`.
    #[arg(long, conflicts_with = "graph_file")]
    graph: Option<String>,
    /// Edge-list file: a header `n m` followed by `m` lines `u v` with `u < v`.
    #[arg(long)]
    graph_file: Option<PathBuf>,
    /// Inverse temperature; `inf` for zero temperature.
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    field: Option<f64>,
    /// Pin these vertices to −1: a comma list, `diagonal` or `boundary`.
    #[arg(long, group = "policy")]
    pin_minus: Option<String>,
    /// Pin these vertices to +1.
    #[arg(long, group = "policy")]
    pin_plus: Option<String>,
    /// Pin these vertices to the spins given by `--pattern`.
    #[arg(long, group = "policy", requires = "pattern")]
    pin_pattern: Option<String>,
    /// Comma list of ±1 spins for `--pin-pattern`.
    #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
    pattern: Option<Vec<i64>>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    model: ModelArgs,
    /// Corrupt these vertices with the flip-threshold strategy.
    #[arg(long, group = "policy")]
    oscillator: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    up_threshold: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    down_threshold: Option<i64>,
    /// Select the updated vertex among uncorrupted vertices only.
    #[arg(long)]
    select_free_only: bool,
    #[arg(long, value_enum)]
    init: Option<InitArg>,
    /// Step cap.
    #[arg(long)]
    steps: Option<u64>,
    /// Stop on reaching this configuration.
    #[arg(long, value_enum)]
    hit: Option<HitArg>,
    #[arg(long, allow_hyphen_values = true)]
    magnetization_at_most: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    magnetization_at_least: Option<i64>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Trajectory sampling interval in steps (default: n).
    #[arg(long)]
    thinning: Option<u64>,
}

#[derive(Args)]
struct ExactArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    model: ModelArgs,
    /// Also compute the total-variation mixing time at this level.
    #[arg(long)]
    mixing_eps: Option<f64>,
    /// Also write the transition matrix.
    #[arg(long)]
    transition: bool,
}

#[derive(Args)]
struct ScenarioArgs {
    /// One of the registered scenarios.
    #[arg(value_parser = clap::builder::PossibleValuesParser::new(SCENARIOS))]
    name: Option<String>,
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    /// `β = c · ln n`.
    #[arg(long)]
    beta_log_multiple: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    field: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    thinning: Option<u64>,
    #[arg(long)]
    corrupted: Option<usize>,
    #[arg(long)]
    random_sets: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    graphs: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    budgets: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    times: Option<Vec<u64>>,
    #[arg(long)]
    window: Option<u64>,
}

#[derive(Args)]
struct AnalyticArgs {
    #[arg(value_parser = clap::builder::PossibleValuesParser::new(Formula::NAMES))]
    formula: Option<String>,
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    d: Option<u64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    a: Option<u32>,
    #[arg(long)]
    s: Option<i64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum InitArg {
    AllPlus,
    AllMinus,
    Iid,
}

#[derive(Clone, Copy, ValueEnum)]
enum HitArg {
    AllPlus,
    AllMinus,
}

fn base(common: &Common, command: Command) -> Result<RunConfig, CliError> {
    let mut config = match &common.config {
        Some(path) => {
            let c = read_config(path)?;
            if c.command != command {
                return Err(CliError::Usage(format!(
                    "{} declares command `{:?}`; use `cglauber run` to run it as written",
                    path.display(),
                    c.command
                )));
            }
            c
        }
        None => RunConfig::new(command),
    };
    override_opt(&mut config.seed, common.seed);
    if common.out.is_some() {
        config.out = common.out.clone();
    }
    Ok(config)
}

fn override_opt<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

fn apply_model(config: &mut RunConfig, m: &ModelArgs) -> Result<(), CliError> {
    if let Some(g) = &m.graph {
        config.graph = Some(GraphSource {
            generator: Some(GeneratorSpec::parse_inline(g)?),
            file: None,
        });
    }
    if let Some(f) = &m.graph_file {
        config.graph = Some(GraphSource {
            generator: None,
            file: Some(f.clone()),
        });
    }
    if let Some(b) = m.beta {
        config.model.beta = b;
    }
    if let Some(h) = m.field {
        config.model.field = h;
    }
    let chosen = [
        (PolicyKind::PinMinus, &m.pin_minus),
        (PolicyKind::PinPlus, &m.pin_plus),
        (PolicyKind::PinPattern, &m.pin_pattern),
    ];
    for (policy, set) in chosen {
        if let Some(set) = set {
            set_policy(config, policy, set)?;
        }
    }
    if let Some(p) = &m.pattern {
        corruption_mut(config, "--pattern")?.pattern = Some(p.clone());
    }
    Ok(())
}

fn set_policy(config: &mut RunConfig, policy: PolicyKind, set: &str) -> Result<(), CliError> {
    config.corruption = Some(CorruptionConfig {
        policy,
        vertices: VertexSet::parse_inline(set)?,
        pattern: None,
        up_threshold: None,
        down_threshold: None,
        eps: None,
        select_free_only: false,
    });
    Ok(())
}

fn corruption_mut<'a>(config: &'a mut RunConfig, flag: &str) -> Result<&'a mut CorruptionConfig, CliError> {
    config
        .corruption
        .as_mut()
        .ok_or_else(|| CliError::Usage(format!("{flag} needs a corrupted set")))
}

fn build(cmd: Cmd) -> Result<RunConfig, CliError> {
    match cmd {
        Cmd::Simulate(a) => {
            let mut c = base(&a.common, Command::Simulate)?;
            apply_model(&mut c, &a.model)?;
            if let Some(set) = &a.oscillator {
                set_policy(&mut c, PolicyKind::Oscillator, set)?;
            }
            if a.eps.is_some() {
                corruption_mut(&mut c, "--eps")?.eps = a.eps;
            }
            if a.up_threshold.is_some() {
                corruption_mut(&mut c, "--up-threshold")?.up_threshold = a.up_threshold;
            }
            if a.down_threshold.is_some() {
                corruption_mut(&mut c, "--down-threshold")?.down_threshold = a.down_threshold;
            }
            if a.select_free_only {
                corruption_mut(&mut c, "--select-free-only")?.select_free_only = true;
            }
            if let Some(i) = a.init {
                c.init = match i {
                    InitArg::AllPlus => InitConfig::AllPlus,
                    InitArg::AllMinus => InitConfig::AllMinus,
                    InitArg::Iid => InitConfig::Iid,
                };
            }
            override_opt(&mut c.stop.max_steps, a.steps);
            override_opt(
                &mut c.stop.hit,
                a.hit.map(|h| match h {
                    HitArg::AllPlus => HitTarget::AllPlus,
                    HitArg::AllMinus => HitTarget::AllMinus,
                }),
            );
            override_opt(&mut c.stop.magnetization_at_most, a.magnetization_at_most);
            override_opt(&mut c.stop.magnetization_at_least, a.magnetization_at_least);
            if let Some(r) = a.replicas {
                c.replicas = r;
            }
            override_opt(&mut c.thinning, a.thinning);
            Ok(c)
        }
        Cmd::Exact(a) => {
            let mut c = base(&a.common, Command::Exact)?;
            apply_model(&mut c, &a.model)?;
            override_opt(&mut c.exact.mixing_eps, a.mixing_eps);
            if a.transition {
                c.exact.transition = true;
            }
            Ok(c)
        }
        Cmd::Scenario(a) => {
            let mut c = base(&a.common, Command::Scenario)?;
            let mut sc = match (c.scenario.take(), a.name) {
                (Some(mut sc), Some(name)) => {
                    sc.name = name;
                    sc
                }
                (Some(sc), None) => sc,
                (None, Some(name)) => ScenarioConfig {
                    name,
                    params: ScenarioParams::default(),
                },
                (None, None) => return Err(CliError::Usage("scenario name required".into())),
            };
            let p = &mut sc.params;
            override_opt(&mut p.n, a.n);
            override_opt(&mut p.sizes, a.sizes);
            override_opt(&mut p.degree, a.degree);
            override_opt(&mut p.beta, a.beta);
            override_opt(&mut p.beta_log_multiple, a.beta_log_multiple);
            override_opt(&mut p.field, a.field);
            override_opt(&mut p.eps, a.eps);
            override_opt(&mut p.steps, a.steps);
            override_opt(&mut p.thinning, a.thinning);
            override_opt(&mut p.corrupted, a.corrupted);
            override_opt(&mut p.random_sets, a.random_sets);
            override_opt(&mut p.graphs, a.graphs);
            override_opt(&mut p.budgets, a.budgets);
            override_opt(&mut p.times, a.times);
            override_opt(&mut p.window, a.window);
            c.scenario = Some(sc);
            if let Some(r) = a.replicas {
                c.replicas = r;
            }
            Ok(c)
        }
        Cmd::Analytic(a) => {
            let mut c = base(&a.common, Command::Analytic)?;
            let mut an = match (c.analytic.take(), &a.formula) {
                (Some(mut an), Some(f)) => {
                    an.formula = Formula::parse(f)?;
                    an
                }
                (Some(an), None) => an,
                (None, Some(f)) => AnalyticConfig::new(Formula::parse(f)?),
                (None, None) => return Err(CliError::Usage("formula name required".into())),
            };
            override_opt(&mut an.n, a.n);
            override_opt(&mut an.d, a.d);
            override_opt(&mut an.beta, a.beta);
            override_opt(&mut an.c, a.c);
            override_opt(&mut an.eps, a.eps);
            override_opt(&mut an.delta, a.delta);
            override_opt(&mut an.alpha, a.alpha);
            override_opt(&mut an.a, a.a);
            override_opt(&mut an.s, a.s);
            c.analytic = Some(an);
            Ok(c)
        }
        Cmd::Run { config, out } => {
            let mut c = read_config(&config)?;
            if out.is_some() {
                c.out = out;
            }
            Ok(c)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match build(cli.command).and_then(|c| execute(&c)) {
        Ok(outcome) => {
            print!("{}", outcome.report);
            eprintln!("seed {}; outputs in {}", outcome.seed, outcome.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
