use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::policy::{oscillator_policy, AdversaryState, CorruptionSpec, PhaseSwitch, Policy};
use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::ising::{neighbor_sum, update_probability, ModelParams, Spin, SpinConfig};
use crate::rng::StreamRng;

/// Update probabilities tabulated over every attainable neighbour sum.
#[derive(Debug, Clone)]
pub(crate) struct Kernel {
    table: Vec<f64>,
    offset: i64,
    complete: bool,
}

impl Kernel {
    pub(crate) fn new(graph: &Graph, params: ModelParams) -> Self {
        let max = graph.max_degree() as i64;
        let table = (-max..=max).map(|s| update_probability(s, params)).collect();
        Self {
            table,
            offset: max,
            complete: graph.is_complete(),
        }
    }

    #[inline]
    pub(crate) fn prob(&self, s: i64) -> f64 {
        self.table[(s + self.offset) as usize]
    }

    /// On `K_n` the neighbour sum is the total magnetization minus the site.
    #[inline]
    pub(crate) fn neighbor_sum(&self, graph: &Graph, config: &SpinConfig, magnetization: i64, v: usize) -> i64 {
        if self.complete {
            magnetization - config.get(v).value()
        } else {
            neighbor_sum(graph, config, v)
        }
    }
}

#[inline]
pub(crate) fn heat_bath(p_plus: f64, threshold: f64) -> Spin {
    if threshold < p_plus {
        Spin::Plus
    } else {
        Spin::Minus
    }
}

/// A chain's configuration, clock and random stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainState {
    pub config: SpinConfig,
    pub time: u64,
    pub rng: StreamRng,
}

impl ChainState {
    pub fn new(config: SpinConfig, rng: StreamRng) -> Self {
        Self { config, time: 0, rng }
    }
}

/// What happened in one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEvent {
    /// Clock value after the step.
    pub time: u64,
    pub vertex: usize,
    pub neighbor_sum: i64,
    pub old: Spin,
    pub new: Spin,
    /// The selected vertex was corrupted, so the adversary chose its spin.
    pub corrupted_site: bool,
    /// The adversary rewrote spins on `A` after the site update.
    pub rewrote: bool,
}

impl StepEvent {
    /// An update against a strict-majority neighbourhood.
    pub fn is_deviation(&self) -> bool {
        !self.corrupted_site
            && ((self.neighbor_sum > 0 && self.new == Spin::Minus)
                || (self.neighbor_sum < 0 && self.new == Spin::Plus))
    }
}

/// One standard Glauber step: draw a vertex, then a uniform threshold, and
/// set the vertex to `+1` iff the threshold is below the update probability.
pub fn glauber_step(state: &mut ChainState, graph: &Graph, params: ModelParams) -> StepEvent {
    let v = state.rng.index(graph.n());
    let u = state.rng.uniform();
    let s = neighbor_sum(graph, &state.config, v);
    let old = state.config.get(v);
    let new = heat_bath(update_probability(s, params), u);
    state.config.set(v, new);
    state.time += 1;
    StepEvent {
        time: state.time,
        vertex: v,
        neighbor_sum: s,
        old,
        new,
        corrupted_site: false,
        rewrote: false,
    }
}

/// One corrupted step. The threshold is drawn even when a corrupted vertex
/// is selected, so the stream position never depends on the selection.
/// For the oscillator the observed magnetization is recomputed from scratch;
/// long runs should use [`Simulation`], which keeps it incrementally.
pub fn corrupted_step(
    state: &mut ChainState,
    spec: &CorruptionSpec,
    adversary: &mut AdversaryState,
    graph: &Graph,
    params: ModelParams,
) -> Result<StepEvent> {
    let mask = spec.mask(graph.n());
    let v = if spec.select_free_only() {
        let free: Vec<usize> = (0..graph.n()).filter(|&v| !mask[v]).collect();
        free[state.rng.index(free.len())]
    } else {
        state.rng.index(graph.n())
    };
    let u = state.rng.uniform();
    let s = neighbor_sum(graph, &state.config, v);
    let old = state.config.get(v);
    let time = state.time + 1;
    let new = if mask[v] {
        site_spin(spec, adversary, v, &state.config, time)
    } else {
        heat_bath(update_probability(s, params), u)
    };
    state.config.set(v, new);
    state.time = time;
    let rewrites = rewrite_pattern(spec, adversary, &state.config, &mask, time, |config, observed| {
        observed_magnetization(config, observed, &mask)
    })?;
    let rewrote = !rewrites.is_empty();
    for (w, spin) in rewrites {
        state.config.set(w, spin);
    }
    Ok(StepEvent {
        time,
        vertex: v,
        neighbor_sum: s,
        old,
        new,
        corrupted_site: mask[v],
        rewrote,
    })
}

fn observed_magnetization(config: &SpinConfig, observed: Option<&[usize]>, mask: &[bool]) -> i64 {
    match observed {
        Some(vs) => vs.iter().map(|&v| config.get(v).value()).sum(),
        None => (0..config.len()).filter(|&v| !mask[v]).map(|v| config.get(v).value()).sum(),
    }
}

fn site_spin(spec: &CorruptionSpec, adversary: &mut AdversaryState, v: usize, config: &SpinConfig, time: u64) -> Spin {
    match spec.policy() {
        Policy::PinPlus => Spin::Plus,
        Policy::PinMinus => Spin::Minus,
        Policy::PinPattern(p) => {
            let i = spec.vertices().iter().position(|&w| w == v).expect("corrupted vertex");
            p[i]
        }
        Policy::Oscillator(_) => adversary.phase.spin(),
        Policy::External(e) => e.site_spin(v, config, time, adversary.external.as_mut()),
    }
}

/// Spins a set-rewrite policy writes onto `A` at `time`. Oscillator rewrites
/// happen only on a phase switch.
fn rewrite_pattern(
    spec: &CorruptionSpec,
    adversary: &mut AdversaryState,
    config: &SpinConfig,
    mask: &[bool],
    time: u64,
    observed_m: impl Fn(&SpinConfig, Option<&[usize]>) -> i64,
) -> Result<Vec<(usize, Spin)>> {
    match spec.policy() {
        Policy::Oscillator(osc) => {
            let m = observed_m(config, osc.observed.as_deref());
            let next = oscillator_policy(m, adversary.phase, osc);
            if next == adversary.phase {
                return Ok(Vec::new());
            }
            adversary.phase = next;
            adversary.switches += 1;
            adversary.last_rewrite_time = Some(time);
            if let Some(trace) = adversary.trace.as_mut() {
                trace.push(PhaseSwitch {
                    time,
                    observed_magnetization: m,
                    new_phase: next,
                });
            }
            Ok(spec.vertices().iter().map(|&v| (v, next.spin())).collect())
        }
        Policy::External(e) => {
            let out = e.rewrite(config, time, adversary.external.as_mut());
            if let Some(&(bad, _)) = out.iter().find(|(v, _)| *v >= mask.len() || !mask[*v]) {
                return Err(Error::ContractViolation(format!(
                    "external policy rewrote vertex {bad}, which is not corrupted"
                )));
            }
            if !out.is_empty() {
                adversary.last_rewrite_time = Some(time);
            }
            Ok(out)
        }
        _ => Ok(Vec::new()),
    }
}

/// When to stop a run. Rules are checked before the first step and after
/// every step; the first satisfied rule wins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    MaxSteps(u64),
    HitConfig(SpinConfig),
    MagnetizationAtMost(i64),
    MagnetizationAtLeast(i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxSteps,
    HitConfig,
    MagnetizationAtMost,
    MagnetizationAtLeast,
}

/// Starting configuration. `IidUniform` consumes `n` words from the chain
/// stream before the first step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitialState {
    Config(SpinConfig),
    AllPlus,
    AllMinus,
    IidUniform,
}

impl InitialState {
    pub fn realize(&self, n: usize, rng: &mut StreamRng) -> Result<SpinConfig> {
        Ok(match self {
            InitialState::Config(c) => {
                if c.len() != n {
                    return Err(Error::Dimension(format!(
                        "initial configuration has {} spins, graph has {n} vertices",
                        c.len()
                    )));
                }
                c.clone()
            }
            InitialState::AllPlus => SpinConfig::uniform(n, Spin::Plus),
            InitialState::AllMinus => SpinConfig::uniform(n, Spin::Minus),
            InitialState::IidUniform => SpinConfig::new(
                (0..n)
                    .map(|_| if rng.next_u64() >> 63 == 1 { Spin::Plus } else { Spin::Minus })
                    .collect(),
            ),
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Sampling interval in steps; `None` means one sweep (`n` steps).
    pub thinning: Option<u64>,
    /// Subset for the restricted magnetization; `None` means `V ∖ A`.
    pub observed: Option<Vec<usize>>,
    /// Record adversary phase switches.
    pub trace_adversary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub time: u64,
    pub magnetization: i64,
    pub restricted_magnetization: i64,
    pub plus_count: usize,
    pub difference: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub stop_reason: StopReason,
    pub steps: u64,
    pub final_config: SpinConfig,
    /// SHA-256 of the final spins (one byte per vertex, 1 for `+1`).
    pub final_digest: String,
    pub adversary_switches: u64,
    pub phase_trace: Option<Vec<PhaseSwitch>>,
}

pub fn config_digest(config: &SpinConfig) -> String {
    let bytes: Vec<u8> = config.spins().iter().map(|&s| u8::from(s == Spin::Plus)).collect();
    hex::encode(Sha256::digest(&bytes))
}

/// Incremental simulation engine for (possibly corrupted) Glauber dynamics.
///
/// Keeps the total magnetization, the restricted magnetization, the `+1`
/// count and (when a target is set) the Hamming distance to a target, all
/// updated in O(1) per spin change.
pub struct Simulation<'g> {
    graph: &'g Graph,
    kernel: Kernel,
    spec: Option<CorruptionSpec>,
    adversary: AdversaryState,
    state: ChainState,
    corrupted: Vec<bool>,
    pinned: Vec<Option<Spin>>,
    free: Option<Vec<usize>>,
    observed: Vec<bool>,
    oscillator_observed: Option<Vec<bool>>,
    magnetization: i64,
    restricted: i64,
    oscillator_m: i64,
    plus: usize,
    target: Option<(SpinConfig, usize)>,
}

impl<'g> Simulation<'g> {
    /// Sets up a chain; pins are imposed and set-rewrite policies get their
    /// time-0 rewrite before the first step.
    pub fn new(
        graph: &'g Graph,
        params: ModelParams,
        spec: Option<CorruptionSpec>,
        init: &InitialState,
        mut rng: StreamRng,
        options: &RunOptions,
    ) -> Result<Self> {
        let n = graph.n();
        let config = init.realize(n, &mut rng)?;
        let corrupted = spec.as_ref().map_or_else(|| vec![false; n], |s| s.mask(n));
        let mut pinned = vec![None; n];
        if let Some(pins) = spec.as_ref().and_then(CorruptionSpec::pinned_spins) {
            for (v, s) in pins {
                pinned[v] = Some(s);
            }
        }
        let free = spec
            .as_ref()
            .filter(|s| s.select_free_only())
            .map(|_| (0..n).filter(|&v| !corrupted[v]).collect::<Vec<_>>());
        if free.as_ref().is_some_and(Vec::is_empty) {
            return Err(Error::InvalidParameter("free-only selection with every vertex corrupted".into()));
        }
        let observed = match &options.observed {
            Some(vs) => {
                let mut m = vec![false; n];
                for &v in vs {
                    if v >= n {
                        return Err(Error::Dimension(format!("observed vertex {v} out of range")));
                    }
                    m[v] = true;
                }
                m
            }
            None => corrupted.iter().map(|&c| !c).collect(),
        };
        let oscillator_observed = match spec.as_ref().map(CorruptionSpec::policy) {
            Some(Policy::Oscillator(o)) => Some(match &o.observed {
                Some(vs) => {
                    let mut m = vec![false; n];
                    for &v in vs {
                        m[v] = true;
                    }
                    m
                }
                None => corrupted.iter().map(|&c| !c).collect(),
            }),
            _ => None,
        };
        let adversary = AdversaryState::new(spec.as_ref(), options.trace_adversary);
        let mut sim = Self {
            graph,
            kernel: Kernel::new(graph, params),
            spec,
            adversary,
            state: ChainState::new(config, rng),
            corrupted,
            pinned,
            free,
            observed,
            oscillator_observed,
            magnetization: 0,
            restricted: 0,
            oscillator_m: 0,
            plus: 0,
            target: None,
        };
        sim.recompute_caches();
        sim.apply_initial_adversary()?;
        Ok(sim)
    }

    fn recompute_caches(&mut self) {
        let cfg = &self.state.config;
        self.magnetization = cfg.spins().iter().map(|s| s.value()).sum();
        self.plus = cfg.plus_count();
        self.restricted = (0..cfg.len()).filter(|&v| self.observed[v]).map(|v| cfg.get(v).value()).sum();
        self.oscillator_m = match &self.oscillator_observed {
            Some(m) => (0..cfg.len()).filter(|&v| m[v]).map(|v| cfg.get(v).value()).sum(),
            None => 0,
        };
        if let Some((target, _)) = &self.target {
            let d = cfg.spins().iter().zip(target.spins()).filter(|(a, b)| a != b).count();
            self.target = Some((target.clone(), d));
        }
    }

    fn apply_initial_adversary(&mut self) -> Result<()> {
        let n = self.graph.n();
        for v in 0..n {
            if let Some(s) = self.pinned[v] {
                self.set_spin(v, s);
            }
        }
        let Some(spec) = self.spec.as_ref() else {
            return Ok(());
        };
        if let Policy::Oscillator(_) = spec.policy() {
            let start = self.adversary.phase.spin();
            for &v in spec.vertices().to_vec().iter() {
                self.set_spin(v, start);
            }
        }
        self.rewrite(0)?;
        Ok(())
    }

    #[inline]
    fn set_spin(&mut self, v: usize, spin: Spin) {
        let old = self.state.config.get(v);
        if old == spin {
            return;
        }
        self.state.config.set(v, spin);
        let delta = spin.value() - old.value();
        self.magnetization += delta;
        if self.observed[v] {
            self.restricted += delta;
        }
        if let Some(m) = &self.oscillator_observed {
            if m[v] {
                self.oscillator_m += delta;
            }
        }
        if spin == Spin::Plus {
            self.plus += 1;
        } else {
            self.plus -= 1;
        }
        if let Some((target, d)) = &mut self.target {
            if target.get(v) == spin {
                *d -= 1;
            } else {
                *d += 1;
            }
        }
    }

    fn rewrite(&mut self, time: u64) -> Result<bool> {
        let Some(spec) = self.spec.as_ref() else {
            return Ok(false);
        };
        if spec.policy().is_pin() {
            return Ok(false);
        }
        let osc_m = self.oscillator_m;
        let rewrites = rewrite_pattern(spec, &mut self.adversary, &self.state.config, &self.corrupted, time, |_, _| osc_m)?;
        let rewrote = !rewrites.is_empty();
        for (v, s) in rewrites {
            self.set_spin(v, s);
        }
        Ok(rewrote)
    }

    /// Advances one step.
    pub fn step(&mut self) -> Result<StepEvent> {
        let n = self.graph.n();
        let v = match &self.free {
            Some(free) => free[self.state.rng.index(free.len())],
            None => self.state.rng.index(n),
        };
        let u = self.state.rng.uniform();
        let s = self.kernel.neighbor_sum(self.graph, &self.state.config, self.magnetization, v);
        let old = self.state.config.get(v);
        let time = self.state.time + 1;
        let corrupted_site = self.corrupted[v];
        let new = if !corrupted_site {
            heat_bath(self.kernel.prob(s), u)
        } else if let Some(p) = self.pinned[v] {
            p
        } else {
            let spec = self.spec.as_ref().expect("corrupted vertex implies a spec");
            site_spin(spec, &mut self.adversary, v, &self.state.config, time)
        };
        self.set_spin(v, new);
        self.state.time = time;
        let rewrote = self.rewrite(time)?;
        debug_assert!(self.pinned[v].is_none_or(|p| self.state.config.get(v) == p));
        Ok(StepEvent {
            time,
            vertex: v,
            neighbor_sum: s,
            old,
            new,
            corrupted_site,
            rewrote,
        })
    }

    /// Tracks the Hamming distance to `target` from now on.
    pub fn set_target(&mut self, target: SpinConfig) -> Result<()> {
        if target.len() != self.graph.n() {
            return Err(Error::Dimension("target configuration has the wrong length".into()));
        }
        let d = self
            .state
            .config
            .spins()
            .iter()
            .zip(target.spins())
            .filter(|(a, b)| a != b)
            .count();
        self.target = Some((target, d));
        Ok(())
    }

    pub fn target_distance(&self) -> Option<usize> {
        self.target.as_ref().map(|(_, d)| *d)
    }

    pub fn config(&self) -> &SpinConfig {
        &self.state.config
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn time(&self) -> u64 {
        self.state.time
    }

    pub fn magnetization(&self) -> i64 {
        self.magnetization
    }

    pub fn restricted_magnetization(&self) -> i64 {
        self.restricted
    }

    pub fn plus_count(&self) -> usize {
        self.plus
    }

    pub fn adversary(&self) -> &AdversaryState {
        &self.adversary
    }

    pub fn graph(&self) -> &Graph {
        self.graph
    }

    pub fn sample(&self) -> Sample {
        Sample {
            time: self.state.time,
            magnetization: self.magnetization,
            restricted_magnetization: self.restricted,
            plus_count: self.plus,
            difference: None,
        }
    }

    fn satisfied(&self, rules: &[StopRule]) -> Option<StopReason> {
        rules.iter().find_map(|rule| match rule {
            StopRule::MaxSteps(t) if self.state.time >= *t => Some(StopReason::MaxSteps),
            StopRule::HitConfig(_) if self.target_distance() == Some(0) => Some(StopReason::HitConfig),
            StopRule::MagnetizationAtMost(c) if self.magnetization <= *c => Some(StopReason::MagnetizationAtMost),
            StopRule::MagnetizationAtLeast(c) if self.magnetization >= *c => Some(StopReason::MagnetizationAtLeast),
            _ => None,
        })
    }

    /// Runs until a stop rule fires, calling `observer` after every step.
    /// Samples are kept at time 0, every `thinning` steps, and at the stop.
    pub fn run_until<F>(&mut self, rules: &[StopRule], thinning: u64, mut observer: F) -> Result<(Vec<Sample>, StopReason)>
    where
        F: FnMut(&Simulation<'_>, &StepEvent),
    {
        if let Some(StopRule::HitConfig(target)) = rules.iter().find(|r| matches!(r, StopRule::HitConfig(_))) {
            self.set_target(target.clone())?;
        }
        let thinning = thinning.max(1);
        let mut samples = vec![self.sample()];
        loop {
            if let Some(reason) = self.satisfied(rules) {
                if samples.last().map(|s| s.time) != Some(self.state.time) {
                    samples.push(self.sample());
                }
                return Ok((samples, reason));
            }
            let event = self.step()?;
            observer(self, &event);
            if self.state.time.is_multiple_of(thinning) {
                samples.push(self.sample());
            }
        }
    }

    pub fn into_trajectory(self, samples: Vec<Sample>, stop_reason: StopReason) -> Trajectory {
        Trajectory {
            samples,
            stop_reason,
            steps: self.state.time,
            final_digest: config_digest(&self.state.config),
            final_config: self.state.config,
            adversary_switches: self.adversary.switches,
            phase_trace: self.adversary.trace,
        }
    }
}

/// Runs a chain from `init` until the first satisfied stop rule.
/// Deterministic for a fixed `rng`.
pub fn run(
    graph: &Graph,
    params: ModelParams,
    spec: Option<CorruptionSpec>,
    init: &InitialState,
    stop: &[StopRule],
    rng: StreamRng,
    options: &RunOptions,
) -> Result<Trajectory> {
    run_observed(graph, params, spec, init, stop, rng, options, |_, _| {})
}

/// [`run`] with a per-step observer.
#[allow(clippy::too_many_arguments)]
pub fn run_observed<F>(
    graph: &Graph,
    params: ModelParams,
    spec: Option<CorruptionSpec>,
    init: &InitialState,
    stop: &[StopRule],
    rng: StreamRng,
    options: &RunOptions,
    observer: F,
) -> Result<Trajectory>
where
    F: FnMut(&Simulation<'_>, &StepEvent),
{
    let mut sim = Simulation::new(graph, params, spec, init, rng, options)?;
    let thinning = options.thinning.unwrap_or(graph.n() as u64);
    let (samples, reason) = sim.run_until(stop, thinning, observer)?;
    Ok(sim.into_trajectory(samples, reason))
}
