//! Exact computations on tiny instances and closed-form evaluators.
//!
//! States of an [`ExactModel`] enumerate `{±1}` over the free (unpinned)
//! vertices sorted ascending: bit `i` of the state index is the spin of the
//! `i`-th free vertex, with `1` meaning `+1`.

mod analytic;
mod closure;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use analytic::{
    biased_walk_hit_prob, deviation_prob, drift_threshold_l1, expander_bottleneck_bound, grid_zero_temp_expected_time,
    BetaSpec, BiasedWalk, ExpanderBound,
};
pub use closure::{bootstrap_closure, ClosureRule};

use crate::error::{invalid, Error, Result};
use crate::graphs::Graph;
use crate::ising::{hamiltonian, update_probability, ModelParams, Spin, SpinConfig};
use crate::output::float;

/// Largest number of free vertices [`enumerate_model`] accepts.
pub const MAX_FREE_VERTICES: usize = 20;
/// Largest state count [`tv_mixing_time`] accepts.
pub const MAX_MIXING_STATES: usize = 4096;
/// Step cap of [`tv_mixing_time`].
pub const MIXING_STEP_CAP: u64 = 10_000_000;
/// Largest number of free vertices [`t_step_expected_plus`] accepts.
pub const MAX_EVOLVE_FREE_VERTICES: usize = 16;

/// Enumerated Gibbs measure and Glauber transition structure.
///
/// The chain selects a vertex uniformly from all of `V`; selecting a pinned
/// vertex leaves the state unchanged. Only single-site moves have positive
/// probability, so `P` is stored as one flip probability per (state, free
/// vertex) plus the self-loop mass.
#[derive(Debug, Clone)]
pub struct ExactModel {
    graph: Graph,
    params: ModelParams,
    pinned: Vec<Option<Spin>>,
    free: Vec<usize>,
    mu: Vec<f64>,
    log_z: f64,
    flip: Vec<f64>,
    stay: Vec<f64>,
}

/// Builds the exact model with the given vertices pinned.
pub fn enumerate_model(graph: &Graph, params: ModelParams, pinned: &[(usize, Spin)]) -> Result<ExactModel> {
    let n = graph.n();
    if params.is_zero_temperature() {
        return invalid("exact enumeration needs finite β; use bootstrap_closure at β = ∞");
    }
    let mut pins = vec![None; n];
    for &(v, s) in pinned {
        if v >= n {
            return invalid(format!("pinned vertex {v} out of range"));
        }
        if pins[v].is_some_and(|p| p != s) {
            return invalid(format!("vertex {v} pinned to two different spins"));
        }
        pins[v] = Some(s);
    }
    let free: Vec<usize> = (0..n).filter(|&v| pins[v].is_none()).collect();
    let k = free.len();
    if k > MAX_FREE_VERTICES {
        return Err(Error::SizeLimit(format!(
            "{k} free vertices, enumeration allows at most {MAX_FREE_VERTICES}"
        )));
    }
    let states = 1usize << k;
    let beta = params.beta();
    let h = params.field();
    let template = base_config(n, &pins);

    let rows: Vec<(f64, Vec<f64>)> = (0..states)
        .into_par_iter()
        .map(|x| {
            let cfg = fill(&template, &free, x);
            let energy = hamiltonian(graph, &cfg).expect("lengths match") as f64;
            let m: i64 = cfg.spins().iter().map(|s| s.value()).sum();
            let log_w = beta * (energy + h * m as f64);
            let flips = free
                .iter()
                .map(|&v| {
                    let s: i64 = graph.neighbors(v).iter().map(|&u| cfg.get(u).value()).sum();
                    let p = update_probability(s, params);
                    let to_other = if cfg.get(v) == Spin::Plus { 1.0 - p } else { p };
                    to_other / n as f64
                })
                .collect();
            (log_w, flips)
        })
        .collect();

    let max = rows.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = rows.iter().map(|r| (r.0 - max).exp()).sum();
    let log_z = max + sum.ln();
    let mu = rows.iter().map(|r| (r.0 - log_z).exp()).collect();
    let mut flip = Vec::with_capacity(states * k);
    let mut stay = Vec::with_capacity(states);
    for (_, f) in rows {
        stay.push((1.0 - f.iter().sum::<f64>()).max(0.0));
        flip.extend(f);
    }
    Ok(ExactModel {
        graph: graph.clone(),
        params,
        pinned: pins,
        free,
        mu,
        log_z,
        flip,
        stay,
    })
}

fn base_config(n: usize, pins: &[Option<Spin>]) -> SpinConfig {
    SpinConfig::new((0..n).map(|v| pins[v].unwrap_or(Spin::Minus)).collect())
}

fn fill(template: &SpinConfig, free: &[usize], x: usize) -> SpinConfig {
    let mut cfg = template.clone();
    for (i, &v) in free.iter().enumerate() {
        cfg.set(v, if (x >> i) & 1 == 1 { Spin::Plus } else { Spin::Minus });
    }
    cfg
}

impl ExactModel {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn free_vertices(&self) -> &[usize] {
        &self.free
    }

    pub fn pinned(&self) -> Vec<(usize, Spin)> {
        self.pinned
            .iter()
            .enumerate()
            .filter_map(|(v, p)| p.map(|s| (v, s)))
            .collect()
    }

    pub fn num_states(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    /// Full configuration of state `x`.
    pub fn config(&self, x: usize) -> SpinConfig {
        fill(&base_config(self.graph.n(), &self.pinned), &self.free, x)
    }

    /// State index of `config`, or `None` if it disagrees with a pin.
    pub fn index_of(&self, config: &SpinConfig) -> Option<usize> {
        if config.len() != self.graph.n() {
            return None;
        }
        if self.pinned.iter().enumerate().any(|(v, p)| p.is_some_and(|s| config.get(v) != s)) {
            return None;
        }
        Some(
            self.free
                .iter()
                .enumerate()
                .filter(|(_, &v)| config.get(v) == Spin::Plus)
                .map(|(i, _)| 1usize << i)
                .sum(),
        )
    }

    /// Number of `+1` spins in state `x`, pinned vertices included.
    pub fn plus_count(&self, x: usize) -> usize {
        self.pinned.iter().filter(|p| **p == Some(Spin::Plus)).count() + x.count_ones() as usize
    }

    pub fn magnetization(&self, x: usize) -> i64 {
        2 * self.plus_count(x) as i64 - self.graph.n() as i64
    }

    /// `P(x, x ⊕ e_i)`: probability of flipping the `i`-th free vertex.
    pub fn flip_probability(&self, x: usize, i: usize) -> f64 {
        self.flip[x * self.free.len() + i]
    }

    pub fn stay_probability(&self, x: usize) -> f64 {
        self.stay[x]
    }

    /// `P(x, y)`.
    pub fn transition(&self, x: usize, y: usize) -> f64 {
        if x == y {
            return self.stay[x];
        }
        let d = x ^ y;
        if d.count_ones() == 1 {
            self.flip_probability(x, d.trailing_zeros() as usize)
        } else {
            0.0
        }
    }

    /// Nonzero entries of row `x`, columns ascending.
    pub fn row(&self, x: usize) -> Vec<(usize, f64)> {
        let mut r: Vec<(usize, f64)> = (0..self.free.len())
            .map(|i| (x ^ (1 << i), self.flip_probability(x, i)))
            .filter(|&(_, p)| p > 0.0)
            .collect();
        if self.stay[x] > 0.0 {
            r.push((x, self.stay[x]));
        }
        r.sort_by_key(|e| e.0);
        r
    }

    /// Largest `|Σ_y P(x, y) − 1|` over rows.
    pub fn row_sum_residual(&self) -> f64 {
        let k = self.free.len();
        (0..self.num_states())
            .map(|x| {
                let s: f64 = self.flip[x * k..(x + 1) * k].iter().sum::<f64>() + self.stay[x];
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|μ(x)P(x,y) − μ(y)P(y,x)|` over all transitions.
    pub fn detailed_balance_residual(&self) -> f64 {
        let k = self.free.len();
        (0..self.num_states())
            .into_par_iter()
            .map(|x| {
                (0..k)
                    .map(|i| {
                        let y = x ^ (1 << i);
                        (self.mu[x] * self.flip_probability(x, i) - self.mu[y] * self.flip_probability(y, i)).abs()
                    })
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// One step of the chain applied to distribution `p`: returns `pP`.
    pub fn step_distribution(&self, p: &[f64]) -> Vec<f64> {
        let k = self.free.len();
        (0..self.num_states())
            .into_par_iter()
            .with_min_len(256)
            .map(|y| {
                let mut acc = p[y] * self.stay[y];
                for i in 0..k {
                    let x = y ^ (1 << i);
                    acc += p[x] * self.flip_probability(x, i);
                }
                acc
            })
            .collect()
    }

    /// `‖μP − μ‖₁`.
    pub fn stationarity_residual(&self) -> f64 {
        let mp = self.step_distribution(&self.mu);
        mp.iter().zip(&self.mu).map(|(a, b)| (a - b).abs()).sum()
    }

    /// Expected number of `+1` spins under `p`.
    pub fn expected_plus(&self, p: &[f64]) -> f64 {
        p.iter().enumerate().map(|(x, &w)| w * self.plus_count(x) as f64).sum()
    }

    /// Writes `state,probability` rows of `μ`.
    pub fn write_mu_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["state", "probability"])?;
        for (x, p) in self.mu.iter().enumerate() {
            w.write_record([x.to_string(), float(*p)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes the nonzero entries of `P` as `row,col,value` triples.
    pub fn write_transition_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row", "col", "value"])?;
        for x in 0..self.num_states() {
            for (y, p) in self.row(x) {
                w.write_record([x.to_string(), y.to_string(), float(p)])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `Φ(S) = Q(S, Sᶜ)/μ(S)` with `Q(x, y) = μ(x)P(x, y)`, for a set of state
/// indices.
pub fn bottleneck_ratio(model: &ExactModel, set: &[usize]) -> Result<f64> {
    let mut member = vec![false; model.num_states()];
    for &x in set {
        if x >= member.len() {
            return invalid(format!("state {x} out of range"));
        }
        member[x] = true;
    }
    bottleneck_ratio_mask(model, &member)
}

fn bottleneck_ratio_mask(model: &ExactModel, member: &[bool]) -> Result<f64> {
    let k = model.free.len();
    let mut mass = 0.0;
    let mut flow = 0.0;
    for (x, &inside) in member.iter().enumerate() {
        if !inside {
            continue;
        }
        mass += model.mu[x];
        for i in 0..k {
            if !member[x ^ (1 << i)] {
                flow += model.mu[x] * model.flip_probability(x, i);
            }
        }
    }
    if mass <= 0.0 {
        return Err(Error::UndefinedRatio("μ(S) = 0".into()));
    }
    Ok(flow / mass)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutRow {
    /// The cut is `S_k = {σ : plus-count(σ) ≥ k}`.
    pub k: usize,
    pub mu: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutScan {
    pub rows: Vec<CutRow>,
    /// Row with the smallest `Φ`, an upper bound on `Φ*`; `None` when no
    /// threshold cut has `0 < μ(S_k) ≤ ½`.
    pub upper_bound: Option<CutRow>,
}

/// `Φ(S_k)` for every threshold cut with `0 < μ(S_k) ≤ ½`.
pub fn magnetization_cut_scan(model: &ExactModel) -> CutScan {
    let n = model.graph.n();
    let mut rows = Vec::new();
    for k in 0..=n {
        let member: Vec<bool> = (0..model.num_states()).map(|x| model.plus_count(x) >= k).collect();
        let mu: f64 = member.iter().zip(&model.mu).filter(|(m, _)| **m).map(|(_, p)| p).sum();
        if mu <= 0.0 || mu > 0.5 {
            continue;
        }
        let phi = bottleneck_ratio_mask(model, &member).expect("positive mass");
        rows.push(CutRow { k, mu, phi });
    }
    let upper_bound = rows.iter().copied().min_by(|a, b| a.phi.total_cmp(&b.phi));
    CutScan { rows, upper_bound }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingTime {
    pub steps: u64,
    pub worst_start: usize,
    /// The cap was hit; `steps` is then a lower bound.
    pub capped: bool,
}

fn tv(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Smallest `t` with `max_x d_TV(P^t(x, ·), μ) ≤ eps`.
///
/// Each start is evolved separately; the distance from a fixed start is
/// nonincreasing in `t`, so the answer is the largest per-start first
/// passage.
pub fn tv_mixing_time(model: &ExactModel, eps: f64) -> Result<MixingTime> {
    tv_mixing_time_capped(model, eps, MIXING_STEP_CAP)
}

pub fn tv_mixing_time_capped(model: &ExactModel, eps: f64, cap: u64) -> Result<MixingTime> {
    let states = model.num_states();
    if states > MAX_MIXING_STATES {
        return Err(Error::SizeLimit(format!(
            "{states} states, mixing computation allows at most {MAX_MIXING_STATES}"
        )));
    }
    if eps.is_nan() || eps <= 0.0 {
        return invalid("eps must be positive");
    }
    if eps >= 1.0 {
        return Ok(MixingTime {
            steps: 0,
            worst_start: 0,
            capped: false,
        });
    }
    let k = model.free.len();
    let per_start: Vec<(u64, bool)> = (0..states)
        .into_par_iter()
        .map(|x0| {
            let mut p = vec![0.0; states];
            p[x0] = 1.0;
            let mut next = vec![0.0; states];
            let mut t = 0u64;
            while tv(&p, &model.mu) > eps {
                if t >= cap {
                    return (t, true);
                }
                for y in 0..states {
                    let mut acc = p[y] * model.stay[y];
                    for i in 0..k {
                        let x = y ^ (1 << i);
                        acc += p[x] * model.flip[x * k + i];
                    }
                    next[y] = acc;
                }
                std::mem::swap(&mut p, &mut next);
                t += 1;
            }
            (t, false)
        })
        .collect();
    let (worst_start, &(steps, capped)) = per_start
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.0.cmp(&a.0)))
        .expect("at least one state");
    Ok(MixingTime {
        steps,
        worst_start,
        capped,
    })
}

/// Starting law for [`t_step_expected_plus`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitDistribution {
    /// Point mass on a configuration; pinned vertices are overridden.
    Config(SpinConfig),
    AllMinus,
    AllPlus,
    /// Uniform over the free vertices.
    Uniform,
    /// The pinned chain's own stationary law.
    Stationary,
}

/// `E|{v : X̃_t^S(v) = +1}|` for the chain with `S` pinned to `+1`,
/// computed by evolving the initial law `t` steps.
pub fn t_step_expected_plus(
    graph: &Graph,
    params: ModelParams,
    pinned_plus: &[usize],
    t: u64,
    init: &InitDistribution,
) -> Result<f64> {
    let model = pinned_plus_model(graph, params, pinned_plus)?;
    expected_plus_after(&model, t, init)
}

/// The model with `set` pinned to `+1`, checked against the evolution size
/// limit.
pub fn pinned_plus_model(graph: &Graph, params: ModelParams, set: &[usize]) -> Result<ExactModel> {
    let mut pins: Vec<(usize, Spin)> = set.iter().map(|&v| (v, Spin::Plus)).collect();
    pins.sort_unstable();
    pins.dedup();
    let free = graph.n().saturating_sub(pins.len());
    if free > MAX_EVOLVE_FREE_VERTICES {
        return Err(Error::SizeLimit(format!(
            "{free} free vertices, evolution allows at most {MAX_EVOLVE_FREE_VERTICES}"
        )));
    }
    enumerate_model(graph, params, &pins)
}

/// Expected `+1` count after `t` steps from `init` on an existing model.
pub fn expected_plus_after(model: &ExactModel, t: u64, init: &InitDistribution) -> Result<f64> {
    let states = model.num_states();
    let n = model.graph.n();
    let mut p = vec![0.0; states];
    match init {
        InitDistribution::Stationary => return Ok(model.expected_plus(&model.mu)),
        InitDistribution::Uniform => p.iter_mut().for_each(|w| *w = 1.0 / states as f64),
        InitDistribution::AllMinus => p[0] = 1.0,
        InitDistribution::AllPlus => p[states - 1] = 1.0,
        InitDistribution::Config(c) => {
            if c.len() != n {
                return Err(Error::Dimension("initial configuration length".into()));
            }
            let mut c = c.clone();
            for (v, s) in model.pinned() {
                c.set(v, s);
            }
            p[model.index_of(&c).expect("pins applied")] = 1.0;
        }
    }
    for _ in 0..t {
        p = model.step_distribution(&p);
    }
    Ok(model.expected_plus(&p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZRatio {
    pub log_z: f64,
    pub log_z_pinned: f64,
    /// `Z̃ ≤ Z`.
    pub pinned_below_full: bool,
    /// `Z ≤ 2^{|A|} e^{Δβ|A|} Z̃` with `Δ` the maximum degree.
    pub degree_bound_ok: bool,
    /// `Z ≤ 2^{|A|} e^{2β(Δ + |h|)|A|} Z̃`, which holds for every graph since
    /// changing one spin moves `H + h·m` by at most `2(Δ + |h|)`.
    pub rigorous_bound_ok: bool,
}

/// Compares the partition function with the one restricted to configurations
/// agreeing with `pattern` on `set`. Comparisons allow `1e−12` of rounding in
/// log space.
pub fn z_ratio_check(graph: &Graph, params: ModelParams, set: &[usize], pattern: &[Spin]) -> Result<ZRatio> {
    if set.len() != pattern.len() {
        return invalid("pattern length must equal the set size");
    }
    let full = enumerate_model(graph, params, &[])?;
    let pins: Vec<(usize, Spin)> = set.iter().copied().zip(pattern.iter().copied()).collect();
    let pinned = enumerate_model(graph, params, &pins)?;
    let a = set.len() as f64;
    let beta = params.beta();
    let delta = graph.max_degree() as f64;
    let base = a * std::f64::consts::LN_2 + pinned.log_z;
    let tol = 1e-12;
    Ok(ZRatio {
        log_z: full.log_z,
        log_z_pinned: pinned.log_z,
        pinned_below_full: pinned.log_z <= full.log_z + tol,
        degree_bound_ok: full.log_z <= base + delta * beta * a + tol,
        rigorous_bound_ok: full.log_z <= base + 2.0 * beta * (delta + params.field().abs()) * a + tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{generate_complete, generate_grid, generate_grid_rect, generate_path, Graph};

    fn edge() -> Graph {
        Graph::with_edges(2, &[(0, 1)]).unwrap()
    }

    fn beta(b: f64) -> ModelParams {
        ModelParams::zero_field(b).unwrap()
    }

    #[test]
    fn single_edge_measures() {
        let m = enumerate_model(&edge(), beta(0.0), &[]).unwrap();
        assert!(m.mu().iter().all(|&p| (p - 0.25).abs() < 1e-15));
        assert!((m.log_z() - 4f64.ln()).abs() < 1e-15);

        let e = std::f64::consts::E;
        let m = enumerate_model(&edge(), beta(1.0), &[]).unwrap();
        let pp = m.mu()[3];
        assert!((pp - e / (2.0 * e + 2.0 / e)).abs() < 1e-12);
        assert!((pp - 0.440_398_5).abs() < 1e-7);

        let m = enumerate_model(&edge(), beta(1.0), &[(0, Spin::Plus)]).unwrap();
        assert_eq!(m.free_vertices(), &[1]);
        assert!((m.mu()[1] - 0.880_797_1).abs() < 1e-7);
    }

    #[test]
    fn state_order_is_documented() {
        let g = generate_path(3).unwrap();
        let m = enumerate_model(&g, beta(0.3), &[(1, Spin::Minus)]).unwrap();
        assert_eq!(m.free_vertices(), &[0, 2]);
        let c = m.config(0b10);
        assert_eq!(c.spins(), &[Spin::Minus, Spin::Minus, Spin::Plus]);
        assert_eq!(m.index_of(&c), Some(0b10));
        assert_eq!(m.index_of(&SpinConfig::uniform(3, Spin::Plus)), None);
    }

    #[test]
    fn reversibility_and_stationarity() {
        let graphs = [edge(), generate_grid_rect(2, 3).unwrap(), generate_grid(3).unwrap()];
        for g in &graphs {
            for &b in &[0.0, 0.5, 1.0, 2.0] {
                for h in [0.0, 0.7] {
                    let p = ModelParams::new(b, h).unwrap();
                    let m = enumerate_model(g, p, &[(0, Spin::Minus)]).unwrap();
                    assert!(m.detailed_balance_residual() < 1e-12);
                    assert!(m.row_sum_residual() < 1e-12);
                    assert!(m.stationarity_residual() < 1e-10);
                    assert!((m.mu().iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rejects_infinite_beta_and_large_instances() {
        assert!(enumerate_model(&edge(), ModelParams::zero_temperature(), &[]).is_err());
        let g = generate_complete(21).unwrap();
        assert!(matches!(enumerate_model(&g, beta(0.1), &[]), Err(Error::SizeLimit(_))));
    }

    #[test]
    fn bottleneck_examples() {
        let single = Graph::with_edges(1, &[]).unwrap();
        for b in [0.0, 1.0, 5.0] {
            let m = enumerate_model(&single, beta(b), &[]).unwrap();
            assert!((bottleneck_ratio(&m, &[1]).unwrap() - 0.5).abs() < 1e-15);
        }
        let m = enumerate_model(&edge(), beta(1.0), &[]).unwrap();
        assert_eq!(bottleneck_ratio(&m, &[0, 1, 2, 3]).unwrap(), 0.0);
        let brute = m.transition(3, 1) + m.transition(3, 2);
        assert!((bottleneck_ratio(&m, &[3]).unwrap() - brute).abs() < 1e-15);
        let direct = (-2f64).exp() / (1.0 + (-2f64).exp());
        assert!((brute - direct).abs() < 1e-15);
        assert!(matches!(bottleneck_ratio(&m, &[]), Err(Error::UndefinedRatio(_))));
    }

    fn binom(n: u64, k: u64) -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    }

    #[test]
    fn beta_zero_cut_scan_matches_hypercube() {
        let g = generate_grid_rect(2, 3).unwrap();
        let n = 6u64;
        let m = enumerate_model(&g, beta(0.0), &[]).unwrap();
        let scan = magnetization_cut_scan(&m);
        assert!(!scan.rows.is_empty());
        for row in &scan.rows {
            let k = row.k as u64;
            let tail: f64 = (k..=n).map(|j| binom(n, j)).sum();
            let expected = binom(n, k) * k as f64 / (2.0 * n as f64) / tail;
            assert!((row.phi - expected).abs() < 1e-10, "k = {k}");
        }
    }

    #[test]
    fn four_cycle_minimum_is_the_positive_magnetization_cut() {
        let g = generate_grid(2).unwrap();
        let m = enumerate_model(&g, beta(2.0), &[]).unwrap();
        let scan = magnetization_cut_scan(&m);
        assert_eq!(scan.upper_bound.unwrap().k, 3);
    }

    #[test]
    fn bottleneck_deepens_with_beta() {
        let g = generate_complete(4).unwrap();
        let cold = magnetization_cut_scan(&enumerate_model(&g, beta(3.0), &[]).unwrap());
        let hot = magnetization_cut_scan(&enumerate_model(&g, beta(0.1), &[]).unwrap());
        assert!(cold.upper_bound.unwrap().phi < hot.upper_bound.unwrap().phi);
    }

    #[test]
    fn mixing_times() {
        let single = Graph::with_edges(1, &[]).unwrap();
        let m = enumerate_model(&single, beta(0.0), &[]).unwrap();
        assert_eq!(tv_mixing_time(&m, 0.25).unwrap().steps, 1);
        assert_eq!(tv_mixing_time(&m, 1.0).unwrap().steps, 0);
        let slow = tv_mixing_time(&enumerate_model(&edge(), beta(2.0), &[]).unwrap(), 0.25).unwrap();
        let fast = tv_mixing_time(&enumerate_model(&edge(), beta(0.1), &[]).unwrap(), 0.25).unwrap();
        assert!(slow.steps > fast.steps);
        let capped = tv_mixing_time_capped(&enumerate_model(&edge(), beta(2.0), &[]).unwrap(), 1e-6, 3).unwrap();
        assert!(capped.capped);
    }

    #[test]
    fn t_step_trivial_values() {
        let g = generate_path(4).unwrap();
        let p = ModelParams::new(1.0, 2.0).unwrap();
        assert_eq!(t_step_expected_plus(&g, p, &[], 0, &InitDistribution::AllMinus).unwrap(), 0.0);
        assert_eq!(t_step_expected_plus(&g, p, &[1, 3], 0, &InitDistribution::AllMinus).unwrap(), 2.0);
    }

    #[test]
    fn z_ratio_examples() {
        let r = z_ratio_check(&edge(), beta(1.0), &[], &[]).unwrap();
        assert_eq!(r.log_z, r.log_z_pinned);
        let e = std::f64::consts::E;
        let r = z_ratio_check(&edge(), beta(1.0), &[0], &[Spin::Plus]).unwrap();
        assert!((r.log_z_pinned - (e + 1.0 / e).ln()).abs() < 1e-12);
        assert!((r.log_z - (2.0 * e + 2.0 / e).ln()).abs() < 1e-12);
        assert!(r.pinned_below_full && r.degree_bound_ok && r.rigorous_bound_ok);
    }

    #[test]
    fn csv_export_has_headers() {
        let m = enumerate_model(&edge(), beta(1.0), &[]).unwrap();
        let mut buf = Vec::new();
        m.write_mu_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("state,probability\n0,"));
        assert_eq!(s.lines().count(), 5);
        let mut buf = Vec::new();
        m.write_transition_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("row,col,value\n"));
        assert_eq!(s.lines().count(), 1 + 4 * 3);
    }
}
