use serde::{Deserialize, Serialize};

use super::engine::{heat_bath, InitialState, Kernel};
use super::policy::CorruptionSpec;
use crate::error::{invalid, Error, Result};
use crate::graphs::Graph;
use crate::ising::{local_rule_with_field, ModelParams, Spin, SpinConfig};
use crate::rng::StreamRng;

fn pins_of(spec: Option<&CorruptionSpec>, n: usize) -> Result<Vec<Option<Spin>>> {
    let mut pins = vec![None; n];
    if let Some(spec) = spec {
        let Some(list) = spec.pinned_spins() else {
            return invalid(format!("coupled runs need a pin policy, got `{}`", spec.policy().name()));
        };
        if spec.select_free_only() {
            return invalid("coupled runs select from all vertices; free-only selection is not supported");
        }
        for (v, s) in list {
            pins[v] = Some(s);
        }
    }
    Ok(pins)
}

fn apply_pins(config: &mut SpinConfig, pins: &[Option<Spin>]) {
    for (v, p) in pins.iter().enumerate() {
        if let Some(s) = p {
            config.set(v, *s);
        }
    }
}

/// Difference-set sizes of an identity-coupled pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifferenceRun {
    /// `(t, |D_t|)` at time 0, every `thinning` steps and at the end.
    pub samples: Vec<(u64, usize)>,
    /// Maximum of `|D_t|` over every step, not only sampled ones.
    pub max_difference: usize,
    pub steps: u64,
}

/// Runs the standard chain and the `spec`-corrupted chain from the same
/// start with the same vertex and threshold each step, tracking
/// `D_t = {v ∉ A : X_t(v) ≠ X̃_t(v)}`.
pub fn coupled_difference_run(
    graph: &Graph,
    params: ModelParams,
    spec: &CorruptionSpec,
    init: &InitialState,
    steps: u64,
    mut rng: StreamRng,
    thinning: u64,
) -> Result<DifferenceRun> {
    let n = graph.n();
    if spec.vertices().len() >= n {
        return invalid("the corrupted set must leave at least one free vertex");
    }
    let pins = pins_of(Some(spec), n)?;
    let mask = spec.mask(n);
    let kernel = Kernel::new(graph, params);
    let mut x = init.realize(n, &mut rng)?;
    let mut y = x.clone();
    apply_pins(&mut y, &pins);
    let mut mx: i64 = x.spins().iter().map(|s| s.value()).sum();
    let mut my: i64 = y.spins().iter().map(|s| s.value()).sum();
    let mut diff = (0..n).filter(|&v| !mask[v] && x.get(v) != y.get(v)).count();
    let thinning = thinning.max(1);
    let mut samples = vec![(0, diff)];
    let mut max_difference = diff;
    for t in 1..=steps {
        let v = rng.index(n);
        let u = rng.uniform();
        let before = x.get(v) != y.get(v);
        let nx = heat_bath(kernel.prob(kernel.neighbor_sum(graph, &x, mx, v)), u);
        mx += nx.value() - x.get(v).value();
        x.set(v, nx);
        let ny = match pins[v] {
            Some(p) => p,
            None => heat_bath(kernel.prob(kernel.neighbor_sum(graph, &y, my, v)), u),
        };
        my += ny.value() - y.get(v).value();
        y.set(v, ny);
        if !mask[v] {
            let after = nx != ny;
            if after && !before {
                diff += 1;
            } else if before && !after {
                diff -= 1;
            }
        }
        max_difference = max_difference.max(diff);
        if t % thinning == 0 || t == steps {
            samples.push((t, diff));
        }
    }
    Ok(DifferenceRun {
        samples,
        max_difference,
        steps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonotoneSample {
    pub time: u64,
    pub magnetization_upper: i64,
    pub magnetization_lower: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonotoneRun {
    pub samples: Vec<MonotoneSample>,
    pub final_upper: SpinConfig,
    pub final_lower: SpinConfig,
}

/// Runs two pin-corrupted chains with the same vertex and threshold each
/// step and checks `σ¹_t ≥ σ²_t` pointwise after every step. Pins must be
/// compatible with the order: a vertex pinned `−1` in the upper chain must
/// be pinned `−1` in the lower one, and a vertex pinned `+1` in the lower
/// chain must be pinned `+1` in the upper one.
#[allow(clippy::too_many_arguments)]
pub fn monotone_coupled_run(
    graph: &Graph,
    params: ModelParams,
    upper_spec: Option<&CorruptionSpec>,
    lower_spec: Option<&CorruptionSpec>,
    upper_init: &SpinConfig,
    lower_init: &SpinConfig,
    steps: u64,
    mut rng: StreamRng,
    thinning: u64,
) -> Result<MonotoneRun> {
    let n = graph.n();
    if upper_init.len() != n || lower_init.len() != n {
        return Err(Error::Dimension("initial configurations must match the graph".into()));
    }
    let up_pins = pins_of(upper_spec, n)?;
    let low_pins = pins_of(lower_spec, n)?;
    for v in 0..n {
        match (up_pins[v], low_pins[v]) {
            (Some(Spin::Minus), p) if p != Some(Spin::Minus) => {
                return invalid(format!("vertex {v} is pinned −1 in the upper chain only"));
            }
            (p, Some(Spin::Plus)) if p != Some(Spin::Plus) => {
                return invalid(format!("vertex {v} is pinned +1 in the lower chain only"));
            }
            _ => {}
        }
    }
    let mut x = upper_init.clone();
    let mut y = lower_init.clone();
    apply_pins(&mut x, &up_pins);
    apply_pins(&mut y, &low_pins);
    if !x.dominates(&y) {
        return Err(Error::InvariantViolation {
            step: 0,
            detail: "initial configurations are not ordered".into(),
        });
    }
    let kernel = Kernel::new(graph, params);
    let mut mx: i64 = x.spins().iter().map(|s| s.value()).sum();
    let mut my: i64 = y.spins().iter().map(|s| s.value()).sum();
    let thinning = thinning.max(1);
    let mut samples = vec![MonotoneSample {
        time: 0,
        magnetization_upper: mx,
        magnetization_lower: my,
    }];
    for t in 1..=steps {
        let v = rng.index(n);
        let u = rng.uniform();
        let nx = up_pins[v].unwrap_or_else(|| heat_bath(kernel.prob(kernel.neighbor_sum(graph, &x, mx, v)), u));
        let ny = low_pins[v].unwrap_or_else(|| heat_bath(kernel.prob(kernel.neighbor_sum(graph, &y, my, v)), u));
        mx += nx.value() - x.get(v).value();
        my += ny.value() - y.get(v).value();
        x.set(v, nx);
        y.set(v, ny);
        if nx < ny {
            return Err(Error::InvariantViolation {
                step: t,
                detail: format!("order broken at vertex {v}: upper {nx:?}, lower {ny:?}"),
            });
        }
        if t % thinning == 0 || t == steps {
            samples.push(MonotoneSample {
                time: t,
                magnetization_upper: mx,
                magnetization_lower: my,
            });
        }
    }
    Ok(MonotoneRun {
        samples,
        final_upper: x,
        final_lower: y,
    })
}

/// Which vertices the four-chain coupling draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FourChainSelection {
    /// `V ∖ (S ∪ T)`, so no chain ever selects a pinned vertex.
    #[default]
    FreeOfUnion,
    /// All of `V`; pinned vertices keep `+1` when selected.
    AllVertices,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationPolicy {
    /// Stop at the first inclusion violation.
    #[default]
    Error,
    /// Count violations and keep going.
    Count,
}

#[derive(Debug, Clone, Default)]
pub struct FourChainOptions {
    pub selection: FourChainSelection,
    pub on_violation: ViolationPolicy,
    pub thinning: u64,
    /// Common start on the free vertices; `None` means all `−1`.
    pub init: Option<SpinConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FourChainSample {
    pub time: u64,
    /// `+1` counts of the chains pinned on `S∩T`, `S`, `T`, `S∪T`.
    pub plus_counts: [usize; 4],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FourChainRun {
    pub samples: Vec<FourChainSample>,
    pub violations: u64,
    pub first_violation: Option<u64>,
    /// Minimum over all steps of `|B_t| + |C_t| − |A_t| − |D_t|`.
    pub min_count_slack: i64,
    pub steps: u64,
}

/// The four-chain coupling for `S∩T`, `S`, `T`, `S∪T` pinned to `+1`.
///
/// One vertex and one threshold `θ` are shared. The `S∩T` and `S` chains
/// set `+1` iff `θ < f(A)` resp. `θ < f(B)`; the `T` chain iff `θ < f(A)` or
/// `1 − θ < f(C) − f(A)`; the `S∪T` chain iff `θ < f(B)` or
/// `1 − θ < f(D) − f(B)`, where `f` is the local rule with field evaluated at
/// each chain's `+1` neighbour count. The inclusions `A ⊆ B ∩ C` and
/// `D ⊆ B ∪ C` are audited after every step.
pub fn four_chain_coupled_run(
    graph: &Graph,
    params: ModelParams,
    s: &[usize],
    t: &[usize],
    steps: u64,
    mut rng: StreamRng,
    options: &FourChainOptions,
) -> Result<FourChainRun> {
    let n = graph.n();
    if params.field() < graph.max_degree() as f64 {
        return invalid(format!(
            "the four-chain coupling needs h ≥ max degree {}, got {}",
            graph.max_degree(),
            params.field()
        ));
    }
    let mut in_s = vec![false; n];
    let mut in_t = vec![false; n];
    for &v in s {
        if v >= n {
            return invalid(format!("vertex {v} out of range"));
        }
        in_s[v] = true;
    }
    for &v in t {
        if v >= n {
            return invalid(format!("vertex {v} out of range"));
        }
        in_t[v] = true;
    }
    let pinned: [Vec<bool>; 4] = [
        (0..n).map(|v| in_s[v] && in_t[v]).collect(),
        in_s.clone(),
        in_t.clone(),
        (0..n).map(|v| in_s[v] || in_t[v]).collect(),
    ];
    let candidates: Vec<usize> = match options.selection {
        FourChainSelection::FreeOfUnion => (0..n).filter(|&v| !pinned[3][v]).collect(),
        FourChainSelection::AllVertices => (0..n).collect(),
    };
    if candidates.is_empty() {
        return invalid("no vertex is available for selection");
    }
    let start = match &options.init {
        Some(c) if c.len() != n => return Err(Error::Dimension("initial configuration length".into())),
        Some(c) => c.spins().iter().map(|&s| s == Spin::Plus).collect(),
        None => vec![false; n],
    };
    let mut chains: [Vec<bool>; 4] = std::array::from_fn(|i| (0..n).map(|v| start[v] || pinned[i][v]).collect());
    let mut counts: [usize; 4] = std::array::from_fn(|i| chains[i].iter().filter(|&&b| b).count());
    let degrees = graph.degrees();
    let f = |k: usize, v: usize| local_rule_with_field(k, degrees[v], params);

    let thinning = options.thinning.max(1);
    let mut samples = vec![FourChainSample {
        time: 0,
        plus_counts: counts,
    }];
    let mut violations = 0u64;
    let mut first_violation = None;
    let slack = |c: &[usize; 4]| c[1] as i64 + c[2] as i64 - c[0] as i64 - c[3] as i64;
    let mut min_count_slack = slack(&counts);

    let initial_ok = (0..n).all(|v| inclusions_hold(&chains, v));
    if !initial_ok {
        violations += 1;
        first_violation = Some(0);
        if options.on_violation == ViolationPolicy::Error {
            return Err(Error::InvariantViolation {
                step: 0,
                detail: "initial configurations violate the inclusions".into(),
            });
        }
    }

    for step in 1..=steps {
        let v = candidates[rng.index(candidates.len())];
        let theta = rng.uniform();
        let k: [usize; 4] =
            std::array::from_fn(|i| graph.neighbors(v).iter().filter(|&&u| chains[i][u]).count());
        let fa = f(k[0], v)?;
        let fb = f(k[1], v)?;
        let fc = f(k[2], v)?;
        let fd = f(k[3], v)?;
        let proposal = [
            theta < fa,
            theta < fb,
            theta < fa || 1.0 - theta < fc - fa,
            theta < fb || 1.0 - theta < fd - fb,
        ];
        for i in 0..4 {
            let new = pinned[i][v] || proposal[i];
            if new != chains[i][v] {
                if new {
                    counts[i] += 1;
                } else {
                    counts[i] -= 1;
                }
                chains[i][v] = new;
            }
        }
        min_count_slack = min_count_slack.min(slack(&counts));
        if !inclusions_hold(&chains, v) {
            violations += 1;
            first_violation.get_or_insert(step);
            if options.on_violation == ViolationPolicy::Error {
                return Err(Error::InvariantViolation {
                    step,
                    detail: format!(
                        "inclusion broken at vertex {v}: chains (S∩T, S, T, S∪T) = {:?}, θ = {theta}, f = {:?}",
                        [chains[0][v], chains[1][v], chains[2][v], chains[3][v]],
                        [fa, fb, fc, fd]
                    ),
                });
            }
        }
        if step % thinning == 0 || step == steps {
            samples.push(FourChainSample {
                time: step,
                plus_counts: counts,
            });
        }
    }
    Ok(FourChainRun {
        samples,
        violations,
        first_violation,
        min_count_slack,
        steps,
    })
}

fn inclusions_hold(chains: &[Vec<bool>; 4], v: usize) -> bool {
    let (a, b, c, d) = (chains[0][v], chains[1][v], chains[2][v], chains[3][v]);
    (!a || (b && c)) && (!d || b || c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{generate_grid, generate_path, generate_random_regular};

    #[test]
    fn beta_zero_difference_is_zero() {
        let g = generate_random_regular(20, 4, 1).unwrap();
        let spec = CorruptionSpec::pin_minus(20, vec![0, 1, 2]).unwrap();
        let p = ModelParams::zero_field(0.0).unwrap();
        let r = coupled_difference_run(&g, p, &spec, &InitialState::IidUniform, 5000, StreamRng::new(3, 0), 20).unwrap();
        assert_eq!(r.max_difference, 0);
        assert_eq!(r.samples[0], (0, 0));
    }

    #[test]
    fn difference_starts_at_zero() {
        let g = generate_grid(4).unwrap();
        let spec = CorruptionSpec::pin_minus(16, vec![0]).unwrap();
        let p = ModelParams::zero_field(1.0).unwrap();
        let r = coupled_difference_run(&g, p, &spec, &InitialState::AllPlus, 100, StreamRng::new(1, 0), 10).unwrap();
        assert_eq!(r.samples[0].1, 0);
        assert!(r.samples.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn monotone_identical_specs_give_identical_chains() {
        let g = generate_grid(3).unwrap();
        let spec = CorruptionSpec::pin_minus(9, vec![4]).unwrap();
        let init = SpinConfig::uniform(9, Spin::Plus);
        let p = ModelParams::zero_field(0.7).unwrap();
        let r = monotone_coupled_run(&g, p, Some(&spec), Some(&spec), &init, &init, 10_000, StreamRng::new(2, 0), 9)
            .unwrap();
        assert_eq!(r.final_upper, r.final_lower);
        assert!(r.samples.iter().all(|s| s.magnetization_upper == s.magnetization_lower));
    }

    #[test]
    fn monotone_rejects_incompatible_pins() {
        let g = generate_path(3).unwrap();
        let upper = CorruptionSpec::pin_minus(3, vec![0]).unwrap();
        let init = SpinConfig::uniform(3, Spin::Plus);
        let p = ModelParams::zero_field(1.0).unwrap();
        assert!(monotone_coupled_run(&g, p, Some(&upper), None, &init, &init, 10, StreamRng::new(0, 0), 1).is_err());
    }

    #[test]
    fn four_chain_equal_sets_give_equal_chains() {
        let g = generate_path(5).unwrap();
        let p = ModelParams::new(1.0, 2.0).unwrap();
        let opts = FourChainOptions {
            thinning: 1,
            ..Default::default()
        };
        let r = four_chain_coupled_run(&g, p, &[1, 3], &[1, 3], 2000, StreamRng::new(4, 0), &opts).unwrap();
        assert_eq!(r.violations, 0);
        for s in &r.samples {
            let c = s.plus_counts;
            assert!(c.iter().all(|&x| x == c[0]));
        }
    }

    #[test]
    fn four_chain_needs_strong_field() {
        let g = generate_path(5).unwrap();
        let p = ModelParams::new(1.0, 1.0).unwrap();
        assert!(four_chain_coupled_run(&g, p, &[0], &[4], 10, StreamRng::new(0, 0), &Default::default()).is_err());
    }

    #[test]
    fn four_chain_all_vertex_selection() {
        let g = generate_path(5).unwrap();
        let p = ModelParams::new(0.5, 2.0).unwrap();
        let opts = FourChainOptions {
            selection: FourChainSelection::AllVertices,
            on_violation: ViolationPolicy::Count,
            thinning: 100,
            init: None,
        };
        let r = four_chain_coupled_run(&g, p, &[0, 1], &[1, 4], 20_000, StreamRng::new(8, 0), &opts).unwrap();
        assert_eq!(r.violations, 0);
        assert!(r.min_count_slack >= 0);
    }
}
