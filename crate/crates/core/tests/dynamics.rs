use std::any::Any;
use std::sync::Arc;

use corrupted_glauber::dynamics::{
    corrupted_step, coupled_difference_run, four_chain_coupled_run, glauber_step, monotone_coupled_run, run,
    run_observed, AdversaryState, ChainState, CorruptionSpec, ExternalPolicy, FourChainOptions, InitialState,
    OscillatorSpec, Phase, Policy, RunOptions, Simulation, StopReason, StopRule,
};
use corrupted_glauber::exact::enumerate_model;
use corrupted_glauber::graphs::{
    generate_complete, generate_grid, generate_grid_rect, generate_path, generate_random_regular, grid_boundary,
    grid_diagonal, grid_index, Graph,
};
use corrupted_glauber::rng::StreamRng;
use corrupted_glauber::{Error, ModelParams, Result, Spin, SpinConfig};
use proptest::prelude::*;

fn edge() -> Graph {
    Graph::with_edges(2, &[(0, 1)]).unwrap()
}

/// Occupation frequencies of every configuration over `steps` steps, indexed
/// like the exact model's states over the free vertices.
fn occupation(graph: &Graph, params: ModelParams, spec: Option<CorruptionSpec>, steps: u64, seed: u64) -> Vec<f64> {
    let n = graph.n();
    let free: Vec<usize> = match &spec {
        Some(s) => (0..n).filter(|v| !s.vertices().contains(v)).collect(),
        None => (0..n).collect(),
    };
    let mut counts = vec![0u64; 1 << free.len()];
    let mut sim = Simulation::new(
        graph,
        params,
        spec,
        &InitialState::AllMinus,
        StreamRng::new(seed, 0),
        &RunOptions::default(),
    )
    .unwrap();
    sim.run_until(&[StopRule::MaxSteps(steps)], u64::MAX, |s, _| {
        let idx = free
            .iter()
            .enumerate()
            .filter(|(_, &v)| s.config().get(v) == Spin::Plus)
            .fold(0usize, |acc, (i, _)| acc | 1 << i);
        counts[idx] += 1;
    })
    .unwrap();
    counts.iter().map(|&c| c as f64 / steps as f64).collect()
}

fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[test]
fn zero_beta_updates_are_fair_coins() {
    let g = generate_grid(4).unwrap();
    let mut state = ChainState::new(SpinConfig::uniform(16, Spin::Plus), StreamRng::new(3, 0));
    let params = ModelParams::zero_field(0.0).unwrap();
    let steps = 100_000;
    let plus = (0..steps).filter(|_| glauber_step(&mut state, &g, params).new == Spin::Plus).count();
    assert!((plus as f64 / steps as f64 - 0.5).abs() < 0.01);
}

#[test]
fn all_plus_grid_is_absorbing_at_zero_temperature() {
    let g = generate_grid(5).unwrap();
    let start = SpinConfig::uniform(25, Spin::Plus);
    let mut state = ChainState::new(start.clone(), StreamRng::new(1, 0));
    for _ in 0..10_000 {
        glauber_step(&mut state, &g, ModelParams::zero_temperature());
    }
    assert_eq!(state.config, start);
    assert_eq!(state.time, 10_000);
}

#[test]
fn single_edge_occupation_matches_closed_form() {
    let freq = occupation(&edge(), ModelParams::zero_field(1.0).unwrap(), None, 10_000_000, 11);
    let e2 = 1f64.exp().powi(2);
    assert!((freq[3] - e2 / (2.0 * e2 + 2.0)).abs() < 0.005, "{freq:?}");
}

#[test]
fn pin_minus_keeps_selected_vertex() {
    let g = edge();
    let spec = CorruptionSpec::pin_minus(2, vec![0]).unwrap();
    let mut adv = AdversaryState::new(Some(&spec), false);
    let mut state = ChainState::new(SpinConfig::from_values(&[-1, 1]).unwrap(), StreamRng::new(0, 0));
    let params = ModelParams::zero_field(1.0).unwrap();
    for _ in 0..200 {
        let e = corrupted_step(&mut state, &spec, &mut adv, &g, params).unwrap();
        if e.vertex == 0 {
            assert!(e.corrupted_site);
            assert_eq!(e.new, Spin::Minus);
        }
        assert_eq!(state.config.get(0), Spin::Minus);
    }
    assert_eq!(state.time, 200);
}

#[test]
fn free_vertex_between_plus_pins() {
    let g = generate_path(3).unwrap();
    let spec = CorruptionSpec::pin_plus(3, vec![0, 2]).unwrap();
    let freq = occupation(&g, ModelParams::zero_field(1.0).unwrap(), Some(spec), 10_000_000, 5);
    let p = 1.0 / (1.0 + (-4f64).exp());
    assert!((freq[1] - p).abs() < 0.005, "{freq:?} vs {p}");
    assert!((p - 0.982_013_790_037_908_4).abs() < 1e-12);
}

#[test]
fn stationary_occupation_matches_enumeration() {
    let g = generate_grid_rect(2, 3).unwrap();
    for beta in [0.5, 1.0] {
        let params = ModelParams::zero_field(beta).unwrap();
        let model = enumerate_model(&g, params, &[]).unwrap();
        let freq = occupation(&g, params, None, 10_000_000, 21);
        assert!(tv(&freq, model.mu()) < 0.02, "β = {beta}: TV {}", tv(&freq, model.mu()));
        assert!(model.detailed_balance_residual() < 1e-12);
    }
    let pinned = CorruptionSpec::pin_minus(6, vec![0]).unwrap();
    let params = ModelParams::new(0.7, 0.3).unwrap();
    let model = enumerate_model(&g, params, &[(0, Spin::Minus)]).unwrap();
    let freq = occupation(&g, params, Some(pinned), 10_000_000, 22);
    assert!(tv(&freq, model.mu()) < 0.02);
}

#[test]
fn oscillator_flips_corrupted_set_at_threshold() {
    let n = 9;
    let g = generate_complete(n).unwrap();
    let osc = OscillatorSpec {
        up_threshold: 3,
        down_threshold: -3,
        observed: None,
    };
    let spec = CorruptionSpec::new(n, vec![0, 1, 2], Policy::Oscillator(osc)).unwrap();
    let opts = RunOptions {
        trace_adversary: true,
        ..Default::default()
    };
    let mut sim = Simulation::new(
        &g,
        ModelParams::zero_field(0.3).unwrap(),
        Some(spec),
        &InitialState::IidUniform,
        StreamRng::new(2, 0),
        &opts,
    )
    .unwrap();
    let mut switches = 0;
    for _ in 0..20_000 {
        let before = sim.adversary().phase;
        let e = sim.step().unwrap();
        let m = sim.restricted_magnetization();
        let after = sim.adversary().phase;
        if before != after {
            switches += 1;
            assert!(e.rewrote);
            match after {
                Phase::Minus => assert!(m >= 3),
                Phase::Plus => assert!(m <= -3),
            }
        }
        for v in 0..3 {
            assert_eq!(sim.config().get(v), after.spin());
        }
    }
    assert!(switches > 0);
    assert_eq!(sim.adversary().switches, switches);
    assert_eq!(sim.adversary().trace.as_ref().unwrap().len() as u64, switches);
}

#[derive(Debug)]
struct OffSet;

impl ExternalPolicy for OffSet {
    fn site_spin(&self, _v: usize, _config: &SpinConfig, _time: u64, _state: &mut dyn Any) -> Spin {
        Spin::Minus
    }

    fn rewrite(&self, _config: &SpinConfig, _time: u64, _state: &mut dyn Any) -> Vec<(usize, Spin)> {
        vec![(4, Spin::Minus)]
    }
}

#[test]
fn external_policy_off_the_set_is_a_contract_violation() {
    let g = generate_path(5).unwrap();
    let spec = CorruptionSpec::new(5, vec![0], Policy::External(Arc::new(OffSet))).unwrap();
    let r = Simulation::new(
        &g,
        ModelParams::zero_field(1.0).unwrap(),
        Some(spec),
        &InitialState::AllPlus,
        StreamRng::new(0, 0),
        &RunOptions::default(),
    );
    assert!(matches!(r.err(), Some(Error::ContractViolation(_))));
}

#[test]
fn diagonal_pinned_small_grid_reaches_all_minus() {
    let g = generate_grid(3).unwrap();
    let spec = CorruptionSpec::pin_minus(9, grid_diagonal(3)).unwrap();
    let tr = run(
        &g,
        ModelParams::zero_temperature(),
        Some(spec),
        &InitialState::AllPlus,
        &[StopRule::HitConfig(SpinConfig::uniform(9, Spin::Minus)), StopRule::MaxSteps(10_000_000)],
        StreamRng::new(4, 0),
        &RunOptions::default(),
    )
    .unwrap();
    assert_eq!(tr.stop_reason, StopReason::HitConfig);
    assert_eq!(tr.final_config, SpinConfig::uniform(9, Spin::Minus));
}

#[test]
fn two_corner_pins_never_reach_all_minus() {
    let g = generate_grid(3).unwrap();
    let corners = vec![grid_index(3, 1, 1), grid_index(3, 3, 3)];
    let spec = CorruptionSpec::pin_minus(9, corners).unwrap();
    let tr = run(
        &g,
        ModelParams::zero_temperature(),
        Some(spec),
        &InitialState::AllPlus,
        &[StopRule::HitConfig(SpinConfig::uniform(9, Spin::Minus)), StopRule::MaxSteps(1_000_000)],
        StreamRng::new(4, 0),
        &RunOptions::default(),
    )
    .unwrap();
    assert_eq!(tr.stop_reason, StopReason::MaxSteps);
}

#[test]
fn adjacent_side_centres_close_the_three_by_three_grid() {
    let g = generate_grid(3).unwrap();
    let spec = CorruptionSpec::pin_minus(9, vec![grid_index(3, 1, 2), grid_index(3, 2, 3)]).unwrap();
    let tr = run(
        &g,
        ModelParams::zero_temperature(),
        Some(spec),
        &InitialState::AllPlus,
        &[StopRule::HitConfig(SpinConfig::uniform(9, Spin::Minus)), StopRule::MaxSteps(10_000_000)],
        StreamRng::new(8, 0),
        &RunOptions::default(),
    )
    .unwrap();
    assert_eq!(tr.stop_reason, StopReason::HitConfig);
}

#[test]
fn zero_step_run_returns_initial_configuration() {
    let g = generate_grid(3).unwrap();
    let init = SpinConfig::from_values(&[1, -1, 1, -1, 1, -1, 1, -1, 1]).unwrap();
    let tr = run(
        &g,
        ModelParams::zero_field(1.0).unwrap(),
        None,
        &InitialState::Config(init.clone()),
        &[StopRule::MaxSteps(0)],
        StreamRng::new(0, 0),
        &RunOptions::default(),
    )
    .unwrap();
    assert_eq!(tr.steps, 0);
    assert_eq!(tr.final_config, init);
    assert_eq!(tr.samples.len(), 1);
}

#[test]
fn coupled_difference_starts_at_zero_and_is_deterministic() {
    let g = generate_random_regular(40, 4, 1).unwrap();
    let spec = CorruptionSpec::pin_minus(40, (0..4).collect()).unwrap();
    let params = ModelParams::zero_field(0.05).unwrap();
    let a = coupled_difference_run(&g, params, &spec, &InitialState::IidUniform, 5000, StreamRng::new(1, 0), 40).unwrap();
    let b = coupled_difference_run(&g, params, &spec, &InitialState::IidUniform, 5000, StreamRng::new(1, 0), 40).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.samples[0], (0, 0));
    let zero = coupled_difference_run(
        &g,
        ModelParams::zero_field(0.0).unwrap(),
        &spec,
        &InitialState::IidUniform,
        5000,
        StreamRng::new(1, 0),
        40,
    )
    .unwrap();
    assert_eq!(zero.max_difference, 0);
}

#[test]
fn monotone_coupling_orders_boundary_pinned_grid() {
    let g = generate_grid(4).unwrap();
    let lower = CorruptionSpec::pin_minus(16, grid_boundary(4)).unwrap();
    let top = SpinConfig::uniform(16, Spin::Plus);
    let mut bottom = top.clone();
    for &v in lower.vertices() {
        bottom.set(v, Spin::Minus);
    }
    let r = monotone_coupled_run(
        &g,
        ModelParams::zero_field(1.0).unwrap(),
        None,
        Some(&lower),
        &top,
        &bottom,
        1_000_000,
        StreamRng::new(6, 0),
        16,
    )
    .unwrap();
    assert!(r.samples.iter().all(|s| s.magnetization_upper >= s.magnetization_lower));
    assert!(r.final_upper.dominates(&r.final_lower));
}

#[test]
fn unpinned_top_chain_stays_all_plus_at_zero_temperature() {
    let g = generate_grid(4).unwrap();
    let lower = CorruptionSpec::pin_minus(16, grid_diagonal(4)).unwrap();
    let top = SpinConfig::uniform(16, Spin::Plus);
    let r = monotone_coupled_run(
        &g,
        ModelParams::zero_temperature(),
        None,
        Some(&lower),
        &top,
        &top,
        100_000,
        StreamRng::new(6, 0),
        16,
    )
    .unwrap();
    assert!(r.samples.iter().all(|s| s.magnetization_upper == 16));
    assert!(r.samples.last().unwrap().magnetization_lower < 16);
}

#[test]
fn four_chain_disjoint_sets_on_path() {
    let g = generate_path(5).unwrap();
    let params = ModelParams::new(1.0, 4.0).unwrap();
    let r = four_chain_coupled_run(&g, params, &[0, 1], &[3], 100_000, StreamRng::new(9, 0), &FourChainOptions::default())
        .unwrap();
    assert_eq!(r.violations, 0);
    assert!(r.min_count_slack >= 0);
    assert!(r.samples.iter().all(|s| s.plus_counts[1] + s.plus_counts[2] >= s.plus_counts[0] + s.plus_counts[3]));
}

fn pinned_run(seed: u64, steps: u64) -> Result<corrupted_glauber::dynamics::Trajectory> {
    let g = generate_grid(5).unwrap();
    let spec = CorruptionSpec::new(25, vec![0, 6, 12], Policy::PinPattern(vec![Spin::Minus, Spin::Plus, Spin::Minus]))?;
    run(
        &g,
        ModelParams::new(0.8, 0.1)?,
        Some(spec),
        &InitialState::IidUniform,
        &[StopRule::MaxSteps(steps)],
        StreamRng::new(seed, 3),
        &RunOptions {
            thinning: Some(7),
            ..Default::default()
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn runs_are_deterministic(seed in any::<u64>(), steps in 0u64..3000) {
        let a = pinned_run(seed, steps).unwrap();
        let b = pinned_run(seed, steps).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a.samples.windows(2).all(|w| w[0].time < w[1].time));
        prop_assert!(a.samples.iter().all(|s| s.magnetization.abs() <= 25));
    }

    #[test]
    fn pins_hold_after_every_step(seed in any::<u64>()) {
        let g = generate_grid(4).unwrap();
        let spec = CorruptionSpec::pin_minus(16, vec![1, 5, 10]).unwrap();
        let mut bad = 0;
        run_observed(
            &g,
            ModelParams::zero_field(2.0).unwrap(),
            Some(spec),
            &InitialState::IidUniform,
            &[StopRule::MaxSteps(2000)],
            StreamRng::new(seed, 0),
            &RunOptions::default(),
            |s, _| bad += [1, 5, 10].iter().filter(|&&v| s.config().get(v) != Spin::Minus).count(),
        )
        .unwrap();
        prop_assert_eq!(bad, 0);
    }

    #[test]
    fn corrupted_and_standard_steps_consume_equal_words(seed in any::<u64>(), steps in 1usize..500) {
        let g = generate_grid(4).unwrap();
        let params = ModelParams::zero_field(1.0).unwrap();
        let spec = CorruptionSpec::pin_plus(16, vec![0, 3, 9]).unwrap();
        let mut adv = AdversaryState::new(Some(&spec), false);
        let mut a = ChainState::new(SpinConfig::uniform(16, Spin::Minus), StreamRng::new(seed, 0));
        let mut b = a.clone();
        for _ in 0..steps {
            glauber_step(&mut a, &g, params);
            corrupted_step(&mut b, &spec, &mut adv, &g, params).unwrap();
            prop_assert_eq!(a.rng.words_consumed(), b.rng.words_consumed());
        }
        prop_assert_eq!(a.rng.words_consumed(), 2 * steps as u128);
    }

    #[test]
    fn empty_corruption_keeps_coupled_chains_equal(seed in any::<u64>(), beta in 0.0f64..2.0) {
        let g = generate_random_regular(12, 3, seed).unwrap();
        let spec = CorruptionSpec::pin_minus(12, vec![]).unwrap();
        let r = coupled_difference_run(
            &g,
            ModelParams::zero_field(beta).unwrap(),
            &spec,
            &InitialState::IidUniform,
            2000,
            StreamRng::new(seed, 1),
            12,
        )
        .unwrap();
        prop_assert_eq!(r.max_difference, 0);
    }
}
