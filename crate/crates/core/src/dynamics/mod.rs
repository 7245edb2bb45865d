//! Glauber dynamics, adversaries and coupled runners.
//!
//! Every step consumes exactly two words of the chain's stream: one for the
//! vertex and one for the uniform threshold; see [`crate::rng`].

mod coupled;
mod engine;
mod policy;

pub use coupled::{
    coupled_difference_run, four_chain_coupled_run, monotone_coupled_run, DifferenceRun, FourChainOptions,
    FourChainRun, FourChainSample, FourChainSelection, MonotoneRun, MonotoneSample, ViolationPolicy,
};
pub use engine::{
    config_digest, corrupted_step, glauber_step, run, run_observed, ChainState, InitialState, RunOptions, Sample,
    Simulation, StepEvent, StopReason, StopRule, Trajectory,
};
pub use policy::{
    oscillator_policy, AdversaryState, CorruptionSpec, ExternalPolicy, OscillatorSpec, Phase, PhaseSwitch, Policy,
};
