//! Adversarially corrupted Glauber dynamics for the ferromagnetic Ising model.
//!
//! The crate is organized bottom-up:
//!
//! * [`graphs`]: graph type, generators and edge expansion.
//! * [`ising`]: energy, magnetization and the single-site update rule.
//! * [`dynamics`]: the Glauber engine, adversary policies and coupled runners.
//! * [`exact`]: enumerated Gibbs measures, transition matrices, closures and
//!   closed-form evaluators.
//! * [`experiments`]: named scenario runners with CSV/JSON output.

pub mod dynamics;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod graphs;
pub mod ising;
pub mod output;
pub mod rng;

pub use error::{Error, Result};
pub use graphs::Graph;
pub use ising::{ModelParams, Spin, SpinConfig};
