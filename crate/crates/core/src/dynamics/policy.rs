use std::any::Any;
use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::ising::{Spin, SpinConfig};

/// A user-supplied adversary.
///
/// The policy sees the current configuration and its own opaque state, never
/// the trajectory history.
pub trait ExternalPolicy: Send + Sync + fmt::Debug {
    /// Fresh opaque state for a new run.
    fn init_state(&self) -> Box<dyn Any + Send> {
        Box::new(())
    }

    /// New spin of corrupted vertex `v` when it is selected at step `time`.
    fn site_spin(&self, v: usize, config: &SpinConfig, time: u64, state: &mut dyn Any) -> Spin;

    /// Spins on the corrupted set to overwrite after the site update of step
    /// `time` (also called once at time 0). Entries off the corrupted set are
    /// a contract violation.
    fn rewrite(&self, _config: &SpinConfig, _time: u64, _state: &mut dyn Any) -> Vec<(usize, Spin)> {
        Vec::new()
    }
}

/// Thresholds of the flip-threshold strategy. `observed = None` means the
/// uncorrupted vertices `V ∖ A`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OscillatorSpec {
    pub up_threshold: i64,
    pub down_threshold: i64,
    pub observed: Option<Vec<usize>>,
}

impl OscillatorSpec {
    /// Default thresholds `±⌈n^{0.5+ε/2}⌉` observing `V ∖ A`.
    pub fn from_eps(n: usize, eps: f64) -> Self {
        let t = (n as f64).powf(0.5 + eps / 2.0).ceil() as i64;
        Self {
            up_threshold: t,
            down_threshold: -t,
            observed: None,
        }
    }
}

#[derive(Clone)]
pub enum Policy {
    PinPlus,
    PinMinus,
    /// One spin per corrupted vertex, in the order the vertices were given.
    PinPattern(Vec<Spin>),
    Oscillator(OscillatorSpec),
    External(Arc<dyn ExternalPolicy>),
}

impl fmt::Debug for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::PinPlus => write!(f, "PinPlus"),
            Policy::PinMinus => write!(f, "PinMinus"),
            Policy::PinPattern(p) => f.debug_tuple("PinPattern").field(p).finish(),
            Policy::Oscillator(o) => f.debug_tuple("Oscillator").field(o).finish(),
            Policy::External(e) => f.debug_tuple("External").field(e).finish(),
        }
    }
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::PinPlus => "pin_plus",
            Policy::PinMinus => "pin_minus",
            Policy::PinPattern(_) => "pin_pattern",
            Policy::Oscillator(_) => "oscillator",
            Policy::External(_) => "external",
        }
    }

    pub fn is_pin(&self) -> bool {
        matches!(self, Policy::PinPlus | Policy::PinMinus | Policy::PinPattern(_))
    }
}

/// The corrupted set `A` together with the adversary's rule.
#[derive(Debug, Clone)]
pub struct CorruptionSpec {
    vertices: Vec<usize>,
    policy: Policy,
    select_free_only: bool,
}

impl CorruptionSpec {
    pub fn new(n: usize, vertices: Vec<usize>, policy: Policy) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &v in &vertices {
            if v >= n {
                return invalid(format!("corrupted vertex {v} out of range for n = {n}"));
            }
            if !seen.insert(v) {
                return invalid(format!("corrupted vertex {v} listed twice"));
            }
        }
        match &policy {
            Policy::PinPattern(p) if p.len() != vertices.len() => {
                return invalid(format!(
                    "pattern has {} spins for {} corrupted vertices",
                    p.len(),
                    vertices.len()
                ));
            }
            Policy::Oscillator(o) => {
                if o.down_threshold >= o.up_threshold {
                    return invalid("oscillator needs down_threshold < up_threshold");
                }
                if let Some(obs) = &o.observed {
                    if let Some(&bad) = obs.iter().find(|&&v| v >= n) {
                        return invalid(format!("observed vertex {bad} out of range"));
                    }
                }
            }
            _ => {}
        }
        Ok(Self {
            vertices,
            policy,
            select_free_only: false,
        })
    }

    pub fn pin_minus(n: usize, vertices: Vec<usize>) -> Result<Self> {
        Self::new(n, vertices, Policy::PinMinus)
    }

    pub fn pin_plus(n: usize, vertices: Vec<usize>) -> Result<Self> {
        Self::new(n, vertices, Policy::PinPlus)
    }

    /// Draw the updated vertex from `V ∖ A` instead of `V`.
    pub fn with_free_only_selection(mut self, on: bool) -> Self {
        self.select_free_only = on;
        self
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn select_free_only(&self) -> bool {
        self.select_free_only
    }

    /// The pinned spin of each corrupted vertex for pin policies.
    pub fn pinned_spins(&self) -> Option<Vec<(usize, Spin)>> {
        match &self.policy {
            Policy::PinPlus => Some(self.vertices.iter().map(|&v| (v, Spin::Plus)).collect()),
            Policy::PinMinus => Some(self.vertices.iter().map(|&v| (v, Spin::Minus)).collect()),
            Policy::PinPattern(p) => Some(self.vertices.iter().copied().zip(p.iter().copied()).collect()),
            _ => None,
        }
    }

    /// Per-vertex membership mask of `A`.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &v in &self.vertices {
            m[v] = true;
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Plus,
    Minus,
}

impl Phase {
    pub fn spin(self) -> Spin {
        match self {
            Phase::Plus => Spin::Plus,
            Phase::Minus => Spin::Minus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseSwitch {
    pub time: u64,
    pub observed_magnetization: i64,
    pub new_phase: Phase,
}

/// Mutable adversary state carried alongside a chain.
pub struct AdversaryState {
    pub phase: Phase,
    pub last_rewrite_time: Option<u64>,
    pub switches: u64,
    /// Phase switches, recorded only when tracing is enabled.
    pub trace: Option<Vec<PhaseSwitch>>,
    pub external: Box<dyn Any + Send>,
}

impl fmt::Debug for AdversaryState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdversaryState")
            .field("phase", &self.phase)
            .field("last_rewrite_time", &self.last_rewrite_time)
            .field("switches", &self.switches)
            .finish_non_exhaustive()
    }
}

impl AdversaryState {
    pub fn new(spec: Option<&CorruptionSpec>, trace: bool) -> Self {
        let external = match spec.map(CorruptionSpec::policy) {
            Some(Policy::External(e)) => e.init_state(),
            _ => Box::new(()),
        };
        Self {
            phase: Phase::Plus,
            last_rewrite_time: None,
            switches: 0,
            trace: trace.then(Vec::new),
            external,
        }
    }
}

/// Flip-threshold rule: in phase plus the corrupted set is all `+1` until
/// the observed magnetization reaches `up_threshold`, then all `−1` until it
/// falls to `down_threshold`. Comparisons are inclusive.
pub fn oscillator_policy(observed_magnetization: i64, phase: Phase, spec: &OscillatorSpec) -> Phase {
    match phase {
        Phase::Plus if observed_magnetization >= spec.up_threshold => Phase::Minus,
        Phase::Minus if observed_magnetization <= spec.down_threshold => Phase::Plus,
        p => p,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn osc() -> OscillatorSpec {
        OscillatorSpec {
            up_threshold: 5,
            down_threshold: -5,
            observed: None,
        }
    }

    #[test]
    fn oscillator_transitions() {
        let o = osc();
        for m in -4..=4 {
            assert_eq!(oscillator_policy(m, Phase::Plus, &o), Phase::Plus);
            assert_eq!(oscillator_policy(m, Phase::Minus, &o), Phase::Minus);
        }
        assert_eq!(oscillator_policy(5, Phase::Plus, &o), Phase::Minus);
        assert_eq!(oscillator_policy(-5, Phase::Minus, &o), Phase::Plus);
        assert_eq!(oscillator_policy(-9, Phase::Plus, &o), Phase::Plus);
        assert_eq!(oscillator_policy(9, Phase::Minus, &o), Phase::Minus);
    }

    #[test]
    fn default_thresholds() {
        let o = OscillatorSpec::from_eps(400, 0.3);
        assert_eq!(o.up_threshold, 50);
        assert_eq!(o.down_threshold, -50);
    }

    #[test]
    fn spec_validation() {
        assert!(CorruptionSpec::pin_minus(4, vec![0, 4]).is_err());
        assert!(CorruptionSpec::pin_minus(4, vec![1, 1]).is_err());
        assert!(CorruptionSpec::new(4, vec![0, 1], Policy::PinPattern(vec![Spin::Plus])).is_err());
        let bad = OscillatorSpec {
            up_threshold: 1,
            down_threshold: 1,
            observed: None,
        };
        assert!(CorruptionSpec::new(4, vec![0], Policy::Oscillator(bad)).is_err());
        let ok = CorruptionSpec::new(4, vec![2, 0], Policy::PinPattern(vec![Spin::Plus, Spin::Minus])).unwrap();
        assert_eq!(ok.pinned_spins().unwrap(), vec![(2, Spin::Plus), (0, Spin::Minus)]);
    }
}
