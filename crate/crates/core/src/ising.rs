//! Static quantities of the ferromagnetic Ising model.
//!
//! The measure is `μ(σ) ∝ exp(β·(H(σ) + h·m(σ)))` with
//! `H(σ) = Σ_{uv ∈ E} σ(u)σ(v)`, so agreement is favoured and a positive
//! field `h` favours `+1`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graphs::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Spin {
    Minus,
    Plus,
}

impl Spin {
    #[inline]
    pub fn value(self) -> i64 {
        match self {
            Spin::Plus => 1,
            Spin::Minus => -1,
        }
    }

    #[inline]
    pub fn flipped(self) -> Spin {
        match self {
            Spin::Plus => Spin::Minus,
            Spin::Minus => Spin::Plus,
        }
    }

    pub fn from_value(v: i64) -> Result<Spin> {
        match v {
            1 => Ok(Spin::Plus),
            -1 => Ok(Spin::Minus),
            other => invalid(format!("spin must be ±1, got {other}")),
        }
    }
}

/// An assignment of ±1 to every vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinConfig(Vec<Spin>);

impl SpinConfig {
    pub fn new(spins: Vec<Spin>) -> Self {
        Self(spins)
    }

    pub fn uniform(n: usize, spin: Spin) -> Self {
        Self(vec![spin; n])
    }

    pub fn from_values(values: &[i64]) -> Result<Self> {
        values.iter().map(|&v| Spin::from_value(v)).collect::<Result<Vec<_>>>().map(Self)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, v: usize) -> Spin {
        self.0[v]
    }

    #[inline]
    pub fn set(&mut self, v: usize, spin: Spin) {
        self.0[v] = spin;
    }

    pub fn spins(&self) -> &[Spin] {
        &self.0
    }

    pub fn plus_count(&self) -> usize {
        self.0.iter().filter(|&&s| s == Spin::Plus).count()
    }

    /// Pointwise order `self ≥ other` (+1 above −1).
    pub fn dominates(&self, other: &SpinConfig) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a >= b)
    }
}

/// Inverse temperature and uniform external field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    beta: f64,
    field: f64,
}

impl ModelParams {
    /// `beta` may be `f64::INFINITY` (zero temperature).
    pub fn new(beta: f64, field: f64) -> Result<Self> {
        if beta.is_nan() || beta < 0.0 {
            return invalid(format!("beta must be nonnegative, got {beta}"));
        }
        if !field.is_finite() {
            return invalid(format!("field must be finite, got {field}"));
        }
        Ok(Self { beta, field })
    }

    pub fn zero_field(beta: f64) -> Result<Self> {
        Self::new(beta, 0.0)
    }

    pub fn zero_temperature() -> Self {
        Self {
            beta: f64::INFINITY,
            field: 0.0,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn field(&self) -> f64 {
        self.field
    }

    pub fn is_zero_temperature(&self) -> bool {
        self.beta.is_infinite()
    }
}

fn check_len(graph: &Graph, sigma: &SpinConfig) -> Result<()> {
    if graph.n() != sigma.len() {
        return Err(Error::Dimension(format!(
            "configuration has {} spins but the graph has {} vertices",
            sigma.len(),
            graph.n()
        )));
    }
    Ok(())
}

/// `H(σ) = Σ_{uv ∈ E} σ(u)σ(v)`.
pub fn hamiltonian(graph: &Graph, sigma: &SpinConfig) -> Result<i64> {
    check_len(graph, sigma)?;
    Ok(graph
        .edges()
        .map(|(u, v)| sigma.get(u).value() * sigma.get(v).value())
        .sum())
}

/// Sum of spins over `subset`, or over every vertex when `subset` is `None`.
pub fn magnetization(sigma: &SpinConfig, subset: Option<&[usize]>) -> Result<i64> {
    match subset {
        None => Ok(sigma.spins().iter().map(|s| s.value()).sum()),
        Some(vs) => vs
            .iter()
            .map(|&v| {
                if v < sigma.len() {
                    Ok(sigma.get(v).value())
                } else {
                    Err(Error::Dimension(format!(
                        "vertex {v} out of range for {} spins",
                        sigma.len()
                    )))
                }
            })
            .sum(),
    }
}

/// Neighbour spin sum `Σ_{u ∼ v} σ(u)`.
#[inline]
pub fn neighbor_sum(graph: &Graph, sigma: &SpinConfig, v: usize) -> i64 {
    graph.neighbors(v).iter().map(|&u| sigma.get(u).value()).sum()
}

/// Probability that the Glauber update sets a site with neighbour sum `s`
/// to `+1`: `1 / (1 + exp(−2β(s + h)))`. At `β = ∞` this is 1, 0 or ½
/// according to the sign of `s + h`; at `β = 0` it is exactly ½.
#[inline]
pub fn update_probability(s: i64, params: ModelParams) -> f64 {
    update_probability_real(s as f64 + params.field, params.beta)
}

#[inline]
pub(crate) fn update_probability_real(x: f64, beta: f64) -> f64 {
    if beta == 0.0 || x == 0.0 {
        return 0.5;
    }
    if beta.is_infinite() {
        return if x > 0.0 { 1.0 } else { 0.0 };
    }
    1.0 / (1.0 + (-2.0 * beta * x).exp())
}

/// The local rule in the `(k, d)` parametrization: the `+1` probability of a
/// degree-`d` vertex with `k` neighbours at `+1`, i.e.
/// `½[1 + tanh(β(2k − d + h))]`.
pub fn local_rule_with_field(k: usize, d: usize, params: ModelParams) -> Result<f64> {
    if k > d {
        return invalid(format!("plus-neighbour count {k} exceeds degree {d}"));
    }
    Ok(update_probability(2 * k as i64 - d as i64, params))
}
