use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Drift threshold `L₁ = n(δ + (ε+δ)dβ/(1−dβ))` of the high-temperature
/// difference-set argument.
pub fn drift_threshold_l1(n: usize, d: usize, beta: f64, eps: f64, delta: f64) -> Result<f64> {
    let db = d as f64 * beta;
    if db.is_nan() || db >= 1.0 {
        return Err(Error::OutOfRegime(format!("dβ = {db} must be below 1")));
    }
    Ok(n as f64 * (delta + (eps + delta) * db / (1.0 - db)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasedWalk {
    /// Probability that the walk started at 1 with up-probability `½ − δ`
    /// reaches `a` before 0.
    pub exact: f64,
    /// `8δ e^{−2δa}`.
    pub bound: f64,
    pub bound_holds: bool,
}

/// Gambler's ruin against a drift toward 0: `(r − 1)/(r^a − 1)` with
/// `r = (½+δ)/(½−δ)`, and the exponential bound `8δe^{−2δa}`.
pub fn biased_walk_hit_prob(delta: f64, a: u32) -> Result<BiasedWalk> {
    if !(delta > 0.0 && delta < 0.25) {
        return invalid(format!("δ = {delta} must lie in (0, ¼)"));
    }
    if a == 0 {
        return invalid("a must be at least 1");
    }
    let r_minus_1 = 2.0 * delta / (0.5 - delta);
    let exact = if a == 1 {
        1.0
    } else {
        r_minus_1 / (a as f64 * r_minus_1.ln_1p()).exp_m1()
    };
    let bound = 8.0 * delta * (-2.0 * delta * a as f64).exp();
    Ok(BiasedWalk {
        exact,
        bound,
        bound_holds: exact <= bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpanderBound {
    /// `c* = 1/(1 + e^{2βd})`.
    pub c_star: f64,
    /// `n[(1−ε)(log 2 + c* log c* + (1−c*) log(1−c*)) + β(−α + 2d(c*(1−ε) + ε))]`.
    pub log_phi_bound: f64,
    /// `−¼αβn`.
    pub target: f64,
    /// `c* < α/(4d(1−ε))`.
    pub c_star_in_regime: bool,
    /// `ε < α/(4d)`.
    pub eps_in_regime: bool,
    /// `β > (1/2d) log(8d/α − 1)`.
    pub beta_in_regime: bool,
    /// `log_phi_bound ≤ target`.
    pub bound_holds: bool,
}

impl ExpanderBound {
    pub fn in_regime(&self) -> bool {
        self.c_star_in_regime && self.eps_in_regime && self.beta_in_regime
    }
}

/// Log bottleneck bound of the expander argument. Predicates are reported,
/// not enforced.
pub fn expander_bottleneck_bound(n: usize, d: usize, alpha: f64, beta: f64, eps: f64) -> ExpanderBound {
    let n = n as f64;
    let d = d as f64;
    let c = 1.0 / (1.0 + (2.0 * beta * d).exp());
    let xlogx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    let entropy = std::f64::consts::LN_2 + xlogx(c) + xlogx(1.0 - c);
    let log_phi_bound = n * ((1.0 - eps) * entropy + beta * (-alpha + 2.0 * d * (c * (1.0 - eps) + eps)));
    let target = -0.25 * alpha * beta * n;
    ExpanderBound {
        c_star: c,
        log_phi_bound,
        target,
        c_star_in_regime: c < alpha / (4.0 * d * (1.0 - eps)),
        eps_in_regime: eps < alpha / (4.0 * d),
        beta_in_regime: beta > (8.0 * d / alpha - 1.0).ln() / (2.0 * d),
        bound_holds: log_phi_bound <= target,
    }
}

/// `Σ_{j=1}^{n−1} 2n²j²`, the expected freezing time of one triangle of the
/// diagonal-corrupted zero-temperature grid.
pub fn grid_zero_temp_expected_time(n: u64) -> u128 {
    let n = n as u128;
    (1..n).map(|j| 2 * n * n * j * j).sum()
}

/// An inverse temperature, either a value or a multiple of `log n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaSpec {
    Value(f64),
    /// `β = c · ln n`.
    LogMultiple(f64),
}

impl BetaSpec {
    pub fn value(self, n: usize) -> f64 {
        match self {
            BetaSpec::Value(b) => b,
            BetaSpec::LogMultiple(c) => c * (n as f64).ln(),
        }
    }
}

/// Probability that a vertex with neighbour sum `s > 0` updates to `−1`:
/// `1/(1 + e^{2βs})`. For `β = c ln n` this is `1/(n^{2cs} + 1)`, evaluated
/// with integer powers when `2cs` is an integer.
pub fn deviation_prob(s: i64, n: usize, beta: BetaSpec) -> Result<f64> {
    if s <= 0 {
        return invalid(format!("neighbour sum {s} must be positive"));
    }
    match beta {
        BetaSpec::Value(b) if b < 0.0 || b.is_nan() => invalid("β must be nonnegative"),
        BetaSpec::Value(0.0) => Ok(0.5),
        BetaSpec::Value(b) if b.is_infinite() => Ok(0.0),
        BetaSpec::Value(b) => Ok(1.0 / (1.0 + (2.0 * b * s as f64).exp())),
        BetaSpec::LogMultiple(c) if c < 0.0 || c.is_nan() => invalid("β must be nonnegative"),
        BetaSpec::LogMultiple(c) => {
            let e = 2.0 * c * s as f64;
            let nf = n as f64;
            let power = if e.fract() == 0.0 && e <= i32::MAX as f64 {
                nf.powi(e as i32)
            } else {
                nf.powf(e)
            };
            Ok(1.0 / (power + 1.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_threshold() {
        assert_eq!(drift_threshold_l1(100, 4, 0.05, 0.0, 0.0).unwrap(), 0.0);
        let l = drift_threshold_l1(100, 4, 0.05, 0.1, 0.01).unwrap();
        assert!((l - 3.75).abs() < 1e-12);
        let l2 = drift_threshold_l1(200, 4, 0.05, 0.1, 0.01).unwrap();
        assert!((l2 - 2.0 * l).abs() < 1e-12);
        assert!(matches!(drift_threshold_l1(10, 4, 0.25, 0.1, 0.1), Err(Error::OutOfRegime(_))));
    }

    #[test]
    fn biased_walk_examples() {
        assert_eq!(biased_walk_hit_prob(0.1, 1).unwrap().exact, 1.0);
        let w = biased_walk_hit_prob(0.1, 2).unwrap();
        assert!((w.exact - 0.4).abs() < 1e-14);
        assert!((w.bound - 0.8 * (-0.4f64).exp()).abs() < 1e-15);
        assert!(w.bound_holds);
        assert!(biased_walk_hit_prob(0.25, 3).is_err());
        assert!(biased_walk_hit_prob(0.0, 3).is_err());
    }

    #[test]
    fn expander_bound_examples() {
        let b = expander_bottleneck_bound(100, 4, 2.0, 2.0, 0.05);
        assert!(b.in_regime());
        assert!(b.bound_holds);
        assert!(b.log_phi_bound <= -100.0);
        let hot = expander_bottleneck_bound(100, 4, 2.0, 0.25, 0.05);
        assert!((hot.c_star - 1.0 / (1.0 + 1f64.exp().powi(2))).abs() < 1e-15);
        assert!((hot.c_star - 0.119_20).abs() < 1e-5);
        let cold = expander_bottleneck_bound(100, 4, 2.0, 200.0, 0.05);
        assert!(cold.c_star < 1e-300);
    }

    #[test]
    fn expander_entropy_limit() {
        let n = 10;
        let eps = 0.1;
        let b = expander_bottleneck_bound(n, 3, 1.0, 400.0, eps);
        let beta_part = 400.0 * (-1.0 + 6.0 * eps) * n as f64;
        let entropy_part = (b.log_phi_bound - beta_part) / n as f64;
        assert!((entropy_part - std::f64::consts::LN_2 * (1.0 - eps)).abs() < 1e-9);
    }

    #[test]
    fn grid_time_formula() {
        assert_eq!(grid_zero_temp_expected_time(1), 0);
        assert_eq!(grid_zero_temp_expected_time(3), 90);
        assert_eq!(grid_zero_temp_expected_time(10), 57_000);
    }

    #[test]
    fn deviation_probabilities() {
        let p = deviation_prob(1, 10, BetaSpec::LogMultiple(4.0)).unwrap();
        assert_eq!(p, 1.0 / (1e8 + 1.0));
        let q = deviation_prob(1, 10, BetaSpec::Value(4.0 * 10f64.ln())).unwrap();
        assert!((q - p).abs() / p < 1e-12);
        assert_eq!(deviation_prob(3, 10, BetaSpec::Value(0.0)).unwrap(), 0.5);
        let xs: Vec<f64> = (1..8).map(|s| deviation_prob(s, 5, BetaSpec::Value(0.3)).unwrap()).collect();
        assert!(xs.windows(2).all(|w| w[1] < w[0]));
        assert!(deviation_prob(0, 10, BetaSpec::Value(1.0)).is_err());
    }
}
