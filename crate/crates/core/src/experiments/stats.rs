use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Standard error of the mean (sample standard deviation over `√len`).
pub fn standard_error(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (var / xs.len() as f64).sqrt()
}

/// Empirical quantile by the nearest-rank rule.
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; zero for an exact fit.
    pub stderr: f64,
}

/// Least-squares fit of `log t` against `log n`.
pub fn scaling_fit(points: &[(f64, f64)]) -> Result<ScalingFit> {
    if points.len() < 3 {
        return invalid("scaling fit needs at least three sizes");
    }
    if let Some(&(n, t)) = points.iter().find(|(n, t)| !(*n > 0.0 && *t > 0.0)) {
        return Err(Error::InvalidData(format!("nonpositive point ({n}, {t})")));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidData("all sizes are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let stderr = (rss / (k - 2.0) / sxx).sqrt();
    Ok(ScalingFit {
        slope,
        intercept,
        stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::grid_zero_temp_expected_time;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = [2.0f64, 3.0, 5.0, 11.0].iter().map(|&n| (n, n.powi(5))).collect();
        let f = scaling_fit(&pts).unwrap();
        assert!((f.slope - 5.0).abs() < 1e-9);
        assert!(f.intercept.abs() < 1e-9);
    }

    #[test]
    fn constant_data_has_zero_slope() {
        let f = scaling_fit(&[(1.0, 7.0), (2.0, 7.0), (4.0, 7.0)]).unwrap();
        assert!(f.slope.abs() < 1e-12);
    }

    #[test]
    fn closed_form_grid_times() {
        let pts: Vec<(f64, f64)> = [5u64, 10, 20, 40]
            .iter()
            .map(|&n| (n as f64, grid_zero_temp_expected_time(n) as f64))
            .collect();
        let f = scaling_fit(&pts).unwrap();
        assert!((f.slope - 5.137_325_11).abs() < 1e-5, "slope {}", f.slope);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(scaling_fit(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(matches!(scaling_fit(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]), Err(Error::InvalidData(_))));
    }

    #[test]
    fn quantiles() {
        let xs = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(quantile(&xs, 0.5), 3.0);
        assert_eq!(quantile(&xs, 1.0), 5.0);
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert!((standard_error(&[1.0, 3.0]) - 1.0).abs() < 1e-15);
    }
}
