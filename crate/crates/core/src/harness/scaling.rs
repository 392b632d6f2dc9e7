use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::config::Method;
use super::pipeline::Experiment;
use super::sweep::{with_pool, Summary};
use crate::error::{Error, Result};

/// Budget treated as noise-free when measuring the error floor.
pub const FLOOR_EPSILON: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub epsilon: f64,
    pub error: Summary,
}

/// Log-log fit of `mean error - floor` against `1 / epsilon`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub method: Method,
    pub rows: Vec<ScalingRow>,
    pub floor: ScalingRow,
    pub slope: f64,
    pub intercept: f64,
    /// 95% interval for the slope; absent with only two points.
    pub slope_ci95: Option<(f64, f64)>,
    /// Budgets whose mean error exceeded the floor and entered the fit.
    pub fitted_epsilons: Vec<f64>,
}

/// Ordinary least squares `y = a + b x`; returns `(b, a, se_b)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let se = if x.len() > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (slope, intercept, se)
}

fn mean_errors(exp: &Experiment, method: Method, epsilon: f64) -> Result<ScalingRow> {
    let errors: Vec<Option<f64>> = exp
        .config
        .seeds
        .par_iter()
        .map(|&s| exp.run(method, epsilon, s).centroid_error)
        .collect();
    let error = Summary::of(errors);
    if error.mean.is_none() {
        return Err(Error::Undefined(
            "centroid error (no reference centers or every run failed)",
        ));
    }
    Ok(ScalingRow { epsilon, error })
}

/// Mean matched centroid error per budget and its growth rate in `1 / epsilon`.
pub fn epsilon_scaling_report(
    exp: &Experiment,
    epsilons: &[f64],
    method: Method,
) -> Result<ScalingReport> {
    if epsilons.len() < 2 {
        return Err(Error::InvalidInput(
            "scaling fit needs at least two epsilon values".into(),
        ));
    }
    let (rows, floor) = with_pool(exp.config.threads, || {
        let rows = epsilons
            .iter()
            .map(|&e| mean_errors(exp, method, e))
            .collect::<Result<Vec<_>>>()?;
        Ok::<_, Error>((rows, mean_errors(exp, method, FLOOR_EPSILON)?))
    })??;
    let base = floor.error.mean.expect("checked");
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter_map(|r| {
            let excess = r.error.mean.expect("checked") - base;
            (excess > 0.0).then(|| ((1.0 / r.epsilon).ln(), excess.ln()))
        })
        .unzip();
    if x.len() < 2 {
        return Err(Error::Undefined(
            "fewer than two budgets with error above the noise-free floor",
        ));
    }
    let (slope, intercept, se) = linear_fit(&x, &y);
    let slope_ci95 = if x.len() > 2 {
        let t = StudentsT::new(0.0, 1.0, (x.len() - 2) as f64)
            .map_err(|e| Error::InvalidInput(e.to_string()))?
            .inverse_cdf(0.975);
        Some((slope - t * se, slope + t * se))
    } else {
        None
    };
    let fitted_epsilons = rows
        .iter()
        .filter(|r| r.error.mean.expect("checked") > base)
        .map(|r| r.epsilon)
        .collect();
    Ok(ScalingReport {
        method,
        rows,
        floor,
        slope,
        intercept,
        slope_ci95,
        fitted_epsilons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 + 1.25 * v).collect();
        let (b, a, se) = linear_fit(&x, &y);
        assert!((b - 1.25).abs() < 1e-12 && (a - 0.5).abs() < 1e-12 && se.abs() < 1e-9);
    }
}
