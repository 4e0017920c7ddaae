use serde::{Deserialize, Serialize};

use super::FinanceError;

/// Simple least-squares line `y = slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub adj_r2: f64,
    pub n_points: usize,
}

pub fn ols_fit(xs: &[f64], ys: &[f64]) -> Result<RegressionResult, FinanceError> {
    if xs.len() != ys.len() {
        return Err(FinanceError::LengthMismatch {
            xs: xs.len(),
            ys: ys.len(),
        });
    }
    let n = xs.len();
    if n < 3 {
        return Err(FinanceError::TooFewPoints(n));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= f64::EPSILON * xs.iter().map(|x| x * x).sum::<f64>() {
        return Err(FinanceError::DegenerateX);
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if syy > 0.0 {
        (1.0 - ss_res / syy).min(1.0)
    } else {
        0.0
    };
    let adj_r2 = 1.0 - (1.0 - r2) * (nf - 1.0) / (nf - 2.0);
    Ok(RegressionResult {
        slope,
        intercept,
        r2,
        adj_r2,
        n_points: n,
    })
}
