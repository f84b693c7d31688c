//! Mean square error and the marginal log-score.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub mse: f64,
    /// Sum of negative predictive log-densities; lower is better.
    pub log_score: f64,
    pub n_test: usize,
}

impl EvalResult {
    pub fn compute(y: &[f64], mean: &[f64], variance: &[f64]) -> Result<Self> {
        Ok(Self {
            mse: mse(y, mean)?,
            log_score: log_score(y, mean, variance)?,
            n_test: y.len(),
        })
    }
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::LengthMismatch { left: a, right: b });
    }
    if a == 0 {
        return Err(Error::TooFewRows { needed: 1, got: 0 });
    }
    Ok(())
}

pub fn mse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_lengths(y_true.len(), y_pred.len())?;
    let sum: f64 = y_true.iter().zip(y_pred).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / y_true.len() as f64)
}

/// `Σᵢ ½log(2πvᵢ) + (yᵢ − mᵢ)²/(2vᵢ)`, with `v` the noise-inclusive
/// predictive variance.
pub fn log_score(y_true: &[f64], mean: &[f64], variance: &[f64]) -> Result<f64> {
    check_lengths(y_true.len(), mean.len())?;
    check_lengths(y_true.len(), variance.len())?;
    if let Some((index, &value)) = variance.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveVariance { index, value });
    }
    Ok(y_true
        .iter()
        .zip(mean)
        .zip(variance)
        .map(|((y, m), v)| 0.5 * (2.0 * PI * v).ln() + (y - m) * (y - m) / (2.0 * v))
        .sum())
}

/// Pearson correlation, or `None` when either input has zero spread.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    check_lengths(a.len(), b.len())?;
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(None);
    }
    Ok(Some(sab / (saa * sbb).sqrt()))
}

/// Mean and standard error (sample standard deviation over √k).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}
