use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Per-column affine maps to zero mean and unit variance. Constant feature
/// columns are dropped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    /// Width of the raw feature matrix.
    pub input_dim: usize,
    pub kept_columns: Vec<usize>,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl Standardizer {
    pub fn fit(x: &DenseMatrix, y: &[f64]) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.rows(),
                right: y.len(),
            });
        }
        if y.is_empty() {
            return Err(Error::TooFewRows { needed: 1, got: 0 });
        }
        let mut kept = Vec::new();
        let (mut means, mut stds) = (Vec::new(), Vec::new());
        for j in 0..x.cols() {
            let col = x.col(j);
            let (m, s) = mean_std(col.iter().copied());
            if s > 0.0 && s > 1e-12 * m.abs() {
                kept.push(j);
                means.push(m);
                stds.push(s);
            } else {
                log::warn!("feature column {j} is constant on the training rows; dropped");
            }
        }
        if kept.is_empty() && x.cols() > 0 {
            return Err(Error::InvalidConfig("every feature column is constant".into()));
        }
        let (target_mean, mut target_std) = mean_std(y.iter().copied());
        if !(target_std > 0.0) {
            log::warn!("target is constant on the training rows; leaving its scale unchanged");
            target_std = 1.0;
        }
        Ok(Self {
            input_dim: x.cols(),
            kept_columns: kept,
            feature_mean: means,
            feature_std: stds,
            target_mean,
            target_std,
        })
    }

    /// Width after dropping constant columns.
    pub fn output_dim(&self) -> usize {
        self.kept_columns.len()
    }

    pub fn transform_x(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.cols() != self.input_dim {
            return Err(Error::dims(self.input_dim, x.cols()));
        }
        Ok(DenseMatrix::from_fn(x.rows(), self.kept_columns.len(), |i, k| {
            (x[(i, self.kept_columns[k])] - self.feature_mean[k]) / self.feature_std[k]
        }))
    }

    pub fn transform_y(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| (v - self.target_mean) / self.target_std).collect()
    }

    pub fn inverse_y(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| v * self.target_std + self.target_mean).collect()
    }

    pub fn inverse_variance(&self, v: &[f64]) -> Vec<f64> {
        let s2 = self.target_std * self.target_std;
        v.iter().map(|x| x * s2).collect()
    }

    /// Maps standardized feature values of one kept column back to raw units.
    pub fn inverse_feature(&self, k: usize, value: f64) -> f64 {
        value * self.feature_std[k] + self.feature_mean[k]
    }
}
