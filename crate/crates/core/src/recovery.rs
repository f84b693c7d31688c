//! Compares a fitted network's parameter surfaces with the fields that
//! generated a synthetic dataset.
//!
//! Only the network is evaluated here; no GP inference is involved.

use serde::{Deserialize, Serialize};

use crate::data::{Field, SavedModel, SyntheticSpec};
use crate::error::{Error, Result};
use crate::kernels::KernelKind;
use crate::linalg::DenseMatrix;
use crate::metrics::pearson;

pub const DEFAULT_POINTS_PER_AXIS: usize = 200;

/// One recovered field on the grid, in raw units.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSurface {
    pub name: &'static str,
    pub estimate: Vec<f64>,
    pub truth: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldScore {
    pub name: String,
    /// `None` when either surface is constant on the grid.
    pub correlation: Option<f64>,
    pub rmse: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recovery {
    pub kernel: KernelKind,
    pub points_per_axis: usize,
    /// Grid points in raw input coordinates.
    pub grid: DenseMatrix,
    pub fields: Vec<FieldSurface>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub kernel: KernelKind,
    pub points_per_axis: usize,
    pub grid_points: usize,
    pub fields: Vec<FieldScore>,
}

/// Regular grid on the unit cube, the support of synthetic inputs.
pub fn unit_grid(d: usize, per_axis: usize) -> Result<DenseMatrix> {
    if !(1..=2).contains(&d) {
        return Err(Error::InvalidConfig(format!("recovery grids need d = 1 or 2, got d = {d}")));
    }
    if per_axis < 2 {
        return Err(Error::InvalidConfig("need at least 2 grid points per axis".into()));
    }
    let t = |i: usize| i as f64 / (per_axis - 1) as f64;
    Ok(if d == 1 {
        DenseMatrix::from_fn(per_axis, 1, |i, _| t(i))
    } else {
        DenseMatrix::from_fn(per_axis * per_axis, 2, |i, j| t(if j == 0 { i / per_axis } else { i % per_axis }))
    })
}

/// Evaluates the saved model's network on a grid and pairs each output with
/// the true field.
pub fn recover(saved: &SavedModel, truth: &SyntheticSpec, per_axis: usize) -> Result<Recovery> {
    let model = &saved.model;
    let Some(network) = &model.network else {
        return Err(Error::StationaryModelHasNoNonstatParams);
    };
    let st = &saved.standardizer;
    if st.input_dim != truth.d {
        return Err(Error::dims(format!("{} inputs in the truth record", truth.d), st.input_dim));
    }
    let grid = unit_grid(truth.d, per_axis)?;
    let out = network.evaluate(&st.transform_x(&grid)?)?;
    let ns = crate::kernels::NonstatValues::from_network_output(model.kind, &out);
    let on_grid = |f: &Field| (0..grid.rows()).map(|i| f.eval(grid.row(i))).collect::<Vec<f64>>();

    let s = st.target_std;
    let mut fields = vec![FieldSurface {
        name: "sigma",
        estimate: ns.sigma.iter().map(|v| v * s).collect(),
        truth: on_grid(&truth.sigma),
    }];
    if let Some(tau) = ns.tau {
        fields.push(FieldSurface {
            name: "tau",
            estimate: tau.iter().map(|v| v * s).collect(),
            truth: on_grid(&truth.tau),
        });
    }
    if let Some(ell) = ns.ell {
        // ℓ sits in a squared-distance quotient alongside ρ, so raw units pick
        // up the squared feature scale.
        let scale = model.stationary.rho() * st.feature_std[0] * st.feature_std[0];
        fields.push(FieldSurface {
            name: "lengthscale",
            estimate: ell.iter().map(|v| v * scale).collect(),
            truth: on_grid(&truth.lengthscale),
        });
    }
    Ok(Recovery {
        kernel: model.kind,
        points_per_axis: per_axis,
        grid,
        fields,
    })
}

impl Recovery {
    pub fn field(&self, name: &str) -> Option<&FieldSurface> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn report(&self) -> Result<RecoveryReport> {
        let fields = self
            .fields
            .iter()
            .map(|f| {
                let n = f.truth.len() as f64;
                let rmse = (f.estimate.iter().zip(&f.truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n).sqrt();
                Ok(FieldScore {
                    name: f.name.to_string(),
                    correlation: pearson(&f.estimate, &f.truth)?,
                    rmse,
                })
            })
            .collect::<Result<_>>()?;
        Ok(RecoveryReport {
            kernel: self.kernel,
            points_per_axis: self.points_per_axis,
            grid_points: self.grid.rows(),
            fields,
        })
    }

    /// Header and columns for a CSV: grid coordinates, then estimate and
    /// truth for each field.
    pub fn table(&self) -> (Vec<String>, Vec<Vec<f64>>) {
        let mut header: Vec<String> = (1..=self.grid.cols()).map(|j| format!("x{j}")).collect();
        let mut columns: Vec<Vec<f64>> = (0..self.grid.cols()).map(|j| self.grid.col(j)).collect();
        for f in &self.fields {
            header.push(format!("{}_hat", f.name));
            header.push(format!("{}_true", f.name));
            columns.push(f.estimate.clone());
            columns.push(f.truth.clone());
        }
        (header, columns)
    }
}
