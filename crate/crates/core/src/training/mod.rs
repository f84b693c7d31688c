//! Optimization of the joint objective and the validation-driven grid search.

mod adam;
mod fit;
mod select;

pub use adam::{adam_step, AdamState};
pub use fit::{fit, score, Approximation, Checkpoint, FitOutcome, GVariant, JitterSummary, TrainConfig, ValidationSet};
pub use select::{build_model, model_select, CellStatus, CellSummary, FitReport, ModelSpec};

use crate::error::{Error, Result};
use crate::gp::GpModel;

/// Flattens every trainable quantity: `[log σ², log ρ, log τ², μ, network…]`.
pub fn pack_params(model: &GpModel) -> Vec<f64> {
    let s = &model.stationary;
    let mut out = vec![s.log_sigma2, s.log_rho, s.log_tau2, model.mean_const];
    if let Some(net) = &model.network {
        out.extend(net.weights.to_flat());
    }
    out
}

/// Inverse of [`pack_params`].
pub fn unpack_params(model: &mut GpModel, flat: &[f64]) -> Result<()> {
    let expected = 4 + model.network.as_ref().map_or(0, |n| n.weights.num_params());
    if flat.len() != expected {
        return Err(Error::dims(expected, flat.len()));
    }
    model.stationary.log_sigma2 = flat[0];
    model.stationary.log_rho = flat[1];
    model.stationary.log_tau2 = flat[2];
    model.mean_const = flat[3];
    if let Some(net) = &mut model.network {
        net.weights.set_from_flat(&flat[4..])?;
    }
    Ok(())
}
