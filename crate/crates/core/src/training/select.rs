use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::fit::score;
use super::{fit, Approximation, Checkpoint, GVariant, JitterSummary, TrainConfig, ValidationSet};
use crate::data::SplitData;
use crate::error::{Error, Result};
use crate::gp::GpModel;
use crate::kernels::{KernelKind, StationaryParams};
use crate::linalg::DenseMatrix;
use crate::metrics::EvalResult;
use crate::network::{NetworkSpec, OutputLink, ParamNetwork};

/// Kernel family and initial values shared by every grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: KernelKind,
    /// Initial stationary parameters and base-kernel smoothness.
    pub stationary: StationaryParams,
    pub output_link: OutputLink,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            kind: KernelKind::NonstatVariance,
            stationary: StationaryParams::default(),
            output_link: OutputLink::Softplus,
        }
    }
}

/// Fresh model for one grid cell: network seeded by `seed`, mean at the
/// training-target mean, inducing points a seeded random subset of `x`.
pub fn build_model(
    spec: &ModelSpec,
    g: &GVariant,
    approximation: Approximation,
    seed: u64,
    x: &DenseMatrix,
    y: &[f64],
) -> Result<GpModel> {
    if y.is_empty() {
        return Err(Error::TooFewRows { needed: 1, got: 0 });
    }
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let mut model = if spec.kind.is_stationary() {
        GpModel::stationary(spec.stationary, mean)
    } else {
        let net_spec = NetworkSpec::new(x.cols(), g.hidden().to_vec(), spec.kind.network_outputs())
            .with_link(spec.output_link);
        GpModel::nonstationary(spec.kind, spec.stationary, ParamNetwork::init(net_spec, seed), mean)?
    };
    if let Approximation::Sor { inducing } = approximation {
        let m = inducing.min(x.rows());
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut idx = sample(&mut rng, x.rows(), m).into_vec();
        idx.sort_unstable();
        model = model.with_inducing(x.select_rows(&idx));
    }
    model.validate(Some(x.cols()))?;
    Ok(model)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellStatus {
    Completed,
    Diverged { iteration: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub step_size: f64,
    pub g_variant: GVariant,
    #[serde(flatten)]
    pub status: CellStatus,
    pub final_nll: Option<f64>,
    pub best_iteration: Option<usize>,
    pub val_log_score: Option<f64>,
    pub val_mse: Option<f64>,
    pub wall_time_secs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub kernel: KernelKind,
    pub approximation: Approximation,
    pub seed: u64,
    pub selected_step_size: f64,
    pub selected_g_variant: GVariant,
    pub cells: Vec<CellSummary>,
    /// Objective trace of the selected cell.
    pub nll_trace: Vec<f64>,
    pub checkpoints: Vec<Checkpoint>,
    pub best_iteration: usize,
    /// Test metrics of the selected cell, in original target units.
    pub test: EvalResult,
    pub jitter: JitterSummary,
    pub wall_time_secs: f64,
}

impl FitReport {
    /// Copy with every timing field zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.wall_time_secs = 0.0;
        r.cells.iter_mut().for_each(|c| c.wall_time_secs = 0.0);
        r
    }
}

/// Index of the winning cell: lowest validation log-score, then lowest
/// validation MSE, then smallest step size, then grid order. Cells without a
/// finite score are skipped.
pub fn select_cell(cells: &[CellSummary]) -> Option<usize> {
    let key = |c: &CellSummary| match (c.status.clone(), c.val_log_score, c.val_mse) {
        (CellStatus::Completed, Some(ls), mse) if ls.is_finite() => Some((ls, mse.unwrap_or(f64::INFINITY))),
        _ => None,
    };
    cells
        .iter()
        .enumerate()
        .filter_map(|(i, c)| key(c).map(|k| (i, k, c.step_size)))
        .min_by(|(ia, (la, ma), sa), (ib, (lb, mb), sb)| {
            la.total_cmp(lb)
                .then(ma.total_cmp(mb))
                .then(sa.total_cmp(sb))
                .then(ia.cmp(ib))
        })
        .map(|(i, _, _)| i)
}

/// Fits every (step size × g-variant) cell on the training rows, keeps the
/// cell with the best validation log-score, and scores it on the test rows.
pub fn model_select(data: &SplitData, spec: &ModelSpec, config: &TrainConfig) -> Result<(GpModel, FitReport)> {
    config.validate()?;
    let start = Instant::now();
    let (x, y) = (&data.train_x, &data.train_y);
    let scale = data.standardizer.target_std;
    let val = ValidationSet {
        x: &data.val_x,
        y: &data.val_y,
        target_scale: scale,
    };
    // A stationary kernel has no network, so the g grid collapses.
    let g_variants = if spec.kind.is_stationary() {
        vec![GVariant::linear()]
    } else {
        config.g_variants.clone()
    };

    let mut cells = Vec::new();
    let mut outcomes = Vec::new();
    for g in &g_variants {
        for &lr in &config.step_sizes {
            let t0 = Instant::now();
            let model = build_model(spec, g, config.approximation, config.seed, x, y)?;
            let result = fit(model, x, y, Some(&val), config, lr);
            let elapsed = t0.elapsed().as_secs_f64();
            let (cell, outcome) = match result {
                Ok(out) => {
                    let cp = out.selected_checkpoint();
                    let cell = CellSummary {
                        step_size: lr,
                        g_variant: g.clone(),
                        status: CellStatus::Completed,
                        final_nll: out.nll_trace.last().copied(),
                        best_iteration: Some(out.best_iteration),
                        val_log_score: cp.and_then(|c| c.val_log_score),
                        val_mse: cp.and_then(|c| c.val_mse),
                        wall_time_secs: elapsed,
                    };
                    (cell, Some(out))
                }
                Err(Error::Diverged { iteration, reason }) => {
                    log::warn!("cell lr={lr} g={} diverged at iteration {iteration}: {reason}", g.name());
                    let cell = CellSummary {
                        step_size: lr,
                        g_variant: g.clone(),
                        status: CellStatus::Diverged { iteration, reason },
                        final_nll: None,
                        best_iteration: None,
                        val_log_score: None,
                        val_mse: None,
                        wall_time_secs: elapsed,
                    };
                    (cell, None)
                }
                Err(e) => return Err(e),
            };
            log::info!(
                "cell lr={lr} g={}: val log-score {:?}",
                g.name(),
                cell.val_log_score
            );
            cells.push(cell);
            outcomes.push(outcome);
        }
    }

    let winner = select_cell(&cells).ok_or_else(|| Error::Diverged {
        iteration: config.max_iters,
        reason: "no grid cell produced a finite validation log-score".into(),
    })?;
    let outcome = outcomes[winner].take().expect("selected cell completed");
    let test = score(&outcome.model, x, y, &data.test_x, &data.test_y, scale)?;
    let report = FitReport {
        schema_version: crate::data::SCHEMA_VERSION,
        kernel: spec.kind,
        approximation: config.approximation,
        seed: config.seed,
        selected_step_size: cells[winner].step_size,
        selected_g_variant: cells[winner].g_variant.clone(),
        cells,
        nll_trace: outcome.nll_trace,
        checkpoints: outcome.checkpoints,
        best_iteration: outcome.best_iteration,
        test,
        jitter: outcome.jitter,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    Ok((outcome.model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(lr: f64, ls: f64, mse: f64) -> CellSummary {
        CellSummary {
            step_size: lr,
            g_variant: GVariant::linear(),
            status: CellStatus::Completed,
            final_nll: Some(0.0),
            best_iteration: Some(0),
            val_log_score: Some(ls),
            val_mse: Some(mse),
            wall_time_secs: 0.0,
        }
    }

    #[test]
    fn single_cell_wins() {
        assert_eq!(select_cell(&[cell(0.1, 3.0, 1.0)]), Some(0));
    }

    #[test]
    fn ties_break_on_mse_then_step_size() {
        assert_eq!(select_cell(&[cell(0.1, 3.0, 2.0), cell(0.01, 3.0, 1.0)]), Some(1));
        assert_eq!(select_cell(&[cell(0.1, 3.0, 1.0), cell(0.01, 3.0, 1.0)]), Some(1));
        assert_eq!(select_cell(&[cell(0.01, 3.0, 1.0), cell(0.01, 3.0, 1.0)]), Some(0));
        assert_eq!(select_cell(&[cell(0.1, 2.0, 9.0), cell(0.01, 3.0, 1.0)]), Some(0));
    }

    #[test]
    fn diverged_cells_are_skipped() {
        let mut bad = cell(0.1, 0.0, 0.0);
        bad.status = CellStatus::Diverged {
            iteration: 3,
            reason: "boom".into(),
        };
        assert_eq!(select_cell(&[bad.clone(), cell(0.01, 5.0, 1.0)]), Some(1));
        assert_eq!(select_cell(&[bad]), None);
    }
}
