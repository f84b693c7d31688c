use serde::{Deserialize, Serialize};

use super::{adam_step, pack_params, unpack_params, AdamState};
use crate::error::{Error, Result};
use crate::gp::{predict, GpModel};
use crate::gradients::{evaluate, ExactBackend};
use crate::linalg::DenseMatrix;
use crate::metrics::EvalResult;

/// Consecutive failed iterations tolerated before a fit is abandoned.
pub const MAX_CONSECUTIVE_FAILURES: usize = 3;

/// Hidden-layer widths of the parameter network; empty means linear.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GVariant(pub Vec<usize>);

impl GVariant {
    pub fn linear() -> Self {
        Self(Vec::new())
    }

    pub fn shallow(width: usize) -> Self {
        Self(vec![width])
    }

    pub fn hidden(&self) -> &[usize] {
        &self.0
    }

    pub fn name(&self) -> String {
        if self.0.is_empty() {
            "linear".into()
        } else {
            let widths: Vec<String> = self.0.iter().map(|w| w.to_string()).collect();
            format!("hidden-{}", widths.join("-"))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Approximation {
    Exact,
    /// Subset of regressors on a random subset of the training inputs.
    Sor { inducing: usize },
}

impl Default for Approximation {
    fn default() -> Self {
        Approximation::Sor { inducing: 100 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub step_sizes: Vec<f64>,
    pub max_iters: usize,
    pub g_variants: Vec<GVariant>,
    pub seed: u64,
    /// Iterations between validation checkpoints.
    pub eval_every: usize,
    pub approximation: Approximation,
    /// Keep the checkpoint with the best validation log-score instead of the final iterate.
    pub best_iterate: bool,
    pub exact_backend: ExactBackend,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            step_sizes: vec![0.1, 0.01, 0.001],
            max_iters: 10_000,
            g_variants: vec![GVariant::linear(), GVariant::shallow(50)],
            seed: 0,
            eval_every: 500,
            approximation: Approximation::default(),
            best_iterate: true,
            exact_backend: ExactBackend::Auto,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.step_sizes.is_empty() {
            return bad("step_sizes is empty");
        }
        if self.step_sizes.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return bad("step sizes must be positive and finite");
        }
        if self.g_variants.is_empty() {
            return bad("g_variants is empty");
        }
        if self.g_variants.iter().any(|g| g.0.contains(&0)) {
            return bad("hidden layers need at least one unit");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive");
        }
        if let Approximation::Sor { inducing: 0 } = self.approximation {
            return bad("need at least one inducing point");
        }
        Ok(())
    }
}

/// Held-out data on the standardized scale; `target_scale` maps residuals
/// back to the original units for reporting.
#[derive(Clone, Copy, Debug)]
pub struct ValidationSet<'a> {
    pub x: &'a DenseMatrix,
    pub y: &'a [f64],
    pub target_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub iteration: usize,
    pub nll: f64,
    pub val_log_score: Option<f64>,
    pub val_mse: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JitterSummary {
    /// Objective evaluations whose factorization needed jitter.
    pub iterations_with_jitter: usize,
    pub max_jitter: f64,
    /// Evaluations that failed and were rolled back.
    pub failed_iterations: usize,
}

#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub model: GpModel,
    /// Objective at every successful iteration, starting from the initial parameters.
    pub nll_trace: Vec<f64>,
    pub checkpoints: Vec<Checkpoint>,
    /// Iteration whose parameters were kept.
    pub best_iteration: usize,
    pub jitter: JitterSummary,
}

impl FitOutcome {
    /// Validation metrics of the returned parameters.
    pub fn selected_checkpoint(&self) -> Option<&Checkpoint> {
        self.checkpoints.iter().find(|c| c.iteration == self.best_iteration)
    }
}

fn recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::NotPositiveDefinite { .. }
            | Error::SingularInducingGram
            | Error::NonFiniteOutput { .. }
            | Error::NonFiniteGradient(_)
            | Error::NonFiniteUpdate(_)
            | Error::Diverged { .. }
    )
}

/// Metrics of `model`'s predictions at `(x, y)` in original target units.
pub fn score(
    model: &GpModel,
    train_x: &DenseMatrix,
    train_y: &[f64],
    x: &DenseMatrix,
    y: &[f64],
    target_scale: f64,
) -> Result<EvalResult> {
    let post = predict(model, train_x, train_y, x, false)?;
    let s = target_scale;
    let y_scaled: Vec<f64> = y.iter().map(|v| v * s).collect();
    let m_scaled: Vec<f64> = post.mean.iter().map(|v| v * s).collect();
    let v_scaled: Vec<f64> = post.predictive_variance().iter().map(|v| v * s * s).collect();
    EvalResult::compute(&y_scaled, &m_scaled, &v_scaled)
}

/// Full-batch Adam on the model's objective for `config.max_iters` steps at
/// step size `lr`.
pub fn fit(
    mut model: GpModel,
    x: &DenseMatrix,
    y: &[f64],
    validation: Option<&ValidationSet<'_>>,
    config: &TrainConfig,
    lr: f64,
) -> Result<FitOutcome> {
    config.validate()?;
    model.validate(Some(x.cols()))?;
    if y.is_empty() {
        return Err(Error::TooFewRows { needed: 1, got: 0 });
    }

    let mut params = pack_params(&model);
    let mut state = AdamState::new(params.len());
    let mut last_good = params.clone();
    let mut failures = 0;
    let mut trace = Vec::with_capacity(config.max_iters + 1);
    let mut checkpoints = Vec::new();
    let mut jitter = JitterSummary::default();
    let mut best: Option<(f64, usize, Vec<f64>)> = None;

    for it in 0..=config.max_iters {
        unpack_params(&mut model, &params)?;
        let last = it == config.max_iters;
        let step = evaluate(&model, x, y, config.exact_backend, !last).and_then(|ev| {
            last_good.clone_from(&params);
            if !last {
                let g = ev.grad.as_ref().expect("gradient requested").to_flat();
                adam_step(&mut params, &g, &mut state, lr)?;
            }
            Ok(ev)
        });
        let ev = match step {
            Ok(ev) => ev,
            Err(e) if recoverable(&e) => {
                failures += 1;
                jitter.failed_iterations += 1;
                log::debug!("iteration {it}: {e}");
                if failures >= MAX_CONSECUTIVE_FAILURES {
                    return Err(Error::Diverged {
                        iteration: it,
                        reason: e.to_string(),
                    });
                }
                params = last_good.clone();
                state.reset();
                continue;
            }
            Err(e) => return Err(e),
        };
        failures = 0;
        trace.push(ev.nll);
        if ev.jitter > 0.0 {
            jitter.iterations_with_jitter += 1;
            jitter.max_jitter = jitter.max_jitter.max(ev.jitter);
        }

        if it % config.eval_every == 0 || last {
            // `model` still holds the parameters that produced `ev`.
            let (ls, mse) = match validation {
                Some(v) => match score(&model, x, y, v.x, v.y, v.target_scale) {
                    Ok(r) => (Some(r.log_score), Some(r.mse)),
                    Err(e) => {
                        log::warn!("validation failed at iteration {it}: {e}");
                        (None, None)
                    }
                },
                None => (None, None),
            };
            if let Some(ls) = ls.filter(|v| v.is_finite()) {
                if best.as_ref().is_none_or(|(b, _, _)| ls < *b) {
                    best = Some((ls, it, pack_params(&model)));
                }
            }
            checkpoints.push(Checkpoint {
                iteration: it,
                nll: ev.nll,
                val_log_score: ls,
                val_mse: mse,
            });
        }
    }

    let best_iteration = match best {
        Some((_, it, p)) if config.best_iterate => {
            unpack_params(&mut model, &p)?;
            it
        }
        _ => {
            unpack_params(&mut model, &last_good)?;
            config.max_iters
        }
    };
    Ok(FitOutcome {
        model,
        nll_trace: trace,
        checkpoints,
        best_iteration,
        jitter,
    })
}
