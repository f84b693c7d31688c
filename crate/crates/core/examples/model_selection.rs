//! Seeded 72/18/10 split and the step-size × network grid search.

use nsgp::data::{make_split, synth_generate, Field, SplitData, SyntheticSpec};
use nsgp::kernels::{KernelKind, Smoothness};
use nsgp::training::{model_select, Approximation, CellStatus, ModelSpec, TrainConfig};

fn main() -> nsgp::Result<()> {
    let data = synth_generate(&SyntheticSpec {
        n: 500,
        d: 1,
        sigma: Field::exp_sin(),
        tau: Field::Linear {
            intercept: 0.02,
            slope: 0.4,
            axis: 0,
        },
        lengthscale: Field::Constant { value: 0.2 },
        nu: Smoothness::Half,
        seed: 12,
    })?;
    let plan = make_split(data.dataset.n(), 0)?;
    let (train, val, test) = plan.sizes();
    println!("split: {train} train, {val} validation, {test} test");
    let split = SplitData::new(&data.dataset, &plan)?;

    let config = TrainConfig {
        max_iters: 500,
        eval_every: 100,
        approximation: Approximation::Sor { inducing: 50 },
        ..Default::default()
    };
    for kind in [KernelKind::Stationary, KernelKind::NonstatVariance, KernelKind::NonstatVarianceNoise] {
        let spec = ModelSpec {
            kind,
            ..Default::default()
        };
        let (_, report) = model_select(&split, &spec, &config)?;
        println!("\n{kind}");
        for c in &report.cells {
            let status = match &c.status {
                CellStatus::Completed => format!("val log-score {:.2}", c.val_log_score.unwrap_or(f64::NAN)),
                CellStatus::Diverged { iteration, .. } => format!("diverged at {iteration}"),
            };
            println!("  lr {:<6} g {:<10} {status}", c.step_size, c.g_variant.name());
        }
        println!(
            "  selected lr {} g {}: test MSE {:.4}, log-score {:.2}",
            report.selected_step_size,
            report.selected_g_variant.name(),
            report.test.mse,
            report.test.log_score
        );
    }
    Ok(())
}
