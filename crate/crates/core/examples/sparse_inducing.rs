//! Subset-of-regressors training on a larger 2-D dataset.

use std::time::Instant;

use nsgp::data::{make_split, synth_generate, Field, SplitData, SyntheticSpec};
use nsgp::gp::nll;
use nsgp::kernels::Smoothness;
use nsgp::training::{build_model, fit, score, Approximation, GVariant, ModelSpec, TrainConfig};

fn main() -> nsgp::Result<()> {
    let data = synth_generate(&SyntheticSpec {
        n: 1500,
        d: 2,
        sigma: Field::exp_sin(),
        tau: Field::Constant { value: 0.1 },
        lengthscale: Field::Constant { value: 0.3 },
        nu: Smoothness::ThreeHalves,
        seed: 4,
    })?;
    let split = SplitData::new(&data.dataset, &make_split(data.dataset.n(), 0)?)?;
    let (x, y) = (&split.train_x, &split.train_y);
    println!("{} training rows", x.rows());

    for m in [25, 100] {
        let approx = Approximation::Sor { inducing: m };
        let model = build_model(&ModelSpec::default(), &GVariant::shallow(20), approx, 0, x, y)?;
        let config = TrainConfig {
            max_iters: 300,
            approximation: approx,
            ..Default::default()
        };
        let t = Instant::now();
        let out = fit(model, x, y, None, &config, 0.01)?;
        let secs = t.elapsed().as_secs_f64();
        let test = score(&out.model, x, y, &split.test_x, &split.test_y, split.standardizer.target_std)?;
        println!(
            "m = {m:3}: final SoR NLL {:.1}, {secs:.1}s, test MSE {:.4}, log-score {:.1}",
            nll(&out.model, x, y)?,
            test.mse,
            test.log_score
        );
    }
    Ok(())
}
