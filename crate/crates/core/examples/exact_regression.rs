//! Fit a nonstationary-variance GP with exact inference and predict.

use nsgp::data::{synth_generate, Field, Standardizer, SyntheticSpec};
use nsgp::gp::predict;
use nsgp::kernels::{KernelKind, Smoothness};
use nsgp::linalg::DenseMatrix;
use nsgp::training::{build_model, fit, Approximation, GVariant, ModelSpec, TrainConfig};

fn main() -> nsgp::Result<()> {
    let data = synth_generate(&SyntheticSpec {
        n: 300,
        d: 1,
        sigma: Field::exp_sin(),
        tau: Field::Constant { value: 0.05 },
        lengthscale: Field::Constant { value: 0.2 },
        nu: Smoothness::Half,
        seed: 1,
    })?;
    let ds = &data.dataset;
    let st = Standardizer::fit(&ds.x, &ds.y)?;
    let (x, y) = (st.transform_x(&ds.x)?, st.transform_y(&ds.y));

    let config = TrainConfig {
        max_iters: 2000,
        approximation: Approximation::Exact,
        ..Default::default()
    };
    for kind in [KernelKind::Stationary, KernelKind::NonstatVariance] {
        let spec = ModelSpec {
            kind,
            ..Default::default()
        };
        let model = build_model(&spec, &GVariant::shallow(50), Approximation::Exact, 0, &x, &y)?;
        let out = fit(model, &x, &y, None, &config, 0.01)?;
        println!(
            "{kind}: NLL {:.2} -> {:.2}",
            out.nll_trace[0],
            out.nll_trace.last().unwrap()
        );

        let grid = DenseMatrix::from_fn(5, 1, |i, _| 0.1 + 0.2 * i as f64);
        let post = predict(&out.model, &x, &y, &st.transform_x(&grid)?, false)?;
        let mean = st.inverse_y(&post.mean);
        let var = st.inverse_variance(&post.predictive_variance());
        for i in 0..grid.rows() {
            println!("  x = {:.1}: mean {:7.3}, sd {:.3}", grid[(i, 0)], mean[i], var[i].sqrt());
        }
    }
    Ok(())
}
