//! Learn an input-dependent noise level τ(x) jointly with σ(x).

use nsgp::data::{synth_generate, Field, Standardizer, SyntheticSpec};
use nsgp::kernels::{KernelKind, Smoothness};
use nsgp::linalg::DenseMatrix;
use nsgp::training::{build_model, fit, Approximation, GVariant, ModelSpec, TrainConfig};

fn main() -> nsgp::Result<()> {
    let tau = Field::Linear {
        intercept: 0.02,
        slope: 0.5,
        axis: 0,
    };
    let data = synth_generate(&SyntheticSpec {
        n: 600,
        d: 1,
        sigma: Field::Constant { value: 1.0 },
        tau: tau.clone(),
        lengthscale: Field::Constant { value: 0.2 },
        nu: Smoothness::Half,
        seed: 8,
    })?;
    let ds = &data.dataset;
    let st = Standardizer::fit(&ds.x, &ds.y)?;
    let (x, y) = (st.transform_x(&ds.x)?, st.transform_y(&ds.y));

    let spec = ModelSpec {
        kind: KernelKind::NonstatVarianceNoise,
        ..Default::default()
    };
    let model = build_model(&spec, &GVariant::shallow(50), Approximation::Exact, 0, &x, &y)?;
    let config = TrainConfig {
        max_iters: 4000,
        approximation: Approximation::Exact,
        ..Default::default()
    };
    let out = fit(model, &x, &y, None, &config, 0.01)?;

    let grid = DenseMatrix::from_fn(6, 1, |i, _| i as f64 / 5.0);
    let ns = out.model.nonstat_values(&st.transform_x(&grid)?)?.expect("network outputs");
    let tau_hat = ns.tau.expect("noise output");
    println!("   x   τ true   τ fitted");
    for i in 0..grid.rows() {
        let xi = grid[(i, 0)];
        println!("{xi:4.1}   {:.3}    {:.3}", tau.eval(&[xi]), tau_hat[i] * st.target_std);
    }
    Ok(())
}
