//! Save a fitted model, reload it, and predict on raw inputs.

use nsgp::data::{load_model, make_split, save_model, synth_generate, Field, SavedModel, SplitData, SyntheticSpec};
use nsgp::kernels::Smoothness;
use nsgp::linalg::DenseMatrix;
use nsgp::training::{build_model, fit, Approximation, GVariant, ModelSpec, TrainConfig};

fn main() -> nsgp::Result<()> {
    let data = synth_generate(&SyntheticSpec {
        n: 200,
        d: 2,
        sigma: Field::exp_sin(),
        tau: Field::Constant { value: 0.1 },
        lengthscale: Field::Constant { value: 0.3 },
        nu: Smoothness::FiveHalves,
        seed: 6,
    })?;
    let ds = &data.dataset;
    let split = SplitData::new(ds, &make_split(ds.n(), 0)?)?;
    let approx = Approximation::Sor { inducing: 40 };
    let model = build_model(&ModelSpec::default(), &GVariant::linear(), approx, 0, &split.train_x, &split.train_y)?;
    let config = TrainConfig {
        max_iters: 300,
        approximation: approx,
        ..Default::default()
    };
    let out = fit(model, &split.train_x, &split.train_y, None, &config, 0.01)?;

    let saved = SavedModel::new(
        out.model,
        split.standardizer.clone(),
        split.train_x.clone(),
        split.train_y.clone(),
        ds.feature_names.clone(),
        ds.target_name.clone(),
    );
    let path = std::env::temp_dir().join("nsgp-example-model.json");
    save_model(&path, &saved)?;
    let loaded = load_model(&path)?;
    println!("wrote and reloaded {}", path.display());

    let raw = DenseMatrix::from_rows(&[[0.2, 0.8], [0.5, 0.5], [0.9, 0.1]]);
    let before = saved.predict_raw(&raw)?;
    let after = loaded.predict_raw(&raw)?;
    for i in 0..raw.rows() {
        println!(
            "{:?}: mean {:.4} (reloaded {:.4}), variance {:.4}",
            raw.row(i),
            before.mean[i],
            after.mean[i],
            before.predictive_variance()[i]
        );
    }
    assert_eq!(before, after);
    std::fs::remove_file(&path).ok();
    Ok(())
}
