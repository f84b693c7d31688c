//! Compare the analytic NLL gradient with central differences.

use nsgp::gp::{nll, GpModel};
use nsgp::gradients::grad_full;
use nsgp::kernels::{KernelKind, Smoothness, StationaryParams};
use nsgp::linalg::DenseMatrix;
use nsgp::network::{NetworkSpec, ParamNetwork};
use nsgp::training::{pack_params, unpack_params};

fn main() -> nsgp::Result<()> {
    let x = DenseMatrix::from_fn(10, 2, |i, j| ((i * 7 + j * 3) % 10) as f64 / 10.0);
    let y: Vec<f64> = (0..10).map(|i| (i as f64 * 0.9).sin()).collect();
    let params = StationaryParams {
        nu: Smoothness::ThreeHalves,
        ..Default::default()
    };
    let net = ParamNetwork::init(NetworkSpec::new(2, vec![3], 2), 4);
    let model = GpModel::nonstationary(KernelKind::NonstatVarianceNoise, params, net, 0.0)?;

    let analytic = grad_full(&model, &x, &y)?.to_flat();
    let p = pack_params(&model);
    let h = 1e-5;
    let mut worst = 0f64;
    for (i, a) in analytic.iter().enumerate() {
        let at = |delta: f64| -> nsgp::Result<f64> {
            let mut q = p.clone();
            q[i] += delta;
            let mut m = model.clone();
            unpack_params(&mut m, &q)?;
            nll(&m, &x, &y)
        };
        let numeric = (at(h)? - at(-h)?) / (2.0 * h);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(rel);
        println!("{i:2}: analytic {a:12.6e}  numeric {numeric:12.6e}");
    }
    println!("{} parameters, worst relative gap {worst:.1e}", analytic.len());
    Ok(())
}
