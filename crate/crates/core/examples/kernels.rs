//! Matérn correlations and the kernel matrices of each kernel family.

use nsgp::gp::GpModel;
use nsgp::kernels::{kernel_matrix, unit_matern, KernelKind, Smoothness, StationaryParams};
use nsgp::linalg::DenseMatrix;
use nsgp::network::{NetworkSpec, OutputLink, ParamNetwork};

fn show(title: &str, k: &DenseMatrix) {
    println!("{title}");
    for i in 0..k.rows() {
        let row: Vec<String> = k.row(i).iter().map(|v| format!("{v:7.4}")).collect();
        println!("  {}", row.join(" "));
    }
}

fn main() -> nsgp::Result<()> {
    println!("unit Matérn correlation at ρ = 1");
    for r in [0.0, 0.25, 0.5, 1.0, 2.0] {
        let c: Vec<String> = [Smoothness::Half, Smoothness::ThreeHalves, Smoothness::FiveHalves]
            .iter()
            .map(|&nu| format!("{:.4}", unit_matern(r, 1.0, nu).0))
            .collect();
        println!("  r = {r:4}: ν=½ {}  ν=3/2 {}  ν=5/2 {}", c[0], c[1], c[2]);
    }

    let x = DenseMatrix::from_fn(4, 1, |i, _| i as f64 / 3.0);
    let params = StationaryParams {
        log_rho: (0.5f64).ln(),
        nu: Smoothness::Half,
        ..Default::default()
    };
    show("\nstationary", &kernel_matrix(KernelKind::Stationary, &x, &x, &params, None, None)?);

    for kind in [KernelKind::NonstatVariance, KernelKind::NonstatVarianceNoise, KernelKind::NonstatVarianceLengthscale1d] {
        // a linear network: σ(x) rises with x, the second output falls
        let outputs = kind.network_outputs();
        let spec = NetworkSpec::new(1, vec![], outputs).with_link(OutputLink::Softplus);
        let mut net = ParamNetwork::init(spec, 7);
        let w = net.weights.layers[0].weights.as_mut_slice();
        w[0] = 1.0;
        if outputs > 1 {
            w[1] = -1.0;
        }
        let model = GpModel::nonstationary(kind, params, net, 0.0)?;
        let ns = model.nonstat_values(&x)?;
        let k = kernel_matrix(kind, &x, &x, &params, ns.as_ref(), ns.as_ref())?;
        show(&format!("\n{kind}"), &k);
        let ns = ns.expect("nonstationary model");
        println!("  σ(x) = {:.3?}", ns.sigma);
        if let Some(tau) = ns.tau {
            println!("  τ(x) = {tau:.3?}");
        }
        if let Some(ell) = ns.ell {
            println!("  ℓ(x) = {ell:.3?}");
        }
    }
    Ok(())
}
