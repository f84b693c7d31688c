//! Independent reference implementations used to check the library.
#![allow(dead_code)]

use std::f64::consts::PI;

use nsgp::gp::GpModel;
use nsgp::kernels::{KernelKind, Smoothness, StationaryParams};
use nsgp::linalg::DenseMatrix;
use nsgp::network::{NetworkSpec, OutputLink, ParamNetwork};
use nsgp::training::{pack_params, unpack_params};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>())
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| normal(rng)).collect()
}

pub fn to_rows(m: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// Inverse by Gauss–Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        let p = m[col][col];
        assert!(p.abs() > 1e-300, "singular matrix");
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// `log |det A|` by LU with partial pivoting.
pub fn lu_log_abs_det(a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut m = a.to_vec();
    let mut acc = 0.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, piv);
        let p = m[col][col];
        acc += p.abs().ln();
        for r in col + 1..n {
            let f = m[r][col] / p;
            for c in col..n {
                m[r][c] -= f * m[col][c];
            }
        }
    }
    acc
}

pub fn mat_vec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

pub fn mat_mul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    (0..n)
        .map(|i| (0..m).map(|j| (0..k).map(|t| a[i][t] * b[t][j]).sum()).collect())
        .collect()
}

pub fn transpose(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Negative log-density of `N(mean, cov)` at `y` using an explicit inverse.
pub fn mvn_nll(y: &[f64], mean: &[f64], cov: &[Vec<f64>]) -> f64 {
    let n = y.len();
    let r: Vec<f64> = y.iter().zip(mean).map(|(a, b)| a - b).collect();
    let inv = gauss_jordan_inverse(cov);
    let quad: f64 = r.iter().zip(mat_vec(&inv, &r)).map(|(a, b)| a * b).sum();
    0.5 * quad + 0.5 * lu_log_abs_det(cov) + 0.5 * n as f64 * (2.0 * PI).ln()
}

/// `K_ν(x) = ∫₀^∞ exp(−x cosh t) cosh(νt) dt` by composite Simpson's rule.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    let upper = {
        // integrand below e^-40 of its peak beyond this point
        let mut t: f64 = 1.0;
        while x * t.cosh() - nu * t < 40.0 + x {
            t += 0.5;
        }
        t
    };
    let steps = 20_000;
    let h = upper / steps as f64;
    let f = |t: f64| (-x * t.cosh()).exp() * (nu * t).cosh();
    let mut s = f(0.0) + f(upper);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    s * h / 3.0
}

fn gamma_half_integer(nu: f64) -> f64 {
    // Γ(k + ½) = (2k)! √π / (4^k k!)
    let k = (nu - 0.5).round() as u32;
    let mut g = PI.sqrt();
    for j in 0..k {
        g *= j as f64 + 0.5;
    }
    g
}

/// Matérn correlation from its general Bessel form.
pub fn matern_bessel(r: f64, rho: f64, nu: f64) -> f64 {
    if r == 0.0 {
        return 1.0;
    }
    let z = (2.0 * nu).sqrt() * r / rho;
    2f64.powf(1.0 - nu) / gamma_half_integer(nu) * z.powf(nu) * bessel_k(nu, z)
}

/// Matérn correlation from textbook closed forms.
pub fn matern_closed(r: f64, rho: f64, nu: Smoothness) -> f64 {
    match nu {
        Smoothness::Half => (-r / rho).exp(),
        Smoothness::ThreeHalves => {
            let z = 3f64.sqrt() * r / rho;
            (1.0 + z) * (-z).exp()
        }
        Smoothness::FiveHalves => {
            let z = 5f64.sqrt() * r / rho;
            (1.0 + z + z * z / 3.0) * (-z).exp()
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Pointwise values of a model's network at `x` as (σ, second output).
pub fn network_values(model: &GpModel, x: &DenseMatrix) -> (Vec<f64>, Option<Vec<f64>>) {
    match &model.network {
        None => (vec![model.stationary.sigma2().sqrt(); x.rows()], None),
        Some(net) => {
            let out = net.evaluate(x).unwrap();
            let s = out.col(0);
            let second = (out.cols() > 1).then(|| out.col(1));
            (s, second)
        }
    }
}

/// Kernel matrix written straight from the covariance definitions.
pub fn oracle_kernel(model: &GpModel, x1: &DenseMatrix, x2: &DenseMatrix) -> Vec<Vec<f64>> {
    let p = &model.stationary;
    let (s1, o1) = network_values(model, x1);
    let (s2, o2) = network_values(model, x2);
    (0..x1.rows())
        .map(|i| {
            (0..x2.rows())
                .map(|j| {
                    let r = dist(x1.row(i), x2.row(j));
                    match model.kind {
                        KernelKind::Stationary => p.sigma2() * matern_closed(r, p.rho(), p.nu),
                        KernelKind::NonstatVariance | KernelKind::NonstatVarianceNoise => {
                            s1[i] * s2[j] * matern_closed(r, p.rho(), p.nu)
                        }
                        KernelKind::NonstatVarianceLengthscale1d => {
                            let (a, b) = (o1.as_ref().unwrap()[i], o2.as_ref().unwrap()[j]);
                            let q = a * a + b * b;
                            s1[i] * s2[j] * (2.0 * a * b / q).sqrt() * matern_closed(r * r / q.sqrt(), p.rho(), p.nu)
                        }
                    }
                })
                .collect()
        })
        .collect()
}

pub fn oracle_noise(model: &GpModel, x: &DenseMatrix) -> Vec<f64> {
    match model.kind {
        KernelKind::NonstatVarianceNoise => network_values(model, x).1.unwrap().iter().map(|t| t * t).collect(),
        _ => vec![model.stationary.tau2(); x.rows()],
    }
}

/// Exact NLL through the dense density oracle.
pub fn oracle_nll_exact(model: &GpModel, x: &DenseMatrix, y: &[f64]) -> f64 {
    let mut k = oracle_kernel(model, x, x);
    for (i, d) in oracle_noise(model, x).into_iter().enumerate() {
        k[i][i] += d;
    }
    mvn_nll(y, &vec![model.mean_const; y.len()], &k)
}

/// Dense `Q = K_nm K_mm⁻¹ K_mn`.
pub fn oracle_q(model: &GpModel, a: &DenseMatrix, b: &DenseMatrix) -> Vec<Vec<f64>> {
    let z = model.inducing.as_ref().unwrap();
    let kaz = oracle_kernel(model, a, z);
    let kzb = oracle_kernel(model, z, b);
    let kzz_inv = gauss_jordan_inverse(&oracle_kernel(model, z, z));
    mat_mul(&mat_mul(&kaz, &kzz_inv), &kzb)
}

pub fn oracle_nll_sor(model: &GpModel, x: &DenseMatrix, y: &[f64]) -> f64 {
    let mut q = oracle_q(model, x, x);
    for (i, d) in oracle_noise(model, x).into_iter().enumerate() {
        q[i][i] += d.max(1e-6);
    }
    mvn_nll(y, &vec![model.mean_const; y.len()], &q)
}

/// Posterior mean and latent variance from the textbook formulas with an
/// explicit inverse; `sparse` replaces every `K` by `Q`.
pub fn oracle_predict(
    model: &GpModel,
    x: &DenseMatrix,
    y: &[f64],
    xs: &DenseMatrix,
    sparse: bool,
) -> (Vec<f64>, Vec<f64>) {
    let k = |a: &DenseMatrix, b: &DenseMatrix| {
        if sparse {
            oracle_q(model, a, b)
        } else {
            oracle_kernel(model, a, b)
        }
    };
    let mut kxx = k(x, x);
    for (i, d) in oracle_noise(model, x).into_iter().enumerate() {
        kxx[i][i] += if sparse { d.max(1e-6) } else { d };
    }
    let inv = gauss_jordan_inverse(&kxx);
    let ksx = k(xs, x);
    let kss = k(xs, xs);
    let r: Vec<f64> = y.iter().map(|v| v - model.mean_const).collect();
    let w = mat_vec(&inv, &r);
    let mean = mat_vec(&ksx, &w).into_iter().map(|v| v + model.mean_const).collect();
    let a = mat_mul(&ksx, &inv);
    let var = (0..xs.rows())
        .map(|i| kss[i][i] - (0..x.rows()).map(|j| a[i][j] * ksx[i][j]).sum::<f64>())
        .collect();
    (mean, var)
}

/// Sign of every hidden pre-activation of the model's network at the rows of
/// `x` and any inducing points, recomputed from the weights.
pub fn relu_pattern(model: &GpModel, x: &DenseMatrix) -> Vec<bool> {
    let Some(net) = &model.network else {
        return Vec::new();
    };
    let mut inputs: Vec<Vec<f64>> = to_rows(x);
    if let Some(z) = &model.inducing {
        inputs.extend(to_rows(z));
    }
    let layers = &net.weights.layers;
    let mut pattern = Vec::new();
    for row in inputs {
        let mut a = row;
        for layer in &layers[..layers.len() - 1] {
            let z: Vec<f64> = (0..layer.weights.cols())
                .map(|j| layer.bias[j] + (0..a.len()).map(|k| a[k] * layer.weights[(k, j)]).sum::<f64>())
                .collect();
            pattern.extend(z.iter().map(|v| *v > 0.0));
            a = z.into_iter().map(|v| v.max(0.0)).collect();
        }
    }
    pattern
}

/// Steps tried by [`smooth_finite_difference`], largest first.
pub const FD_STEPS: [f64; 5] = [1e-3, 3e-4, 1e-4, 3e-5, 1e-5];

/// Fourth-order central difference of `f` over the model's packed
/// parameters. Each component uses the largest step whose stencil keeps
/// every ReLU on the same side, so no kink falls inside the stencil.
pub fn smooth_finite_difference(model: &GpModel, x: &DenseMatrix, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let p = pack_params(model);
    let base = relu_pattern(model, x);
    let pattern_at = |q: &[f64]| {
        let mut m = model.clone();
        unpack_params(&mut m, q).unwrap();
        relu_pattern(&m, x)
    };
    (0..p.len())
        .map(|i| {
            let shifted = |delta: f64| {
                let mut q = p.clone();
                q[i] += delta;
                q
            };
            let h = FD_STEPS
                .into_iter()
                .find(|&h| [2.0 * h, h, -h, -2.0 * h].iter().all(|&d| pattern_at(&shifted(d)) == base))
                .unwrap_or(FD_STEPS[FD_STEPS.len() - 1]);
            (-f(&shifted(2.0 * h)) + 8.0 * f(&shifted(h)) - 8.0 * f(&shifted(-h)) + f(&shifted(-2.0 * h))) / (12.0 * h)
        })
        .collect()
}

/// Same objective as the library, re-evaluated at a packed parameter vector.
pub fn nll_at(model: &GpModel, x: &DenseMatrix, y: &[f64], flat: &[f64]) -> f64 {
    let mut m = model.clone();
    unpack_params(&mut m, flat).unwrap();
    nsgp::gp::nll(&m, x, y).unwrap()
}

pub fn grad_close(analytic: f64, numeric: f64, rel: f64, abs: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= abs || diff <= rel * analytic.abs().max(numeric.abs())
}

/// Random model of the given kind with perturbed network weights.
pub fn random_model(
    kind: KernelKind,
    link: OutputLink,
    d: usize,
    hidden: Vec<usize>,
    nu: Smoothness,
    seed: u64,
) -> GpModel {
    let mut r = rng(seed ^ 0xabcdef);
    let stationary = StationaryParams {
        log_sigma2: 0.3 * normal(&mut r),
        // The lengthscale kernel at ν = ½ is Gaussian-like in x − x′, so a
        // short ρ keeps its inducing Gram well conditioned.
        log_rho: if kind.has_nonstat_lengthscale() { (0.05f64).ln() } else { -0.5 } + 0.3 * normal(&mut r),
        log_tau2: (0.1f64).ln() + 0.3 * normal(&mut r),
        nu,
    };
    let mean = 0.2 * normal(&mut r);
    if kind.is_stationary() {
        return GpModel::stationary(stationary, mean);
    }
    let spec = NetworkSpec::new(d, hidden, kind.network_outputs()).with_link(link);
    let mut net = ParamNetwork::init(spec, seed);
    let flat: Vec<f64> = net.weights.to_flat().iter().map(|w| w + 0.3 * normal(&mut r)).collect();
    net.weights.set_from_flat(&flat).unwrap();
    let model = GpModel::nonstationary(kind, stationary, net, mean).unwrap();
    // keep the packing in sync with the model
    let mut m = model.clone();
    unpack_params(&mut m, &pack_params(&model)).unwrap();
    m
}

pub const ALL_KINDS: [KernelKind; 4] = [
    KernelKind::Stationary,
    KernelKind::NonstatVariance,
    KernelKind::NonstatVarianceNoise,
    KernelKind::NonstatVarianceLengthscale1d,
];

pub fn input_dim(kind: KernelKind, default: usize) -> usize {
    if kind.has_nonstat_lengthscale() {
        1
    } else {
        default
    }
}
