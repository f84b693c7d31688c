mod common;

use common::*;
use nsgp::data::{make_split, Dataset};
use nsgp::gp::{nll, predict_exact};
use nsgp::kernels::{kernel_matrix, KernelKind, Smoothness};
use nsgp::linalg::DenseMatrix;
use nsgp::metrics::log_score;
use nsgp::network::OutputLink;
use nsgp::training::{adam_step, AdamState};
use proptest::prelude::*;

const KINDS: [KernelKind; 3] = [KernelKind::Stationary, KernelKind::NonstatVariance, KernelKind::NonstatVarianceNoise];

fn nu_of(i: usize) -> Smoothness {
    [Smoothness::Half, Smoothness::ThreeHalves, Smoothness::FiveHalves][i % 3]
}

fn setup(seed: u64, n: usize, d: usize) -> (DenseMatrix, Vec<f64>) {
    let mut r = rng(seed);
    (uniform_matrix(&mut r, n, d), normal_vec(&mut r, n))
}

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(48)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn nll_is_invariant_to_row_order(seed in 0u64..10_000, k in 0usize..3, nu in 0usize..3, sparse: bool) {
        let (x, y) = setup(seed, 14, 2);
        let mut model = random_model(KINDS[k], OutputLink::Softplus, 2, vec![3], nu_of(nu), seed);
        if sparse {
            model = model.with_inducing(DenseMatrix::from_fn(4, 2, |i, j| (i as f64 + 0.5) / 4.0 + 0.1 * j as f64));
        }
        let mut perm: Vec<usize> = (0..14).collect();
        perm.reverse();
        perm.swap(0, (seed % 14) as usize);
        let xp = x.select_rows(&perm);
        let yp: Vec<f64> = perm.iter().map(|&i| y[i]).collect();
        let (a, b) = (nll(&model, &x, &y).unwrap(), nll(&model, &xp, &yp).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn far_training_points_do_not_move_the_posterior(seed in 0u64..10_000, k in 0usize..2, yf in -5.0f64..5.0) {
        let (x, y) = setup(seed, 10, 1);
        let model = random_model(KINDS[k], OutputLink::Softplus, 1, vec![3], Smoothness::Half, seed);
        let rho = model.stationary.rho();
        let xs = DenseMatrix::from_fn(5, 1, |i, _| i as f64 / 4.0);
        let base = predict_exact(&model, &x, &y, &xs, false).unwrap();
        let far = 1.0 + 100.0 * rho;
        let x2 = x.vstack(&DenseMatrix::from_rows(&[[far]])).unwrap();
        let mut y2 = y.clone();
        y2.push(yf);
        let moved = predict_exact(&model, &x2, &y2, &xs, false).unwrap();
        for i in 0..5 {
            prop_assert!((base.mean[i] - moved.mean[i]).abs() < 1e-6);
            prop_assert!((base.latent_variance[i] - moved.latent_variance[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn scaling_the_output_scale_and_residuals_shifts_nll_by_n_log_a(
        seed in 0u64..10_000, noise: bool, a in 0.2f64..5.0,
    ) {
        let kind = if noise { KernelKind::NonstatVarianceNoise } else { KernelKind::NonstatVariance };
        let (x, y) = setup(seed, 12, 2);
        let model = random_model(kind, OutputLink::Exp, 2, vec![3], Smoothness::ThreeHalves, seed);
        let mut scaled = model.clone();
        let net = scaled.network.as_mut().unwrap();
        // exp(z + ln a) = a·exp(z) on every output column
        for b in &mut net.weights.layers.last_mut().unwrap().bias {
            *b += a.ln();
        }
        if !noise {
            scaled.stationary.log_tau2 += 2.0 * a.ln();
        }
        let mu = model.mean_const;
        let ys: Vec<f64> = y.iter().map(|v| mu + a * (v - mu)).collect();
        let base = nll(&model, &x, &y).unwrap();
        let got = nll(&scaled, &x, &ys).unwrap();
        let want = base + 12.0 * a.ln();
        prop_assert!((got - want).abs() <= 1e-8 * want.abs().max(1.0), "{got} vs {want}");
    }

    #[test]
    fn posterior_covariance_is_symmetric_psd(seed in 0u64..10_000, k in 0usize..3, nu in 0usize..3) {
        let (x, y) = setup(seed, 10, 2);
        let model = random_model(KINDS[k], OutputLink::Softplus, 2, vec![3], nu_of(nu), seed);
        let mut r = rng(seed + 1);
        let xs = uniform_matrix(&mut r, 6, 2);
        let cov = predict_exact(&model, &x, &y, &xs, true).unwrap().covariance.unwrap();
        let trace: f64 = cov.diag().iter().sum();
        for i in 0..6 {
            prop_assert!(cov[(i, i)] >= 0.0);
            for j in 0..6 {
                prop_assert!((cov[(i, j)] - cov[(j, i)]).abs() <= 1e-12 * trace.max(1.0));
            }
        }
        for _ in 0..10 {
            let v = normal_vec(&mut r, 6);
            let q: f64 = (0..6).map(|i| v[i] * (0..6).map(|j| cov[(i, j)] * v[j]).sum::<f64>()).sum();
            prop_assert!(q >= -1e-9 * trace.max(1.0));
        }
    }

    #[test]
    fn kernel_matrices_are_symmetric_with_variance_diagonal(seed in 0u64..10_000, k in 0usize..3, nu in 0usize..3) {
        let (x, _) = setup(seed, 8, 3);
        let model = random_model(KINDS[k], OutputLink::Softplus, 3, vec![2], nu_of(nu), seed);
        let ns = model.nonstat_values(&x).unwrap();
        let km = kernel_matrix(model.kind, &x, &x, &model.stationary, ns.as_ref(), ns.as_ref()).unwrap();
        for i in 0..8 {
            let var = ns.as_ref().map_or(model.stationary.sigma2(), |n| n.sigma[i] * n.sigma[i]);
            prop_assert!((km[(i, i)] - var).abs() <= 1e-12 * var);
            for j in 0..8 {
                prop_assert_eq!(km[(i, j)], km[(j, i)]);
            }
        }
    }

    #[test]
    fn log_score_adds_over_points(
        pts in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0, 0.01f64..10.0), 2..20),
        cut in 1usize..19,
    ) {
        let cut = cut.min(pts.len() - 1);
        let (y, (m, v)): (Vec<f64>, (Vec<f64>, Vec<f64>)) = pts.iter().map(|&(a, b, c)| (a, (b, c))).unzip();
        let whole = log_score(&y, &m, &v).unwrap();
        let parts = log_score(&y[..cut], &m[..cut], &v[..cut]).unwrap()
            + log_score(&y[cut..], &m[cut..], &v[cut..]).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-10 * whole.abs().max(1.0));
    }

    #[test]
    fn log_score_is_minimized_at_the_squared_residual(
        y in -10.0f64..10.0, m in -10.0f64..10.0, factor in 0.1f64..10.0,
    ) {
        let r2 = (y - m) * (y - m);
        prop_assume!(r2 > 1e-6 && (factor - 1.0).abs() > 1e-3);
        let at = log_score(&[y], &[m], &[r2]).unwrap();
        let off = log_score(&[y], &[m], &[r2 * factor]).unwrap();
        prop_assert!(at < off);
    }

    #[test]
    fn split_sizes_follow_the_floor_rule(n in 10usize..6000, seed: u64) {
        let plan = make_split(n, seed).unwrap();
        let (train, val, test) = plan.sizes();
        prop_assert_eq!(test, n / 10);
        prop_assert_eq!(val, (n - n / 10) / 5);
        prop_assert_eq!(train + val + test, n);
        let mut all: Vec<usize> = plan
            .train_indices
            .iter()
            .chain(&plan.val_indices)
            .chain(&plan.test_indices)
            .copied()
            .collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn dedup_is_idempotent(rows in prop::collection::vec((0u8..4, 0u8..4, 0u8..3), 1..60)) {
        let x = DenseMatrix::from_fn(rows.len(), 2, |i, j| f64::from(if j == 0 { rows[i].0 } else { rows[i].1 }));
        let y = rows.iter().map(|r| f64::from(r.2)).collect();
        let ds = Dataset::new(vec!["a".into(), "b".into()], "y".into(), x, y).unwrap();
        let once = ds.dedup();
        prop_assert_eq!(once.dedup(), once.clone());
        let mut distinct = rows.clone();
        distinct.sort_unstable();
        distinct.dedup();
        prop_assert_eq!(once.n(), distinct.len());
    }

    #[test]
    fn first_adam_step_is_bounded_by_the_step_size(
        grads in prop::collection::vec(-1e6f64..1e6, 1..10), lr in 1e-4f64..1.0, scale in 1e-2f64..1e2,
    ) {
        let mut p = vec![0.0; grads.len()];
        adam_step(&mut p, &grads, &mut AdamState::new(grads.len()), lr).unwrap();
        let scaled: Vec<f64> = grads.iter().map(|g| g * scale).collect();
        let mut q = vec![0.0; grads.len()];
        adam_step(&mut q, &scaled, &mut AdamState::new(grads.len()), lr).unwrap();
        for (i, g) in grads.iter().enumerate() {
            prop_assert!(p[i].abs() <= lr * (1.0 + 1e-12));
            if g.abs() > 1e-2 {
                prop_assert!((p[i] - q[i]).abs() <= 1e-5 * lr);
            }
        }
    }
}
