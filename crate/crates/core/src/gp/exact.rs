use std::f64::consts::PI;

use super::{
    check_data, clamp_covariance, clamp_variances, noise_variances, residuals, CoreEval, GpModel,
    PointwiseGradient, Posterior,
};
use crate::error::{Error, Result};
use crate::gradients::{backward_nonstat_noise, nll_grad_matrix};
use crate::kernels::{kernel_diag, kernel_matrix, kernel_matrix_backward, KernelKind, NonstatValues, StationaryParams};
use crate::linalg::{cholesky_jittered, dot, log_det, CholeskyFactor, DenseMatrix};

pub(crate) struct ExactFactor {
    pub factor: CholeskyFactor,
    pub alpha: Vec<f64>,
    pub nll: f64,
}

/// Factors `K + D` and evaluates the negative log marginal likelihood.
pub(crate) fn factor_exact(
    kind: KernelKind,
    params: &StationaryParams,
    mean: f64,
    x: &DenseMatrix,
    y: &[f64],
    ns: Option<&NonstatValues>,
) -> Result<ExactFactor> {
    check_data(x, y)?;
    let mut m = kernel_matrix(kind, x, x, params, ns, ns)?;
    let noise = noise_variances(kind, params, x.rows(), ns)?;
    m.add_diag(&noise);
    let factor = cholesky_jittered(&m)?;
    let r = residuals(y, mean);
    let alpha = factor.solve_vec(&r)?;
    let n = y.len() as f64;
    let nll = 0.5 * dot(&r, &alpha) + 0.5 * log_det(&factor) + 0.5 * n * (2.0 * PI).ln();
    Ok(ExactFactor { factor, alpha, nll })
}

pub(crate) fn exact_core(
    kind: KernelKind,
    params: &StationaryParams,
    mean: f64,
    x: &DenseMatrix,
    y: &[f64],
    ns: Option<&NonstatValues>,
    want_grad: bool,
) -> Result<CoreEval> {
    let ef = factor_exact(kind, params, mean, x, y, ns)?;
    let jitter = ef.factor.jitter_used();
    if !want_grad {
        return Ok(CoreEval {
            nll: ef.nll,
            jitter,
            grad: None,
        });
    }

    let g = nll_grad_matrix(&ef.factor, &ef.alpha)?;
    let kg = kernel_matrix_backward(kind, x, x, params, ns, ns, &g)?;
    let mut grad = PointwiseGradient {
        d_log_sigma2: kg.d_log_sigma2,
        d_log_rho: kg.d_log_rho,
        d_mean: -ef.alpha.iter().sum::<f64>(),
        ..Default::default()
    };
    // X appears on both sides of K(X, X).
    grad.d_sigma = sum_sides(&kg.d_sigma1, &kg.d_sigma2);
    grad.d_ell = sum_sides(&kg.d_ell1, &kg.d_ell2);
    if kind.has_nonstat_noise() {
        let tau = ns.and_then(|v| v.tau.as_deref()).expect("checked by noise_variances");
        grad.d_tau = backward_nonstat_noise(&g, tau)?;
    } else {
        let tau2 = params.tau2();
        grad.d_log_tau2 = g.diag().iter().sum::<f64>() * tau2;
    }
    Ok(CoreEval {
        nll: ef.nll,
        jitter,
        grad: Some(grad),
    })
}

fn sum_sides(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p + q).collect()
}

/// Exact negative log marginal likelihood of `y` under `model`.
pub fn nll_exact(model: &GpModel, x: &DenseMatrix, y: &[f64]) -> Result<f64> {
    model.validate(Some(x.cols()))?;
    let ns = model.nonstat_values(x)?;
    let ef = factor_exact(
        model.kind,
        &model.stationary,
        model.mean_const,
        x,
        y,
        ns.as_ref(),
    )?;
    Ok(ef.nll)
}

/// Exact posterior predictive distribution at `xstar` given training data.
pub fn predict_exact(
    model: &GpModel,
    x: &DenseMatrix,
    y: &[f64],
    xstar: &DenseMatrix,
    full_covariance: bool,
) -> Result<Posterior> {
    model.validate(Some(x.cols()))?;
    if xstar.cols() != x.cols() {
        return Err(Error::dims(x.cols(), xstar.cols()));
    }
    let (kind, params) = (model.kind, &model.stationary);
    let ns = model.nonstat_values(x)?;
    let ns_star = model.nonstat_values(xstar)?;
    let ef = factor_exact(kind, params, model.mean_const, x, y, ns.as_ref())?;

    // K(X, X*), one column per test point.
    let k_cross = kernel_matrix(kind, x, xstar, params, ns.as_ref(), ns_star.as_ref())?;
    let mean: Vec<f64> = k_cross
        .tr_matvec(&ef.alpha)?
        .into_iter()
        .map(|v| v + model.mean_const)
        .collect();
    let v = ef.factor.forward_solve(&k_cross)?;
    let prior = kernel_diag(kind, xstar, params, ns_star.as_ref())?;
    let m = xstar.rows();
    let mut latent: Vec<f64> = (0..m)
        .map(|j| prior[j] - (0..v.rows()).map(|i| v[(i, j)] * v[(i, j)]).sum::<f64>())
        .collect();
    clamp_variances(&mut latent);

    let covariance = if full_covariance {
        let k_star = kernel_matrix(kind, xstar, xstar, params, ns_star.as_ref(), ns_star.as_ref())?;
        let mut cov = k_star.sub(&v.transpose().matmul(&v)?)?;
        // symmetrize rounding
        for i in 0..m {
            for j in 0..i {
                let s = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = s;
                cov[(j, i)] = s;
            }
        }
        clamp_covariance(&mut cov);
        Some(cov)
    } else {
        None
    };

    let noise_variance = noise_variances(kind, params, m, ns_star.as_ref())?;
    Ok(Posterior {
        mean,
        latent_variance: latent,
        noise_variance,
        covariance,
    })
}
