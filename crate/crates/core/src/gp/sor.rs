//! Subset-of-regressors approximation: the kernel matrix is replaced by
//! `Q = K_nm K_mm⁻¹ K_mn` and every solve goes through the Woodbury identity
//! with `A = K_mm + K_mn D⁻¹ K_nm`, so the cost is `O(n m²)`.

use std::f64::consts::PI;

use super::{
    check_data, clamp_covariance, clamp_variances, noise_variances, residuals, CoreEval, GpModel,
    PointwiseGradient, Posterior,
};
use crate::error::{Error, Result};
use crate::kernels::{kernel_matrix, kernel_matrix_backward, KernelKind, NonstatValues, StationaryParams};
use crate::linalg::{cholesky_jittered, dot, log_det, solve_psd, CholeskyFactor, DenseMatrix};

/// Lower bound applied to every noise variance in low-rank mode.
pub const SOR_NOISE_FLOOR: f64 = 1e-6;

struct SorFactor {
    kmm_factor: CholeskyFactor,
    knm: DenseMatrix,
    d: Vec<f64>,
    floored: Vec<bool>,
    a_factor: CholeskyFactor,
    /// `A⁻¹ K_mn D⁻¹ r`
    c: Vec<f64>,
    /// `(Q + D)⁻¹ r`
    alpha: Vec<f64>,
    nll: f64,
}

#[allow(clippy::too_many_arguments)]
fn factor_sor(
    kind: KernelKind,
    params: &StationaryParams,
    mean: f64,
    x: &DenseMatrix,
    y: &[f64],
    z: &DenseMatrix,
    ns_x: Option<&NonstatValues>,
    ns_z: Option<&NonstatValues>,
) -> Result<SorFactor> {
    check_data(x, y)?;
    if z.cols() != x.cols() {
        return Err(Error::dims(format!("{}-dimensional inducing points", x.cols()), z.cols()));
    }
    if z.rows() == 0 {
        return Err(Error::InvalidConfig("no inducing points".into()));
    }
    let mut kmm = kernel_matrix(kind, z, z, params, ns_z, ns_z)?;
    let kmm_factor = cholesky_jittered(&kmm).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::SingularInducingGram,
        other => other,
    })?;
    kmm.add_scalar_diag(kmm_factor.jitter_used());

    let knm = kernel_matrix(kind, x, z, params, ns_x, ns_z)?;
    let raw = noise_variances(kind, params, x.rows(), ns_x)?;
    let floored: Vec<bool> = raw.iter().map(|&v| v < SOR_NOISE_FLOOR).collect();
    let d: Vec<f64> = raw.iter().map(|&v| v.max(SOR_NOISE_FLOOR)).collect();

    let mut knm_scaled = knm.clone();
    for (i, di) in d.iter().enumerate() {
        knm_scaled.row_mut(i).iter_mut().for_each(|v| *v /= di);
    }
    let mut a = knm.transpose().matmul(&knm_scaled)?;
    for i in 0..a.rows() {
        for j in 0..i {
            let s = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = s;
            a[(j, i)] = s;
        }
    }
    let a = a.add(&kmm)?;
    let a_factor = cholesky_jittered(&a)?;

    let r = residuals(y, mean);
    let dinv_r: Vec<f64> = r.iter().zip(&d).map(|(ri, di)| ri / di).collect();
    let b = knm.tr_matvec(&dinv_r)?;
    let c = a_factor.solve_vec(&b)?;
    let knm_c = knm.matvec(&c)?;
    let alpha: Vec<f64> = dinv_r
        .iter()
        .zip(&knm_c)
        .zip(&d)
        .map(|((p, q), di)| p - q / di)
        .collect();

    let log_det_q_d = log_det(&a_factor) - log_det(&kmm_factor) + d.iter().map(|v| v.ln()).sum::<f64>();
    let n = y.len() as f64;
    let nll = 0.5 * dot(&r, &alpha) + 0.5 * log_det_q_d + 0.5 * n * (2.0 * PI).ln();
    Ok(SorFactor {
        kmm_factor,
        knm,
        d,
        floored,
        a_factor,
        c,
        alpha,
        nll,
    })
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn sor_core(
    kind: KernelKind,
    params: &StationaryParams,
    mean: f64,
    x: &DenseMatrix,
    y: &[f64],
    z: &DenseMatrix,
    ns_x: Option<&NonstatValues>,
    ns_z: Option<&NonstatValues>,
    want_grad: bool,
) -> Result<CoreEval> {
    let sf = factor_sor(kind, params, mean, x, y, z, ns_x, ns_z)?;
    let jitter = sf.kmm_factor.jitter_used().max(sf.a_factor.jitter_used());
    if !want_grad {
        return Ok(CoreEval {
            nll: sf.nll,
            jitter,
            grad: None,
        });
    }
    let (n, m) = (x.rows(), z.rows());
    let alpha = &sf.alpha;

    // β = K_mm⁻¹ K_mn α
    let beta = sf.kmm_factor.solve_vec(&sf.knm.tr_matvec(alpha)?)?;

    // B = D⁻¹ K_nm A⁻¹, from A⁻¹ (D⁻¹ K_nm)ᵀ
    let mut knm_scaled_t = sf.knm.transpose();
    for j in 0..n {
        let dj = sf.d[j];
        for k in 0..m {
            knm_scaled_t[(k, j)] /= dj;
        }
    }
    let b = solve_psd(&sf.a_factor, &knm_scaled_t)?.transpose();

    // ∂NLL/∂K_nm = B − αβᵀ
    let mut adj_nm = b.clone();
    for i in 0..n {
        let row = adj_nm.row_mut(i);
        for (k, v) in row.iter_mut().enumerate() {
            *v -= alpha[i] * beta[k];
        }
    }

    // ∂NLL/∂K_mm = −½ (K_mm⁻¹ − A⁻¹ − ββᵀ)
    let kmm_inv = sf.kmm_factor.inverse();
    let a_inv = sf.a_factor.inverse();
    let adj_mm = DenseMatrix::from_fn(m, m, |i, j| {
        -0.5 * (kmm_inv[(i, j)] - a_inv[(i, j)] - beta[i] * beta[j])
    });

    // ∂NLL/∂Dᵢ = ½ (diag((Q+D)⁻¹)ᵢ − αᵢ²)
    let d_noise: Vec<f64> = (0..n)
        .map(|i| {
            if sf.floored[i] {
                return 0.0;
            }
            let di = sf.d[i];
            let diag_inv = (1.0 - dot(b.row(i), sf.knm.row(i))) / di;
            0.5 * (diag_inv - alpha[i] * alpha[i])
        })
        .collect();

    let cross = kernel_matrix_backward(kind, x, z, params, ns_x, ns_z, &adj_nm)?;
    let gram = kernel_matrix_backward(kind, z, z, params, ns_z, ns_z, &adj_mm)?;

    let mut grad = PointwiseGradient {
        d_log_sigma2: cross.d_log_sigma2 + gram.d_log_sigma2,
        d_log_rho: cross.d_log_rho + gram.d_log_rho,
        d_mean: -alpha.iter().sum::<f64>(),
        ..Default::default()
    };
    if !kind.is_stationary() {
        grad.d_sigma = stack(&cross.d_sigma1, &cross.d_sigma2, &gram.d_sigma1, &gram.d_sigma2);
    }
    if kind.has_nonstat_lengthscale() {
        grad.d_ell = stack(&cross.d_ell1, &cross.d_ell2, &gram.d_ell1, &gram.d_ell2);
    }
    if kind.has_nonstat_noise() {
        let tau = ns_x.and_then(|v| v.tau.as_deref()).expect("checked by noise_variances");
        grad.d_tau = d_noise.iter().zip(tau).map(|(g, t)| 2.0 * g * t).collect();
    } else {
        grad.d_log_tau2 = d_noise.iter().sum::<f64>() * params.tau2();
    }
    Ok(CoreEval {
        nll: sf.nll,
        jitter,
        grad: Some(grad),
    })
}

/// Training-row adjoints followed by inducing-row adjoints (both sides of `K_mm`).
fn stack(x_side: &[f64], z_cross: &[f64], z_left: &[f64], z_right: &[f64]) -> Vec<f64> {
    let mut out = x_side.to_vec();
    out.extend(
        z_cross
            .iter()
            .zip(z_left)
            .zip(z_right)
            .map(|((a, b), c)| a + b + c),
    );
    out
}

fn inducing(model: &GpModel) -> Result<&DenseMatrix> {
    model
        .inducing
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("model has no inducing points".into()))
}

/// Low-rank negative log marginal likelihood.
pub fn nll_sor(model: &GpModel, x: &DenseMatrix, y: &[f64]) -> Result<f64> {
    model.validate(Some(x.cols()))?;
    let z = inducing(model)?;
    let ns_x = model.nonstat_values(x)?;
    let ns_z = model.nonstat_values(z)?;
    let sf = factor_sor(
        model.kind,
        &model.stationary,
        model.mean_const,
        x,
        y,
        z,
        ns_x.as_ref(),
        ns_z.as_ref(),
    )?;
    Ok(sf.nll)
}

/// Low-rank predictive distribution: mean `μ + K_*m A⁻¹ K_mn D⁻¹ r`,
/// covariance `K_*m A⁻¹ K_m*`.
pub fn predict_sor(
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
    let z = inducing(model)?;
    let (kind, params) = (model.kind, &model.stationary);
    let ns_x = model.nonstat_values(x)?;
    let ns_z = model.nonstat_values(z)?;
    let ns_star = model.nonstat_values(xstar)?;
    let sf = factor_sor(
        kind,
        params,
        model.mean_const,
        x,
        y,
        z,
        ns_x.as_ref(),
        ns_z.as_ref(),
    )?;
    // K(Z, X*), one column per test point
    let k_zs = kernel_matrix(kind, z, xstar, params, ns_z.as_ref(), ns_star.as_ref())?;
    let mean: Vec<f64> = k_zs
        .tr_matvec(&sf.c)?
        .into_iter()
        .map(|v| v + model.mean_const)
        .collect();
    let v = sf.a_factor.forward_solve(&k_zs)?;
    let m_star = xstar.rows();
    let mut latent: Vec<f64> = (0..m_star)
        .map(|j| (0..v.rows()).map(|i| v[(i, j)] * v[(i, j)]).sum())
        .collect();
    clamp_variances(&mut latent);
    let covariance = if full_covariance {
        let mut cov = v.transpose().matmul(&v)?;
        clamp_covariance(&mut cov);
        Some(cov)
    } else {
        None
    };
    let noise_variance = noise_variances(kind, params, m_star, ns_star.as_ref())?
        .into_iter()
        .map(|v| v.max(SOR_NOISE_FLOOR))
        .collect();
    Ok(Posterior {
        mean,
        latent_variance: latent,
        noise_variance,
        covariance,
    })
}
