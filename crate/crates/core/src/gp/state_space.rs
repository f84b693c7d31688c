//! Exact `O(n)` likelihood for one-dimensional inputs under the Matérn-½
//! base kernel.
//!
//! The unit-variance Matérn-½ process is Markov (Ornstein–Uhlenbeck), so with
//! `f(x) = s(x)·g(x)` and independent Gaussian noise a scalar Kalman filter
//! over the sorted inputs yields the same marginal likelihood as the dense
//! Cholesky route. The gradient is the hand-written reverse sweep of that
//! filter. Covers the stationary, nonstationary-variance and
//! nonstationary-variance-plus-noise kernels.

use std::f64::consts::PI;

use super::{check_data, noise_variances, residuals, CoreEval, PointwiseGradient};
use crate::error::{Error, Result};
use crate::kernels::{KernelKind, NonstatValues, Smoothness, StationaryParams};
use crate::linalg::DenseMatrix;

/// True when the state-space route computes the same exact objective.
pub fn is_applicable(kind: KernelKind, params: &StationaryParams, x: &DenseMatrix) -> bool {
    x.cols() == 1
        && params.nu == Smoothness::Half
        && matches!(
            kind,
            KernelKind::Stationary | KernelKind::NonstatVariance | KernelKind::NonstatVarianceNoise
        )
}

/// Filter outputs and adjoints in the caller's row order.
#[derive(Clone, Debug)]
pub struct FilterResult {
    pub nll: f64,
    pub d_residual: Vec<f64>,
    pub d_scale: Vec<f64>,
    pub d_noise: Vec<f64>,
    pub d_log_rho: f64,
}

struct Step {
    a: f64,
    gap: f64,
    m_pred: f64,
    p_pred: f64,
    f: f64,
    v: f64,
    k: f64,
}

/// NLL of `r ~ N(0, S C S + diag(noise))` where `C` is the unit Matérn-½
/// matrix over `xs` with lengthscale `rho`, plus its reverse-mode adjoints
/// when `want_grad`.
pub fn kalman_nll(
    xs: &[f64],
    r: &[f64],
    scale: &[f64],
    noise: &[f64],
    rho: f64,
    want_grad: bool,
) -> Result<FilterResult> {
    let n = xs.len();
    if r.len() != n || scale.len() != n || noise.len() != n {
        return Err(Error::ShapeMismatch("state-space inputs differ in length".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));

    let mut steps = Vec::with_capacity(n);
    let mut m_filt = vec![0.0; n];
    let mut p_filt = vec![0.0; n];
    let mut nll = 0.5 * n as f64 * (2.0 * PI).ln();
    let (mut m, mut p) = (0.0, 0.0);
    for (t, &idx) in order.iter().enumerate() {
        let (a, gap) = if t == 0 {
            (0.0, 0.0)
        } else {
            let gap = xs[idx] - xs[order[t - 1]];
            ((-gap / rho).exp(), gap)
        };
        let m_pred = a * m;
        let p_pred = a * a * p + (1.0 - a * a);
        let s = scale[idx];
        let f = s * s * p_pred + noise[idx];
        if !(f > 0.0) || !f.is_finite() {
            return Err(Error::NotPositiveDefinite { max_jitter: 0.0 });
        }
        let v = r[idx] - s * m_pred;
        let k = s * p_pred / f;
        nll += 0.5 * (f.ln() + v * v / f);
        m = m_pred + k * v;
        p = p_pred * noise[idx] / f;
        m_filt[t] = m;
        p_filt[t] = p;
        steps.push(Step {
            a,
            gap,
            m_pred,
            p_pred,
            f,
            v,
            k,
        });
    }

    let mut out = FilterResult {
        nll,
        d_residual: vec![0.0; n],
        d_scale: vec![0.0; n],
        d_noise: vec![0.0; n],
        d_log_rho: 0.0,
    };
    if !want_grad {
        return Ok(out);
    }

    // Adjoints of the filtered mean and variance after step t.
    let (mut m_bar, mut p_bar) = (0.0, 0.0);
    for t in (0..n).rev() {
        let idx = order[t];
        let st = &steps[t];
        let (s, rn) = (scale[idx], noise[idx]);
        let (f, v, k, p_pred, m_pred) = (st.f, st.v, st.k, st.p_pred, st.m_pred);

        // m = m_pred + k v
        let mut m_pred_bar = m_bar;
        let k_bar = m_bar * v;
        let mut v_bar = m_bar * k;
        // p = p_pred rn / f
        let mut p_pred_bar = p_bar * rn / f;
        let mut rn_bar = p_bar * p_pred / f;
        let mut f_bar = -p_bar * p_pred * rn / (f * f);
        // k = s p_pred / f
        let mut s_bar = k_bar * p_pred / f;
        p_pred_bar += k_bar * s / f;
        f_bar += -k_bar * s * p_pred / (f * f);
        // ½ (ln f + v²/f)
        f_bar += 0.5 / f - 0.5 * v * v / (f * f);
        v_bar += v / f;
        // v = r − s m_pred
        out.d_residual[idx] = v_bar;
        s_bar -= v_bar * m_pred;
        m_pred_bar -= v_bar * s;
        // f = s² p_pred + rn
        s_bar += f_bar * 2.0 * s * p_pred;
        p_pred_bar += f_bar * s * s;
        rn_bar += f_bar;

        out.d_scale[idx] = s_bar;
        out.d_noise[idx] = rn_bar;

        // m_pred = a m_prev, p_pred = a² p_prev + 1 − a²
        if t > 0 {
            let a = st.a;
            let (m_prev, p_prev) = (m_filt[t - 1], p_filt[t - 1]);
            let a_bar = m_pred_bar * m_prev + p_pred_bar * 2.0 * a * (p_prev - 1.0);
            out.d_log_rho += a_bar * a * st.gap / rho;
            m_bar = m_pred_bar * a;
            p_bar = p_pred_bar * a * a;
        }
    }
    Ok(out)
}

pub(crate) fn state_space_core(
    kind: KernelKind,
    params: &StationaryParams,
    mean: f64,
    x: &DenseMatrix,
    y: &[f64],
    ns: Option<&NonstatValues>,
    want_grad: bool,
) -> Result<CoreEval> {
    check_data(x, y)?;
    if !is_applicable(kind, params, x) {
        return Err(Error::InvalidConfig(format!(
            "state-space backend does not cover kernel {kind} with d = {}",
            x.cols()
        )));
    }
    let n = y.len();
    let scale = match kind {
        KernelKind::Stationary => vec![params.sigma2().sqrt(); n],
        _ => {
            let ns = ns.ok_or(Error::MissingNonstatValues {
                kind: kind.name(),
                what: "sigma",
            })?;
            if ns.sigma.len() != n {
                return Err(Error::dims(n, ns.sigma.len()));
            }
            ns.sigma.clone()
        }
    };
    let noise = noise_variances(kind, params, n, ns)?;
    let r = residuals(y, mean);
    let fr = kalman_nll(x.as_slice(), &r, &scale, &noise, params.rho(), want_grad)?;
    if !want_grad {
        return Ok(CoreEval {
            nll: fr.nll,
            jitter: 0.0,
            grad: None,
        });
    }
    let mut grad = PointwiseGradient {
        d_log_rho: fr.d_log_rho,
        d_mean: -fr.d_residual.iter().sum::<f64>(),
        ..Default::default()
    };
    if kind.is_stationary() {
        grad.d_log_sigma2 = fr.d_scale.iter().zip(&scale).map(|(g, s)| 0.5 * g * s).sum();
    } else {
        grad.d_sigma = fr.d_scale;
    }
    if kind.has_nonstat_noise() {
        let tau = ns.and_then(|v| v.tau.as_deref()).expect("checked by noise_variances");
        grad.d_tau = fr.d_noise.iter().zip(tau).map(|(g, t)| 2.0 * g * t).collect();
    } else {
        grad.d_log_tau2 = fr.d_noise.iter().zip(&noise).map(|(g, r)| g * r).sum();
    }
    Ok(CoreEval {
        nll: fr.nll,
        jitter: 0.0,
        grad: Some(grad),
    })
}
