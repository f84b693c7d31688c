//! Gradients of the negative log marginal likelihood with respect to every
//! trainable quantity.
//!
//! Each backend reports adjoints with respect to the pointwise kernel
//! parameters (`σ(xᵢ)`, `ℓ(xᵢ)`, `τ(xᵢ)`); those become the upstream of a
//! single backward pass through the parameter network.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::state_space::{self, state_space_core};
use crate::gp::{exact_core, sor_core, CoreEval, GpModel, PointwiseGradient};
use crate::kernels::NonstatValues;
use crate::linalg::{CholeskyFactor, DenseMatrix};
use crate::network::NetworkWeights;

/// Gradient of the NLL with the same layout as the model's trainable parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientVector {
    pub d_log_sigma2: f64,
    pub d_log_rho: f64,
    pub d_log_tau2: f64,
    pub d_mean: f64,
    pub d_network: Option<NetworkWeights>,
}

impl GradientVector {
    /// Same order as [`crate::training::pack_params`].
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = vec![self.d_log_sigma2, self.d_log_rho, self.d_log_tau2, self.d_mean];
        if let Some(net) = &self.d_network {
            out.extend(net.to_flat());
        }
        out
    }

    fn check_finite(&self) -> Result<()> {
        let named = [
            ("d_log_sigma2", self.d_log_sigma2),
            ("d_log_rho", self.d_log_rho),
            ("d_log_tau2", self.d_log_tau2),
            ("d_mean", self.d_mean),
        ];
        for (name, v) in named {
            if !v.is_finite() {
                return Err(Error::NonFiniteGradient(name.into()));
            }
        }
        if let Some(net) = &self.d_network {
            if let Some(i) = net.to_flat().iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient(format!("d_network[{i}]")));
            }
        }
        Ok(())
    }
}

/// `G = ½((K+D)⁻¹ − ααᵀ)`, the derivative of the NLL with respect to `K + D`.
pub fn nll_grad_matrix(factor: &CholeskyFactor, alpha: &[f64]) -> Result<DenseMatrix> {
    let n = factor.dim();
    if alpha.len() != n {
        return Err(Error::dims(n, alpha.len()));
    }
    let mut g = factor.inverse();
    for i in 0..n {
        let row = g.row_mut(i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = 0.5 * (*v - alpha[i] * alpha[j]);
        }
    }
    Ok(g)
}

/// `∂NLL/∂σ(xᵢ) = 2 Σⱼ Gᵢⱼ σ(xⱼ) Cᵢⱼ` for `K = diag(σ) C diag(σ)` with symmetric `G`.
pub fn backward_nonstat_variance(g: &DenseMatrix, k_stat: &DenseMatrix, s: &[f64]) -> Result<Vec<f64>> {
    let n = s.len();
    if g.rows() != n || g.cols() != n || k_stat.rows() != n || k_stat.cols() != n {
        return Err(Error::ShapeMismatch(format!(
            "G {}x{}, base kernel {}x{}, {} sigmas",
            g.rows(),
            g.cols(),
            k_stat.rows(),
            k_stat.cols(),
            n
        )));
    }
    Ok((0..n)
        .map(|i| {
            let (gr, cr) = (g.row(i), k_stat.row(i));
            2.0 * (0..n).map(|j| gr[j] * s[j] * cr[j]).sum::<f64>()
        })
        .collect())
}

/// `∂NLL/∂τ(xᵢ) = 2 Gᵢᵢ τ(xᵢ)`: the noise only touches the diagonal.
pub fn backward_nonstat_noise(g: &DenseMatrix, tau: &[f64]) -> Result<Vec<f64>> {
    if g.rows() != tau.len() || g.cols() != tau.len() {
        return Err(Error::ShapeMismatch(format!(
            "G {}x{} with {} noise values",
            g.rows(),
            g.cols(),
            tau.len()
        )));
    }
    Ok(tau.iter().enumerate().map(|(i, t)| 2.0 * g[(i, i)] * t).collect())
}

/// How the exact objective is computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactBackend {
    /// State space where it applies, dense Cholesky otherwise.
    #[default]
    Auto,
    Dense,
    StateSpace,
}

/// Objective value, gradient and numerical diagnostics at one parameter setting.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub nll: f64,
    pub grad: Option<GradientVector>,
    pub jitter: f64,
}

fn split_rows(ns: &NonstatValues, n: usize) -> (NonstatValues, NonstatValues) {
    let cut = |v: &Vec<f64>| (v[..n].to_vec(), v[n..].to_vec());
    let (s1, s2) = cut(&ns.sigma);
    let (e1, e2) = ns.ell.as_ref().map(cut).unzip();
    let (t1, t2) = ns.tau.as_ref().map(cut).unzip();
    (
        NonstatValues {
            sigma: s1,
            ell: e1,
            tau: t1,
        },
        NonstatValues {
            sigma: s2,
            ell: e2,
            tau: t2,
        },
    )
}

/// Evaluates the model's objective (low-rank when it has inducing points,
/// exact otherwise) and optionally its full gradient.
pub fn evaluate(
    model: &GpModel,
    x: &DenseMatrix,
    y: &[f64],
    backend: ExactBackend,
    want_grad: bool,
) -> Result<Evaluation> {
    model.validate(Some(x.cols()))?;
    let (kind, params, mean) = (model.kind, &model.stationary, model.mean_const);
    let n = x.rows();

    let net_input = match &model.inducing {
        Some(z) if model.network.is_some() => Some(x.vstack(z)?),
        _ => None,
    };
    let forward = model.nonstat_with_cache(net_input.as_ref().unwrap_or(x))?;
    let ns_all = forward.as_ref().map(|(ns, _)| ns);

    let core: CoreEval = match &model.inducing {
        Some(z) => {
            let (ns_x, ns_z) = ns_all.map(|ns| split_rows(ns, n)).unzip();
            sor_core(kind, params, mean, x, y, z, ns_x.as_ref(), ns_z.as_ref(), want_grad)?
        }
        None => {
            let use_state_space = match backend {
                ExactBackend::Dense => false,
                ExactBackend::StateSpace => true,
                ExactBackend::Auto => state_space::is_applicable(kind, params, x),
            };
            if use_state_space {
                state_space_core(kind, params, mean, x, y, ns_all, want_grad)?
            } else {
                exact_core(kind, params, mean, x, y, ns_all, want_grad)?
            }
        }
    };
    if !core.nll.is_finite() {
        return Err(Error::Diverged {
            iteration: 0,
            reason: format!("objective is {}", core.nll),
        });
    }

    let grad = match core.grad {
        None => None,
        Some(pw) => {
            let d_network = match (&model.network, &forward) {
                (Some(net), Some((_, cache))) => {
                    let rows = net_input.as_ref().map_or(n, |s| s.rows());
                    let upstream = network_upstream(model, &pw, rows)?;
                    Some(net.backward(cache, &upstream)?)
                }
                _ => None,
            };
            let g = GradientVector {
                d_log_sigma2: pw.d_log_sigma2,
                d_log_rho: pw.d_log_rho,
                d_log_tau2: pw.d_log_tau2,
                d_mean: pw.d_mean,
                d_network,
            };
            g.check_finite()?;
            Some(g)
        }
    };
    Ok(Evaluation {
        nll: core.nll,
        grad,
        jitter: core.jitter,
    })
}

/// Lays the pointwise adjoints out as one column per network output.
fn network_upstream(model: &GpModel, pw: &PointwiseGradient, rows: usize) -> Result<DenseMatrix> {
    let out_dim = model.kind.network_outputs();
    let mut up = DenseMatrix::zeros(rows, out_dim);
    let second: &[f64] = if model.kind.has_nonstat_noise() {
        &pw.d_tau
    } else {
        &pw.d_ell
    };
    if pw.d_sigma.len() != rows || (out_dim == 2 && second.len() > rows) {
        return Err(Error::ShapeMismatch(format!(
            "{} sigma adjoints for {rows} network rows",
            pw.d_sigma.len()
        )));
    }
    for i in 0..rows {
        up[(i, 0)] = pw.d_sigma[i];
        if out_dim == 2 {
            // noise adjoints stop at the training rows
            up[(i, 1)] = second.get(i).copied().unwrap_or(0.0);
        }
    }
    Ok(up)
}

/// Full gradient of the model's objective at `(x, y)`.
pub fn grad_full(model: &GpModel, x: &DenseMatrix, y: &[f64]) -> Result<GradientVector> {
    let eval = evaluate(model, x, y, ExactBackend::Auto, true)?;
    Ok(eval.grad.expect("gradient requested"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cholesky;

    #[test]
    fn grad_matrix_scalar_cases() {
        let f = cholesky(&DenseMatrix::identity(1), &[0.0]).unwrap();
        assert_eq!(nll_grad_matrix(&f, &[0.0]).unwrap().as_slice(), &[0.5]);
        assert_eq!(nll_grad_matrix(&f, &[1.0]).unwrap().as_slice(), &[0.0]);
    }

    #[test]
    fn nonstat_variance_diagonal_cases() {
        let g0 = 0.3;
        let g = DenseMatrix::from_diag(&[g0; 3]);
        let c = DenseMatrix::identity(3);
        let u = backward_nonstat_variance(&g, &c, &[1.0; 3]).unwrap();
        assert!(u.iter().all(|&v| (v - 2.0 * g0).abs() < 1e-15));

        let g = DenseMatrix::from_rows(&[[0.7]]);
        let c = DenseMatrix::from_rows(&[[1.3]]);
        let u = backward_nonstat_variance(&g, &c, &[2.0]).unwrap();
        assert!((u[0] - 2.0 * 0.7 * 2.0 * 1.3).abs() < 1e-15);
    }

    #[test]
    fn nonstat_noise_cases() {
        let g = DenseMatrix::from_rows(&[[0.0, 0.4], [0.4, 0.0]]);
        assert_eq!(backward_nonstat_noise(&g, &[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
        let g = DenseMatrix::from_rows(&[[0.25]]);
        assert_eq!(backward_nonstat_noise(&g, &[2.0]).unwrap(), vec![4.0 * 0.25]);
        assert!(backward_nonstat_noise(&g, &[1.0, 2.0]).is_err());
    }
}
