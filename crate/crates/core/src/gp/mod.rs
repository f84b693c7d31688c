//! Gaussian-process models: marginal likelihood and posterior prediction,
//! exact or under the subset-of-regressors inducing-point approximation.
//!
//! Training data inside this module is always on the standardized scale;
//! see [`crate::data`] for the transforms.

mod exact;
mod sor;
pub mod state_space;

pub use exact::{nll_exact, predict_exact};
pub use sor::{nll_sor, predict_sor, SOR_NOISE_FLOOR};

pub(crate) use exact::exact_core;
pub(crate) use sor::sor_core;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{noise_diag, KernelKind, NoiseSource, NonstatValues, StationaryParams};
use crate::linalg::DenseMatrix;
use crate::network::{ForwardCache, ParamNetwork};

/// Constant-mean GP prior with an optional network-parameterized kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpModel {
    pub kind: KernelKind,
    pub stationary: StationaryParams,
    pub network: Option<ParamNetwork>,
    pub mean_const: f64,
    /// Inducing inputs; present means the low-rank approximation is used.
    pub inducing: Option<DenseMatrix>,
}

impl GpModel {
    pub fn stationary(params: StationaryParams, mean_const: f64) -> Self {
        Self {
            kind: KernelKind::Stationary,
            stationary: params,
            network: None,
            mean_const,
            inducing: None,
        }
    }

    pub fn nonstationary(
        kind: KernelKind,
        params: StationaryParams,
        network: ParamNetwork,
        mean_const: f64,
    ) -> Result<Self> {
        let model = Self {
            kind,
            stationary: params,
            network: Some(network),
            mean_const,
            inducing: None,
        };
        model.validate(None)?;
        Ok(model)
    }

    pub fn with_inducing(mut self, z: DenseMatrix) -> Self {
        self.inducing = Some(z);
        self
    }

    /// Checks internal consistency and, when given, the feature dimension.
    pub fn validate(&self, input_dim: Option<usize>) -> Result<()> {
        match (&self.network, self.kind.is_stationary()) {
            (Some(_), true) => {
                return Err(Error::InvalidConfig(
                    "stationary kernel does not take a parameter network".into(),
                ))
            }
            (None, false) => {
                return Err(Error::MissingNonstatValues {
                    kind: self.kind.name(),
                    what: "network",
                })
            }
            _ => {}
        }
        if let Some(net) = &self.network {
            net.spec.validate()?;
            if net.spec.output_dim != self.kind.network_outputs() {
                return Err(Error::InvalidConfig(format!(
                    "kernel {} needs {} network outputs, spec has {}",
                    self.kind,
                    self.kind.network_outputs(),
                    net.spec.output_dim
                )));
            }
            if let Some(d) = input_dim {
                if net.spec.input_dim != d {
                    return Err(Error::dims(net.spec.input_dim, d));
                }
            }
        }
        if let (Some(z), Some(d)) = (&self.inducing, input_dim) {
            if z.cols() != d {
                return Err(Error::dims(format!("{d}-dimensional inducing points"), z.cols()));
            }
        }
        if let (Some(d), true) = (input_dim, self.kind.has_nonstat_lengthscale()) {
            if d != 1 {
                return Err(Error::LengthscaleKernelDimension(d));
            }
        }
        Ok(())
    }

    /// Network-produced parameter values at `x`, if the kernel has any.
    pub fn nonstat_values(&self, x: &DenseMatrix) -> Result<Option<NonstatValues>> {
        Ok(self.nonstat_with_cache(x)?.map(|(ns, _)| ns))
    }

    pub(crate) fn nonstat_with_cache(
        &self,
        x: &DenseMatrix,
    ) -> Result<Option<(NonstatValues, ForwardCache)>> {
        match &self.network {
            None => Ok(None),
            Some(net) => {
                let (out, cache) = net.forward(x)?;
                Ok(Some((NonstatValues::from_network_output(self.kind, &out), cache)))
            }
        }
    }

    /// Observation-noise variances at points whose pointwise values are `ns`.
    pub fn noise_variances(&self, n: usize, ns: Option<&NonstatValues>) -> Result<Vec<f64>> {
        noise_variances(self.kind, &self.stationary, n, ns)
    }

    /// Uses the low-rank approximation?
    pub fn is_sparse(&self) -> bool {
        self.inducing.is_some()
    }
}

/// Negative log marginal likelihood, low-rank when the model has inducing points.
pub fn nll(model: &GpModel, x: &DenseMatrix, y: &[f64]) -> Result<f64> {
    if model.is_sparse() {
        nll_sor(model, x, y)
    } else {
        nll_exact(model, x, y)
    }
}

/// Posterior predictive, low-rank when the model has inducing points.
pub fn predict(
    model: &GpModel,
    x: &DenseMatrix,
    y: &[f64],
    xstar: &DenseMatrix,
    full_covariance: bool,
) -> Result<Posterior> {
    if model.is_sparse() {
        predict_sor(model, x, y, xstar, full_covariance)
    } else {
        predict_exact(model, x, y, xstar, full_covariance)
    }
}

pub(crate) fn noise_variances(
    kind: KernelKind,
    params: &StationaryParams,
    n: usize,
    ns: Option<&NonstatValues>,
) -> Result<Vec<f64>> {
    if kind.has_nonstat_noise() {
        let tau = ns
            .and_then(|v| v.tau.as_deref())
            .ok_or(Error::MissingNonstatValues {
                kind: kind.name(),
                what: "noise",
            })?;
        noise_diag(n, NoiseSource::Nonstationary(tau))
    } else {
        noise_diag(n, NoiseSource::Stationary(params.tau2()))
    }
}

pub(crate) fn residuals(y: &[f64], mean: f64) -> Vec<f64> {
    y.iter().map(|v| v - mean).collect()
}

pub(crate) fn check_data(x: &DenseMatrix, y: &[f64]) -> Result<()> {
    if x.rows() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.rows(),
            right: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::TooFewRows { needed: 1, got: 0 });
    }
    Ok(())
}

/// NLL adjoints with respect to the stationary parameters, the constant
/// mean, and every pointwise parameter value fed into the kernel.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointwiseGradient {
    pub d_log_sigma2: f64,
    pub d_log_rho: f64,
    pub d_log_tau2: f64,
    pub d_mean: f64,
    /// `∂NLL/∂σ(xᵢ)`; in low-rank mode training rows come first, then inducing rows.
    pub d_sigma: Vec<f64>,
    pub d_ell: Vec<f64>,
    pub d_tau: Vec<f64>,
}

/// Objective value with optional gradient, as produced by a backend.
#[derive(Clone, Debug)]
pub struct CoreEval {
    pub nll: f64,
    /// Largest jitter any factorization needed.
    pub jitter: f64,
    pub grad: Option<PointwiseGradient>,
}

/// Tolerance below zero tolerated in predictive variances before clamping.
pub const VARIANCE_CLAMP_TOL: f64 = 1e-10;

/// Predictive distribution at a batch of test inputs.
#[derive(Clone, Debug, PartialEq)]
pub struct Posterior {
    pub mean: Vec<f64>,
    /// Variance of the latent function.
    pub latent_variance: Vec<f64>,
    /// Observation-noise variance at each test input.
    pub noise_variance: Vec<f64>,
    /// Latent covariance, when requested.
    pub covariance: Option<DenseMatrix>,
}

impl Posterior {
    /// Latent plus noise variance: the marginal of a new observation.
    pub fn predictive_variance(&self) -> Vec<f64> {
        self.latent_variance
            .iter()
            .zip(&self.noise_variance)
            .map(|(a, b)| a + b)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

pub(crate) fn clamp_variances(v: &mut [f64]) {
    for (i, x) in v.iter_mut().enumerate() {
        if *x < 0.0 {
            if *x < -VARIANCE_CLAMP_TOL {
                log::warn!("predictive variance {x:e} at index {i} clamped to zero");
            }
            *x = 0.0;
        }
    }
}

pub(crate) fn clamp_covariance(cov: &mut DenseMatrix) {
    let mut diag = cov.diag();
    clamp_variances(&mut diag);
    for (i, d) in diag.into_iter().enumerate() {
        cov[(i, i)] = d;
    }
}
