//! Covariance functions: half-integer Matérn base kernels and the
//! nonstationary constructions built on them.
//!
//! In every nonstationary kind the base kernel runs with unit output scale,
//! so the pointwise standard deviations carry all of the amplitude.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Matérn smoothness with a closed form.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub enum Smoothness {
    #[default]
    Half,
    ThreeHalves,
    FiveHalves,
}

impl TryFrom<f64> for Smoothness {
    type Error = Error;

    fn try_from(nu: f64) -> Result<Self> {
        if nu == 0.5 {
            Ok(Smoothness::Half)
        } else if nu == 1.5 {
            Ok(Smoothness::ThreeHalves)
        } else if nu == 2.5 {
            Ok(Smoothness::FiveHalves)
        } else {
            Err(Error::UnsupportedSmoothness(nu))
        }
    }
}

impl From<Smoothness> for f64 {
    fn from(s: Smoothness) -> f64 {
        s.value()
    }
}

impl Smoothness {
    pub fn value(self) -> f64 {
        match self {
            Smoothness::Half => 0.5,
            Smoothness::ThreeHalves => 1.5,
            Smoothness::FiveHalves => 2.5,
        }
    }
}

/// Unit-variance Matérn at distance `r`, returning the value together with
/// its partials in `r` and in `log ρ`.
#[inline]
pub fn unit_matern(r: f64, rho: f64, nu: Smoothness) -> (f64, f64, f64) {
    let (k, c, dc_dz) = match nu {
        Smoothness::Half => {
            let z = r / rho;
            let e = (-z).exp();
            (1.0, e, -e)
        }
        Smoothness::ThreeHalves => {
            let z = 3f64.sqrt() * r / rho;
            let e = (-z).exp();
            (3f64.sqrt(), (1.0 + z) * e, -z * e)
        }
        Smoothness::FiveHalves => {
            let z = 5f64.sqrt() * r / rho;
            let e = (-z).exp();
            (
                5f64.sqrt(),
                (1.0 + z + z * z / 3.0) * e,
                -(z / 3.0) * (1.0 + z) * e,
            )
        }
    };
    let z = k * r / rho;
    (c, dc_dz * k / rho, -z * dc_dz)
}

/// Stationary (global) hyperparameters, all positive ones held in log space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryParams {
    pub log_sigma2: f64,
    pub log_rho: f64,
    pub log_tau2: f64,
    #[serde(default)]
    pub nu: Smoothness,
}

impl Default for StationaryParams {
    fn default() -> Self {
        Self {
            log_sigma2: 0.0,
            log_rho: 0.0,
            log_tau2: 0.1f64.ln(),
            nu: Smoothness::Half,
        }
    }
}

impl StationaryParams {
    pub fn sigma2(&self) -> f64 {
        self.log_sigma2.exp()
    }

    pub fn rho(&self) -> f64 {
        self.log_rho.exp()
    }

    pub fn tau2(&self) -> f64 {
        self.log_tau2.exp()
    }
}

/// Matérn covariance `σ² c(r)` for the closed-form smoothness values.
pub fn matern(r: f64, params: &StationaryParams) -> f64 {
    debug_assert!(r >= 0.0);
    params.sigma2() * unit_matern(r, params.rho(), params.nu).0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Stationary,
    NonstatVariance,
    NonstatVarianceNoise,
    NonstatVarianceLengthscale1d,
}

impl KernelKind {
    /// Number of network outputs the kind consumes.
    pub fn network_outputs(self) -> usize {
        match self {
            KernelKind::Stationary => 0,
            KernelKind::NonstatVariance => 1,
            KernelKind::NonstatVarianceNoise | KernelKind::NonstatVarianceLengthscale1d => 2,
        }
    }

    pub fn is_stationary(self) -> bool {
        self == KernelKind::Stationary
    }

    pub fn has_nonstat_noise(self) -> bool {
        self == KernelKind::NonstatVarianceNoise
    }

    pub fn has_nonstat_lengthscale(self) -> bool {
        self == KernelKind::NonstatVarianceLengthscale1d
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Stationary => "stationary",
            KernelKind::NonstatVariance => "nonstat_variance",
            KernelKind::NonstatVarianceNoise => "nonstat_variance_noise",
            KernelKind::NonstatVarianceLengthscale1d => "nonstat_variance_lengthscale_1d",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Pointwise parameter values at a set of inputs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NonstatValues {
    pub sigma: Vec<f64>,
    pub ell: Option<Vec<f64>>,
    pub tau: Option<Vec<f64>>,
}

impl NonstatValues {
    pub fn from_sigma(sigma: Vec<f64>) -> Self {
        Self {
            sigma,
            ..Self::default()
        }
    }

    /// Splits network outputs (one column per parameter) according to `kind`.
    pub fn from_network_output(kind: KernelKind, out: &DenseMatrix) -> Self {
        let sigma = out.col(0);
        match kind {
            KernelKind::NonstatVarianceNoise => Self {
                sigma,
                ell: None,
                tau: Some(out.col(1)),
            },
            KernelKind::NonstatVarianceLengthscale1d => Self {
                sigma,
                ell: Some(out.col(1)),
                tau: None,
            },
            _ => Self::from_sigma(sigma),
        }
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }
}

#[inline]
fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Prefactor `√(2ab/(a²+b²))` of the varying-lengthscale kernel.
#[inline]
fn ls_prefactor(a: f64, b: f64) -> f64 {
    (2.0 * a * b / (a * a + b * b)).sqrt()
}

fn require_sigma(
    kind: KernelKind,
    ns: Option<&NonstatValues>,
    n: usize,
) -> Result<&NonstatValues> {
    let ns = ns.ok_or(Error::MissingNonstatValues {
        kind: kind.name(),
        what: "sigma",
    })?;
    if ns.sigma.len() != n {
        return Err(Error::dims(n, ns.sigma.len()));
    }
    if kind.has_nonstat_lengthscale() {
        match &ns.ell {
            Some(ell) if ell.len() == n => {}
            Some(ell) => return Err(Error::dims(n, ell.len())),
            None => {
                return Err(Error::MissingNonstatValues {
                    kind: kind.name(),
                    what: "lengthscale",
                })
            }
        }
    }
    Ok(ns)
}

fn check_inputs(kind: KernelKind, x1: &DenseMatrix, x2: &DenseMatrix) -> Result<()> {
    if x1.cols() != x2.cols() {
        return Err(Error::dims(x1.cols(), x2.cols()));
    }
    if kind.has_nonstat_lengthscale() && x1.cols() != 1 {
        return Err(Error::LengthscaleKernelDimension(x1.cols()));
    }
    Ok(())
}

/// Cross-covariance `K(X1, X2)` for the given kernel kind.
pub fn kernel_matrix(
    kind: KernelKind,
    x1: &DenseMatrix,
    x2: &DenseMatrix,
    params: &StationaryParams,
    ns1: Option<&NonstatValues>,
    ns2: Option<&NonstatValues>,
) -> Result<DenseMatrix> {
    check_inputs(kind, x1, x2)?;
    let rho = params.rho();
    let nu = params.nu;
    let (n1, n2) = (x1.rows(), x2.rows());
    let mut k = DenseMatrix::zeros(n1, n2);
    match kind {
        KernelKind::Stationary => {
            let s2 = params.sigma2();
            for i in 0..n1 {
                let xi = x1.row(i);
                let row = k.row_mut(i);
                for (j, v) in row.iter_mut().enumerate() {
                    *v = s2 * unit_matern(distance(xi, x2.row(j)), rho, nu).0;
                }
            }
        }
        KernelKind::NonstatVariance | KernelKind::NonstatVarianceNoise => {
            let s1 = &require_sigma(kind, ns1, n1)?.sigma;
            let s2 = &require_sigma(kind, ns2, n2)?.sigma;
            for i in 0..n1 {
                let xi = x1.row(i);
                let row = k.row_mut(i);
                for (j, v) in row.iter_mut().enumerate() {
                    *v = s1[i] * s2[j] * unit_matern(distance(xi, x2.row(j)), rho, nu).0;
                }
            }
        }
        KernelKind::NonstatVarianceLengthscale1d => {
            let a = require_sigma(kind, ns1, n1)?;
            let b = require_sigma(kind, ns2, n2)?;
            let (l1, l2) = (a.ell.as_ref().unwrap(), b.ell.as_ref().unwrap());
            for i in 0..n1 {
                let xi = x1[(i, 0)];
                let row = k.row_mut(i);
                for (j, v) in row.iter_mut().enumerate() {
                    let d = xi - x2[(j, 0)];
                    let (la, lb) = (l1[i], l2[j]);
                    let u = d * d / (la * la + lb * lb).sqrt();
                    *v = a.sigma[i]
                        * b.sigma[j]
                        * ls_prefactor(la, lb)
                        * unit_matern(u, rho, nu).0;
                }
            }
        }
    }
    Ok(k)
}

/// Prior variance `k(x, x)` at each row of `x`.
pub fn kernel_diag(
    kind: KernelKind,
    x: &DenseMatrix,
    params: &StationaryParams,
    ns: Option<&NonstatValues>,
) -> Result<Vec<f64>> {
    if kind.is_stationary() {
        return Ok(vec![params.sigma2(); x.rows()]);
    }
    let ns = require_sigma(kind, ns, x.rows())?;
    Ok(ns.sigma.iter().map(|s| s * s).collect())
}

/// Where the noise variances come from.
#[derive(Clone, Copy, Debug)]
pub enum NoiseSource<'a> {
    Stationary(f64),
    Nonstationary(&'a [f64]),
}

/// Noise variances `τᵢ²` for `n` observations.
pub fn noise_diag(n: usize, source: NoiseSource<'_>) -> Result<Vec<f64>> {
    match source {
        NoiseSource::Stationary(tau2) => {
            if !(tau2 > 0.0) {
                return Err(Error::NonPositiveNoise(tau2));
            }
            Ok(vec![tau2; n])
        }
        NoiseSource::Nonstationary(tau) => {
            if tau.len() != n {
                return Err(Error::dims(n, tau.len()));
            }
            tau.iter()
                .map(|&t| {
                    if t > 0.0 {
                        Ok(t * t)
                    } else {
                        Err(Error::NonPositiveNoise(t))
                    }
                })
                .collect()
        }
    }
}

/// Partials of `Σᵢⱼ adjoint[i,j]·K(X1,X2)[i,j]`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KernelGradient {
    pub d_log_sigma2: f64,
    pub d_log_rho: f64,
    pub d_sigma1: Vec<f64>,
    pub d_sigma2: Vec<f64>,
    pub d_ell1: Vec<f64>,
    pub d_ell2: Vec<f64>,
}

/// Pulls a matrix adjoint back through [`kernel_matrix`] onto the
/// stationary parameters and the pointwise values at both input sets.
pub fn kernel_matrix_backward(
    kind: KernelKind,
    x1: &DenseMatrix,
    x2: &DenseMatrix,
    params: &StationaryParams,
    ns1: Option<&NonstatValues>,
    ns2: Option<&NonstatValues>,
    adjoint: &DenseMatrix,
) -> Result<KernelGradient> {
    check_inputs(kind, x1, x2)?;
    let (n1, n2) = (x1.rows(), x2.rows());
    if adjoint.rows() != n1 || adjoint.cols() != n2 {
        return Err(Error::dims(
            format!("{n1}x{n2} adjoint"),
            format!("{}x{}", adjoint.rows(), adjoint.cols()),
        ));
    }
    let rho = params.rho();
    let nu = params.nu;
    let mut g = KernelGradient::default();
    match kind {
        KernelKind::Stationary => {
            let s2 = params.sigma2();
            for i in 0..n1 {
                let xi = x1.row(i);
                for j in 0..n2 {
                    let a = adjoint[(i, j)];
                    if a == 0.0 {
                        continue;
                    }
                    let (c, _, dc_dlr) = unit_matern(distance(xi, x2.row(j)), rho, nu);
                    g.d_log_sigma2 += a * s2 * c;
                    g.d_log_rho += a * s2 * dc_dlr;
                }
            }
        }
        KernelKind::NonstatVariance | KernelKind::NonstatVarianceNoise => {
            let s1 = &require_sigma(kind, ns1, n1)?.sigma;
            let s2 = &require_sigma(kind, ns2, n2)?.sigma;
            g.d_sigma1 = vec![0.0; n1];
            g.d_sigma2 = vec![0.0; n2];
            for i in 0..n1 {
                let xi = x1.row(i);
                for j in 0..n2 {
                    let a = adjoint[(i, j)];
                    if a == 0.0 {
                        continue;
                    }
                    let (c, _, dc_dlr) = unit_matern(distance(xi, x2.row(j)), rho, nu);
                    g.d_sigma1[i] += a * s2[j] * c;
                    g.d_sigma2[j] += a * s1[i] * c;
                    g.d_log_rho += a * s1[i] * s2[j] * dc_dlr;
                }
            }
        }
        KernelKind::NonstatVarianceLengthscale1d => {
            let p = require_sigma(kind, ns1, n1)?;
            let q = require_sigma(kind, ns2, n2)?;
            let (l1, l2) = (p.ell.as_ref().unwrap(), q.ell.as_ref().unwrap());
            g.d_sigma1 = vec![0.0; n1];
            g.d_sigma2 = vec![0.0; n2];
            g.d_ell1 = vec![0.0; n1];
            g.d_ell2 = vec![0.0; n2];
            for i in 0..n1 {
                let xi = x1[(i, 0)];
                for j in 0..n2 {
                    let adj = adjoint[(i, j)];
                    if adj == 0.0 {
                        continue;
                    }
                    let d = xi - x2[(j, 0)];
                    let (a, b) = (l1[i], l2[j]);
                    let s = a * a + b * b;
                    let u = d * d / s.sqrt();
                    let pre = ls_prefactor(a, b);
                    let (c, dc_du, dc_dlr) = unit_matern(u, rho, nu);
                    let ss = p.sigma[i] * q.sigma[j];
                    g.d_sigma1[i] += adj * q.sigma[j] * pre * c;
                    g.d_sigma2[j] += adj * p.sigma[i] * pre * c;
                    g.d_log_rho += adj * ss * pre * dc_dlr;
                    // ∂pre/∂a = b(b²-a²)/(s² pre), ∂u/∂a = -a u/s
                    let dpre_da = b * (b * b - a * a) / (s * s * pre);
                    let dpre_db = a * (a * a - b * b) / (s * s * pre);
                    let du_da = -a * u / s;
                    let du_db = -b * u / s;
                    g.d_ell1[i] += adj * ss * (dpre_da * c + pre * dc_du * du_da);
                    g.d_ell2[j] += adj * ss * (dpre_db * c + pre * dc_du * du_db);
                }
            }
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(sigma2: f64, rho: f64, nu: Smoothness) -> StationaryParams {
        StationaryParams {
            log_sigma2: sigma2.ln(),
            log_rho: rho.ln(),
            log_tau2: 0.0,
            nu,
        }
    }

    #[test]
    fn matern_at_zero_is_sigma2() {
        for nu in [Smoothness::Half, Smoothness::ThreeHalves, Smoothness::FiveHalves] {
            let p = params(2.5, 0.7, nu);
            assert!((matern(0.0, &p) - 2.5).abs() < 1e-14);
        }
    }

    #[test]
    fn exponential_closed_form() {
        let p = params(1.0, 1.0, Smoothness::Half);
        assert!((matern(1.0, &p) - (-1f64).exp()).abs() < 1e-15);
        assert!((matern(1.0, &p) - 0.367879).abs() < 1e-6);
    }

    #[test]
    fn unsupported_smoothness() {
        assert!(matches!(
            Smoothness::try_from(1.0),
            Err(Error::UnsupportedSmoothness(v)) if v == 1.0
        ));
        assert!(serde_json::from_str::<Smoothness>("0.7").is_err());
        assert_eq!(serde_json::from_str::<Smoothness>("1.5").unwrap(), Smoothness::ThreeHalves);
    }

    #[test]
    fn matern_partials_match_differences() {
        for nu in [Smoothness::Half, Smoothness::ThreeHalves, Smoothness::FiveHalves] {
            let (r, rho) = (0.37, 0.8);
            let (_, dr, dlr) = unit_matern(r, rho, nu);
            let h = 1e-6;
            let fd_r = (unit_matern(r + h, rho, nu).0 - unit_matern(r - h, rho, nu).0) / (2.0 * h);
            let fd_lr = (unit_matern(r, (rho.ln() + h).exp(), nu).0
                - unit_matern(r, (rho.ln() - h).exp(), nu).0)
                / (2.0 * h);
            assert!((dr - fd_r).abs() < 1e-8, "{nu:?}");
            assert!((dlr - fd_lr).abs() < 1e-8, "{nu:?}");
        }
    }

    #[test]
    fn unit_sigma_reduces_to_stationary() {
        let x = DenseMatrix::from_rows(&[[0.0, 0.1], [0.5, -0.2], [1.0, 0.3]]);
        let p = params(1.0, 0.6, Smoothness::Half);
        let ns = NonstatValues::from_sigma(vec![1.0; 3]);
        let k_stat = kernel_matrix(KernelKind::Stationary, &x, &x, &p, None, None).unwrap();
        let k_ns =
            kernel_matrix(KernelKind::NonstatVariance, &x, &x, &p, Some(&ns), Some(&ns)).unwrap();
        assert_eq!(k_stat, k_ns);
    }

    #[test]
    fn two_point_nonstat_variance() {
        let x = DenseMatrix::from_rows(&[[0.0], [0.4]]);
        let p = params(1.0, 1.0, Smoothness::Half);
        let ns = NonstatValues::from_sigma(vec![2.0, 3.0]);
        let k =
            kernel_matrix(KernelKind::NonstatVariance, &x, &x, &p, Some(&ns), Some(&ns)).unwrap();
        let c = (-0.4f64).exp();
        let expected = [[4.0, 6.0 * c], [6.0 * c, 9.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((k[(i, j)] - expected[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn lengthscale_kernel_diagonal_is_sigma_squared() {
        let x = DenseMatrix::from_rows(&[[0.0], [0.3], [0.9]]);
        let p = params(1.0, 1.0, Smoothness::Half);
        let ns = NonstatValues {
            sigma: vec![0.5, 1.5, 2.0],
            ell: Some(vec![0.1, 3.0, 0.7]),
            tau: None,
        };
        let k = kernel_matrix(
            KernelKind::NonstatVarianceLengthscale1d,
            &x,
            &x,
            &p,
            Some(&ns),
            Some(&ns),
        )
        .unwrap();
        for i in 0..3 {
            assert!((k[(i, i)] - ns.sigma[i].powi(2)).abs() < 1e-15);
        }
    }

    #[test]
    fn lengthscale_kernel_rejects_multidimensional_inputs() {
        let x = DenseMatrix::zeros(2, 2);
        let ns = NonstatValues {
            sigma: vec![1.0; 2],
            ell: Some(vec![1.0; 2]),
            tau: None,
        };
        let err = kernel_matrix(
            KernelKind::NonstatVarianceLengthscale1d,
            &x,
            &x,
            &StationaryParams::default(),
            Some(&ns),
            Some(&ns),
        );
        assert!(matches!(err, Err(Error::LengthscaleKernelDimension(2))));
    }

    #[test]
    fn missing_values_are_reported() {
        let x = DenseMatrix::zeros(2, 1);
        let err = kernel_matrix(
            KernelKind::NonstatVariance,
            &x,
            &x,
            &StationaryParams::default(),
            None,
            None,
        );
        assert!(matches!(err, Err(Error::MissingNonstatValues { .. })));
        let ns = NonstatValues::from_sigma(vec![1.0; 2]);
        let err = kernel_matrix(
            KernelKind::NonstatVarianceLengthscale1d,
            &x,
            &x,
            &StationaryParams::default(),
            Some(&ns),
            Some(&ns),
        );
        assert!(matches!(err, Err(Error::MissingNonstatValues { what: "lengthscale", .. })));
    }

    #[test]
    fn noise_diag_cases() {
        assert_eq!(noise_diag(3, NoiseSource::Stationary(0.1)).unwrap(), vec![0.1; 3]);
        assert_eq!(
            noise_diag(2, NoiseSource::Nonstationary(&[1.0, 2.0])).unwrap(),
            vec![1.0, 4.0]
        );
        let c = 0.37;
        assert_eq!(
            noise_diag(4, NoiseSource::Nonstationary(&[c; 4])).unwrap(),
            noise_diag(4, NoiseSource::Stationary(c * c)).unwrap()
        );
        assert!(matches!(
            noise_diag(2, NoiseSource::Stationary(0.0)),
            Err(Error::NonPositiveNoise(_))
        ));
        assert!(matches!(
            noise_diag(2, NoiseSource::Nonstationary(&[1.0, -1.0])),
            Err(Error::NonPositiveNoise(_))
        ));
    }
}
