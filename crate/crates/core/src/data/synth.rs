use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{kernel_matrix, KernelKind, NonstatValues, Smoothness, StationaryParams};
use crate::linalg::{cholesky, DenseMatrix};

/// Largest synthetic sample drawn through a dense Cholesky factor.
pub const MAX_SYNTH_N: usize = 5000;

/// Jitter added before factoring the true covariance, escalated on failure.
const SYNTH_JITTER: [f64; 3] = [1e-8, 1e-6, 1e-4];

/// Closed-form scalar field over the unit cube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Field {
    Constant { value: f64 },
    /// `scale · exp(amplitude · sin(2π · frequency · x[axis] + phase))`
    ExpSin {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        axis: usize,
    },
    /// `intercept + slope · x[axis]`
    Linear {
        intercept: f64,
        slope: f64,
        #[serde(default)]
        axis: usize,
    },
    /// `base + height · exp(−(x[axis] − center)² / (2 width²))`
    Bump {
        base: f64,
        height: f64,
        center: f64,
        width: f64,
        #[serde(default)]
        axis: usize,
    },
}

fn one() -> f64 {
    1.0
}

impl Field {
    /// The field `exp(sin(2π x₁))`.
    pub fn exp_sin() -> Self {
        Field::ExpSin {
            scale: 1.0,
            amplitude: 1.0,
            frequency: 1.0,
            phase: 0.0,
            axis: 0,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Field::Constant { value } => value,
            Field::ExpSin {
                scale,
                amplitude,
                frequency,
                phase,
                axis,
            } => scale * (amplitude * (2.0 * PI * frequency * x[axis] + phase).sin()).exp(),
            Field::Linear { intercept, slope, axis } => intercept + slope * x[axis],
            Field::Bump {
                base,
                height,
                center,
                width,
                axis,
            } => {
                let t = (x[axis] - center) / width;
                base + height * (-0.5 * t * t).exp()
            }
        }
    }

    fn axis(&self) -> Option<usize> {
        match *self {
            Field::Constant { .. } => None,
            Field::ExpSin { axis, .. } | Field::Linear { axis, .. } | Field::Bump { axis, .. } => Some(axis),
        }
    }

    /// Smallest value over `[0, 1]` on the field's axis.
    fn lower_bound(&self) -> f64 {
        match *self {
            Field::Constant { value } => value,
            Field::ExpSin {
                scale, amplitude, ..
            } => scale * (-amplitude.abs()).exp(),
            Field::Linear { intercept, slope, .. } => intercept + slope.min(0.0),
            Field::Bump { base, height, .. } => base + height.min(0.0),
        }
    }

    fn validate(&self, name: &str, d: usize, allow_zero: bool) -> Result<()> {
        if let Some(axis) = self.axis() {
            if axis >= d {
                return Err(Error::InvalidConfig(format!("{name} field uses axis {axis} but d = {d}")));
            }
        }
        if let Field::Bump { width, .. } = *self {
            if !(width > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} bump width must be positive")));
            }
        }
        let lb = self.lower_bound();
        let ok = if allow_zero { lb >= 0.0 } else { lb > 0.0 };
        if !ok || !lb.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "{name} field must be {} on the unit cube",
                if allow_zero { "nonnegative" } else { "positive" }
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    /// Signal standard deviation field.
    pub sigma: Field,
    /// Noise standard deviation field.
    pub tau: Field,
    /// Lengthscale; a non-constant field requires `d = 1`.
    pub lengthscale: Field,
    #[serde(default)]
    pub nu: Smoothness,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > MAX_SYNTH_N {
            return Err(Error::InvalidConfig(format!("n must be in 1..={MAX_SYNTH_N}, got {}", self.n)));
        }
        if self.d == 0 {
            return Err(Error::InvalidConfig("d must be positive".into()));
        }
        self.sigma.validate("sigma", self.d, false)?;
        self.tau.validate("tau", self.d, true)?;
        self.lengthscale.validate("lengthscale", self.d, false)?;
        if !matches!(self.lengthscale, Field::Constant { .. }) && self.d != 1 {
            return Err(Error::LengthscaleKernelDimension(self.d));
        }
        Ok(())
    }
}

/// True parameter values at every generated input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub spec: SyntheticSpec,
    pub sigma: Vec<f64>,
    pub tau: Vec<f64>,
    pub lengthscale: Vec<f64>,
    /// Latent function values.
    pub f: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub truth: Truth,
}

/// Draws `x` uniformly on the unit cube, `f = L z` from the true covariance,
/// and `y = f + τ(x) ε`.
pub fn synth_generate(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let (n, d) = (spec.n, spec.d);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let x = DenseMatrix::from_fn(n, d, |_, _| rng.random::<f64>());

    let eval = |f: &Field| (0..n).map(|i| f.eval(x.row(i))).collect::<Vec<f64>>();
    let sigma = eval(&spec.sigma);
    let tau = eval(&spec.tau);
    let ell = eval(&spec.lengthscale);

    let k = match spec.lengthscale {
        Field::Constant { value } => {
            let params = StationaryParams {
                log_rho: value.ln(),
                nu: spec.nu,
                ..Default::default()
            };
            let ns = NonstatValues::from_sigma(sigma.clone());
            kernel_matrix(KernelKind::NonstatVariance, &x, &x, &params, Some(&ns), Some(&ns))?
        }
        _ => {
            let params = StationaryParams {
                nu: spec.nu,
                ..Default::default()
            };
            let ns = NonstatValues {
                sigma: sigma.clone(),
                ell: Some(ell.clone()),
                tau: None,
            };
            kernel_matrix(KernelKind::NonstatVarianceLengthscale1d, &x, &x, &params, Some(&ns), Some(&ns))?
        }
    };
    let factor = cholesky(&k, &SYNTH_JITTER)?;

    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let l = factor.l();
    let f: Vec<f64> = (0..n)
        .map(|i| l.row(i)[..=i].iter().zip(&z).map(|(a, b)| a * b).sum())
        .collect();
    let y: Vec<f64> = (0..n)
        .map(|i| {
            let eps: f64 = rng.sample(StandardNormal);
            if tau[i] == 0.0 {
                f[i]
            } else {
                f[i] + tau[i] * eps
            }
        })
        .collect();

    let names = (1..=d).map(|j| format!("x{j}")).collect();
    let dataset = Dataset::new(names, "y".into(), x, y)?;
    Ok(SyntheticData {
        dataset,
        truth: Truth {
            spec: spec.clone(),
            sigma,
            tau,
            lengthscale: ell,
            f,
        },
    })
}
