//! Gaussian process regression whose kernel parameters are produced by a
//! small feed-forward network: an input-dependent output scale σ(x), and
//! optionally an input-dependent noise scale τ(x) or (on 1-D inputs) an
//! input-dependent lengthscale ℓ(x). The network weights are learned jointly
//! with the remaining hyperparameters by maximizing the marginal likelihood
//! with Adam, either exactly or under the subset-of-regressors approximation.
//!
//! The runnable programs in `examples/` walk through each capability:
//!
//! | example | shows |
//! |---|---|
//! | `kernels` | Matérn kernels and the three nonstationary families |
//! | `exact_regression` | fitting and predicting with exact inference |
//! | `sparse_inducing` | subset-of-regressors with inducing points |
//! | `heteroscedastic_noise` | learning τ(x) alongside σ(x) |
//! | `lengthscale_1d` | the input-dependent lengthscale kernel |
//! | `variance_recovery` | recovering σ(x) from synthetic data |
//! | `model_selection` | the step-size × network grid search with splits |
//! | `gradient_check` | analytic gradients against finite differences |
//! | `save_load` | model files and predictions on raw inputs |
//!
//! The `nsgp` binary exposes the same pipeline as `fit`, `predict`, `eval`,
//! `synth` and `recover` subcommands.

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod gp;
pub mod gradients;
pub mod kernels;
pub mod linalg;
pub mod metrics;
pub mod network;
pub mod recovery;
pub mod training;

pub use error::{Error, Result};
