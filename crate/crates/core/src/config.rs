//! Run configuration files.
//!
//! A config is JSON with three optional sections:
//!
//! ```json
//! {
//!   "target": "y",
//!   "model": { "kind": "nonstat_variance", "output_link": "softplus",
//!              "stationary": { "log_sigma2": 0.0, "log_rho": 0.0, "log_tau2": -2.3, "nu": 0.5 } },
//!   "train": { "step_sizes": [0.1, 0.01, 0.001], "max_iters": 10000,
//!              "g_variants": [[], [50]], "seed": 0, "eval_every": 500,
//!              "approximation": { "kind": "sor", "inducing": 100 },
//!              "best_iterate": true, "exact_backend": "auto" }
//! }
//! ```
//!
//! Missing fields take their defaults and unknown fields are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::training::{ModelSpec, TrainConfig};

/// Environment variable that overrides `train.seed`.
pub const SEED_ENV: &str = "NSGP_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Target column of the training CSV.
    pub target: String,
    pub model: ModelSpec,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            target: "y".into(),
            model: ModelSpec::default(),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.train.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Applies `NSGP_SEED` when `value` is set.
    pub fn apply_seed_override(&mut self, value: Option<&str>) -> Result<()> {
        if let Some(v) = value {
            self.train.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::InvalidConfig(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelKind;
    use crate::training::{Approximation, GVariant};

    #[test]
    fn empty_object_is_the_default() {
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn documented_example_parses() {
        let text = r#"{
          "target": "ppm",
          "model": { "kind": "nonstat_variance_noise", "output_link": "exp" },
          "train": { "g_variants": [[], [50]], "approximation": { "kind": "exact" }, "max_iters": 5 }
        }"#;
        let cfg = RunConfig::from_json(text).unwrap();
        assert_eq!(cfg.model.kind, KernelKind::NonstatVarianceNoise);
        assert_eq!(cfg.train.g_variants, vec![GVariant::linear(), GVariant::shallow(50)]);
        assert_eq!(cfg.train.approximation, Approximation::Exact);
    }

    #[test]
    fn unknown_fields_and_bad_values_are_rejected() {
        assert!(matches!(RunConfig::from_json(r#"{"trian": {}}"#), Err(Error::InvalidConfig(_))));
        assert!(matches!(
            RunConfig::from_json(r#"{"train": {"step_sizes": []}}"#),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn seed_override() {
        let mut cfg = RunConfig::default();
        cfg.apply_seed_override(Some("42")).unwrap();
        assert_eq!(cfg.train.seed, 42);
        cfg.apply_seed_override(None).unwrap();
        assert_eq!(cfg.train.seed, 42);
        assert!(cfg.apply_seed_override(Some("x")).is_err());
    }
}
