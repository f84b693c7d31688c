use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Standardizer;
use crate::error::{Error, Result};
use crate::gp::{predict, GpModel, Posterior};
use crate::linalg::DenseMatrix;

pub const SCHEMA_VERSION: u32 = 1;

/// Everything needed to predict on raw inputs: the model, the training data
/// it conditions on (standardized), and the transforms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub schema_version: u32,
    pub feature_names: Vec<String>,
    pub target_name: String,
    pub standardizer: Standardizer,
    pub model: GpModel,
    pub train_x: DenseMatrix,
    pub train_y: Vec<f64>,
}

impl SavedModel {
    pub fn new(
        model: GpModel,
        standardizer: Standardizer,
        train_x: DenseMatrix,
        train_y: Vec<f64>,
        feature_names: Vec<String>,
        target_name: String,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            feature_names,
            target_name,
            standardizer,
            model,
            train_x,
            train_y,
        }
    }

    /// Posterior at raw inputs, returned in raw target units.
    pub fn predict_raw(&self, x_raw: &DenseMatrix) -> Result<Posterior> {
        let xs = self.standardizer.transform_x(x_raw)?;
        let mut post = predict(&self.model, &self.train_x, &self.train_y, &xs, false)?;
        post.mean = self.standardizer.inverse_y(&post.mean);
        post.latent_variance = self.standardizer.inverse_variance(&post.latent_variance);
        post.noise_variance = self.standardizer.inverse_variance(&post.noise_variance);
        Ok(post)
    }
}

pub fn save_model(path: &Path, saved: &SavedModel) -> Result<()> {
    let text = serde_json::to_string_pretty(saved)
        .map_err(|e| Error::CorruptFile(format!("cannot encode model: {e}")))?;
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_model(path: &Path) -> Result<SavedModel> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::CorruptFile(format!("{}: {e}", path.display())))?;
    let found = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::CorruptFile(format!("{}: no schema_version", path.display())))?;
    if found != u64::from(SCHEMA_VERSION) {
        return Err(Error::SchemaVersionMismatch {
            found,
            expected: SCHEMA_VERSION,
        });
    }
    // Re-parse from text so floats keep their exact round-trip.
    let saved: SavedModel =
        serde_json::from_str(&text).map_err(|e| Error::CorruptFile(format!("{}: {e}", path.display())))?;
    saved.model.validate(Some(saved.train_x.cols()))?;
    Ok(saved)
}
