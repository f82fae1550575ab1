use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::features::{load_features, FeatureTable};
use super::images::{load_images, ImageTable};
use crate::error::{AdqError, Result};

/// JSON description of a dataset on disk. Relative paths are resolved
/// against the manifest's own directory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub feature_path: PathBuf,
    pub image_path: Option<PathBuf>,
    /// Per-item class labels; empty when the dataset is unlabeled.
    pub labels: Vec<u32>,
    /// Lower-case hex SHA-256 of the feature file.
    pub sha256: String,
}

/// Everything a pipeline run needs, loaded and cross-checked.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: FeatureTable,
    pub images: Option<ImageTable>,
    pub manifest: DatasetManifest,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| AdqError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl DatasetManifest {
    /// Describes an existing feature file, hashing it.
    pub fn describe(
        feature_path: impl Into<PathBuf>,
        image_path: Option<PathBuf>,
        labels: Vec<u32>,
        base: &Path,
    ) -> Result<Self> {
        let feature_path = feature_path.into();
        let sha256 = sha256_file(&base.join(&feature_path))?;
        Ok(DatasetManifest {
            feature_path,
            image_path,
            labels,
            sha256,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| AdqError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| AdqError::parse("manifest", e))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text + "\n").map_err(|e| AdqError::io(path, e))
    }
}

/// Loads a manifest and the files it references, verifying the checksum,
/// the label count and the image count.
pub fn load_dataset(manifest_path: impl AsRef<Path>) -> Result<Dataset> {
    let manifest_path = manifest_path.as_ref();
    let manifest = DatasetManifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let feature_path = base.join(&manifest.feature_path);
    let actual = sha256_file(&feature_path)?;
    if !actual.eq_ignore_ascii_case(&manifest.sha256) {
        return Err(AdqError::ChecksumMismatch {
            path: feature_path,
            expected: manifest.sha256.clone(),
            actual,
        });
    }
    let mut features = load_features(&feature_path)?;
    if !manifest.labels.is_empty() {
        features = features.with_labels(manifest.labels.clone())?;
    }
    let images = match &manifest.image_path {
        Some(p) => {
            let images = load_images(base.join(p))?;
            if images.len() != features.len() {
                return Err(AdqError::InvalidInput(format!(
                    "{} images for {} feature rows",
                    images.len(),
                    features.len()
                )));
            }
            Some(images)
        }
        None => None,
    };
    Ok(Dataset {
        features,
        images,
        manifest,
    })
}
