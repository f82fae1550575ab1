use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diversity::TrainConfig;
use crate::error::{AdqError, Result};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "ADQ_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscriminatorKind {
    /// Per-bin two-layer perceptron trained contrastively.
    Mlp,
    /// `d(x) = x`, no training.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscriminatorConfig {
    pub kind: DiscriminatorKind,
    pub hidden: usize,
    pub embed: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Append per-channel image means to the discriminator input.
    pub channel_means: bool,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        DiscriminatorConfig {
            kind: DiscriminatorKind::Mlp,
            hidden: t.hidden,
            embed: t.embed,
            epochs: t.epochs,
            learning_rate: t.learning_rate,
            channel_means: false,
        }
    }
}

impl DiscriminatorConfig {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            hidden: self.hidden,
            embed: self.embed,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AugmentChoice {
    /// Pixel views when images and the fallback featurizer are both
    /// available, feature noise otherwise.
    Auto,
    Identity,
    FeatureNoise,
    Pixel,
}

/// Where the feature table came from; pixel augmentation must re-run the
/// same featurizer on augmented images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum FeaturizerConfig {
    Precomputed,
    Fallback { out_dim: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Number of bins `m`.
    pub bins: usize,
    pub alpha: f64,
    pub tau: f64,
    /// Patch side `L`.
    pub patch: usize,
    /// Keep ratio `rho`.
    pub rho: f64,
    pub seed: u64,
    pub discriminator: DiscriminatorConfig,
    pub augmentation: AugmentChoice,
    pub featurizer: FeaturizerConfig,
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    /// Worker threads; falls back to `ADQ_THREADS`, then rayon's default.
    pub threads: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            bins: 10,
            alpha: 0.65,
            tau: 0.5,
            patch: 8,
            rho: 0.1,
            seed: 1,
            discriminator: DiscriminatorConfig::default(),
            augmentation: AugmentChoice::Auto,
            featurizer: FeaturizerConfig::Precomputed,
            manifest: None,
            out: None,
            threads: None,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| AdqError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| AdqError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(AdqError::BadAlpha(self.alpha));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(AdqError::BadKeepRatio(self.rho));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(AdqError::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if self.bins == 0 {
            return Err(AdqError::Config("bins must be at least 1".into()));
        }
        if self.patch < 2 {
            return Err(AdqError::Config(format!("patch side must be at least 2, got {}", self.patch)));
        }
        if self.threads == Some(0) {
            return Err(AdqError::Config("threads must be at least 1".into()));
        }
        let d = &self.discriminator;
        if d.kind == DiscriminatorKind::Mlp
            && (d.hidden == 0 || d.embed == 0 || !(d.learning_rate.is_finite() && d.learning_rate >= 0.0))
        {
            return Err(AdqError::Config("invalid discriminator hyperparameters".into()));
        }
        Ok(())
    }

    /// Hash of every field that can change the output. Paths, output
    /// location and thread count are excluded; the feature file checksum
    /// stands in for the input.
    pub fn hash(&self, feature_sha256: &str) -> String {
        let mut semantic = self.clone();
        semantic.manifest = None;
        semantic.out = None;
        semantic.threads = None;
        let json = serde_json::to_string(&semantic).expect("config serializes");
        let mut h = Sha256::new();
        h.update(json.as_bytes());
        h.update(b"\0");
        h.update(feature_sha256.as_bytes());
        hex::encode(h.finalize())
    }

    /// Explicit setting, else `ADQ_THREADS`, else `None` (rayon default).
    pub fn resolved_threads(&self) -> Result<Option<usize>> {
        if let Some(t) = self.threads {
            return Ok(Some(t));
        }
        match std::env::var(THREADS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n >= 1 => Ok(Some(n)),
                _ => Err(AdqError::Config(format!("{THREADS_ENV}={v} is not a positive integer"))),
            },
            Err(_) => Ok(None),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!((c.bins, c.alpha, c.tau, c.patch), (10, 0.65, 0.5, 8));
    }

    #[test]
    fn rejects_out_of_range() {
        let mut c = PipelineConfig { alpha: 1.2, ..Default::default() };
        assert!(matches!(c.validate(), Err(AdqError::BadAlpha(_))));
        c.alpha = 0.5;
        c.rho = 0.0;
        assert!(matches!(c.validate(), Err(AdqError::BadKeepRatio(_))));
        c.rho = 0.5;
        c.tau = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_tracks_semantic_fields_only() {
        let base = PipelineConfig::default();
        let h = base.hash("abc");
        let cosmetic = PipelineConfig {
            out: Some("/tmp/x".into()),
            threads: Some(3),
            manifest: Some("m.json".into()),
            ..base.clone()
        };
        assert_eq!(cosmetic.hash("abc"), h);
        assert_ne!(base.hash("abd"), h);
        assert_ne!(PipelineConfig { alpha: 0.6, ..base.clone() }.hash("abc"), h);
        assert_ne!(PipelineConfig { seed: 2, ..base.clone() }.hash("abc"), h);
        let mut d = base.clone();
        d.discriminator.epochs = 6;
        assert_ne!(d.hash("abc"), h);
    }

    #[test]
    fn json_overrides_defaults() {
        let c: PipelineConfig =
            serde_json::from_str(r#"{"rho":0.3,"discriminator":{"kind":"identity"}}"#).unwrap();
        assert_eq!(c.rho, 0.3);
        assert_eq!(c.discriminator.kind, DiscriminatorKind::Identity);
        assert_eq!(c.discriminator.hidden, 128);
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"bogus":1}"#).is_err());
    }
}
