//! The single pipeline configuration file.
//!
//! Everything tunable lives here: selection tables, image size, the enabled
//! image labels, the fusion model set and the synthetic-data parameters.
//! The file is TOML; `PipelineConfig::default()` is the shipped
//! configuration and `--print-default-config` on the CLI dumps it.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encode::ImageSpec;
use crate::features::SelectionConfig;
use crate::skeleton::SynthesisParams;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Output raster dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImageSize {
    pub height: usize,
    pub width: usize,
}

impl Default for ImageSize {
    fn default() -> Self {
        Self { height: crate::encode::DEFAULT_IMAGE_SIZE, width: crate::encode::DEFAULT_IMAGE_SIZE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Texture image size; both sides must be at least 2.
    pub image: ImageSize,
    /// Image types the pipeline emits, a subset of the thirteen labels.
    pub labels: Vec<ImageSpec>,
    /// Models whose scores enter the multiplicative fusion. The default
    /// excludes JJo-JS2-EM2.
    pub fusion_models: Vec<ImageSpec>,
    /// Joint/line selection tables.
    pub selection: SelectionConfig,
    /// Synthetic sequence generator parameters.
    pub synthesis: SynthesisParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            image: ImageSize::default(),
            labels: ImageSpec::ALL.to_vec(),
            fusion_models: ImageSpec::ALL
                .iter()
                .copied()
                .filter(|s| *s != ImageSpec::JjoJs2)
                .collect(),
            selection: SelectionConfig::default(),
            synthesis: SynthesisParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.image.height < 2 || self.image.width < 2 {
            return Err(ConfigError::Invalid(format!(
                "image size must be at least 2x2, got {}x{}",
                self.image.height, self.image.width
            )));
        }
        for (name, list) in [("labels", &self.labels), ("fusion_models", &self.fusion_models)] {
            let mut seen = std::collections::BTreeSet::new();
            for spec in list {
                if !seen.insert(spec.label()) {
                    return Err(ConfigError::Invalid(format!("{name}: duplicate {spec}")));
                }
            }
        }
        if self.labels.is_empty() {
            return Err(ConfigError::Invalid("labels: at least one image type required".into()));
        }
        self.selection.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.synthesis.amplitude >= 0.0) {
            return Err(ConfigError::Invalid("synthesis.amplitude must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.synthesis.jitter) {
            return Err(ConfigError::Invalid("synthesis.jitter must be in [0, 1]".into()));
        }
        if !(self.synthesis.frequency > 0.0) {
            return Err(ConfigError::Invalid("synthesis.frequency must be > 0".into()));
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: PipelineConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// SHA-256 of the canonical TOML rendering; identifies the exact
    /// configuration in run manifests.
    pub fn config_hash(&self) -> String {
        use sha2::Digest;
        let digest = sha2::Sha256::digest(self.to_toml_string().as_bytes());
        format!("{digest:x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let config = PipelineConfig::default();
        config.validate().unwrap();
        assert_eq!(config.labels.len(), 13);
        assert_eq!(config.fusion_models.len(), 12);
        assert!(!config.fusion_models.contains(&ImageSpec::JjoJs2));

        let text = config.to_toml_string();
        let back = PipelineConfig::from_toml_str(&text).unwrap();
        assert_eq!(config, back);
        assert_eq!(config.config_hash(), back.config_hash());
    }

    #[test]
    fn partial_files_fill_in_defaults() {
        let config = PipelineConfig::from_toml_str("[image]\nheight = 64\nwidth = 64\n").unwrap();
        assert_eq!(config.image.height, 64);
        assert_eq!(config.labels.len(), 13);
    }

    #[test]
    fn bad_label_is_rejected() {
        let err = PipelineConfig::from_toml_str("labels = [\"JJq-JS1-EM1\"]").unwrap_err();
        assert!(err.to_string().contains("unknown image label"));
    }

    #[test]
    fn tiny_image_size_is_rejected() {
        let err = PipelineConfig::from_toml_str("[image]\nheight = 1\nwidth = 64\n").unwrap_err();
        assert!(err.to_string().contains("at least 2x2"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(PipelineConfig::from_toml_str("no_such_key = 3").is_err());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.image.height = 128;
        assert_ne!(a.config_hash(), b.config_hash());
    }
}
