//! Run configuration: one JSON document with `data`, `model`, `train`,
//! `semantic` and `serve` sections. Command-line flags override it.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cadren_core::datagen::GenConfig;
use cadren_core::model::{ModelConfig, ProviderSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub semantic: SemanticSection,
    pub serve: ServeSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub dataset: Option<PathBuf>,
    pub split: Option<PathBuf>,
    /// Display name in reports; defaults to the dataset file stem.
    pub name: Option<String>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub gen: Option<GenConfig>,
}

/// Training overrides applied on top of `model`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub patience: Option<usize>,
    pub seed: Option<u64>,
    pub regression_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemanticSection {
    /// `hash` or `file`.
    pub provider: String,
    pub dim: usize,
    pub seed: u64,
    pub path: Option<PathBuf>,
}

impl Default for SemanticSection {
    fn default() -> Self {
        Self {
            provider: "hash".into(),
            dim: 64,
            seed: 0,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeSection {
    pub host: String,
    pub port: u16,
}

impl Default for ServeSection {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
        }
    }
}

impl RunConfig {
    /// Reads a config file. A run manifest is accepted too; its recorded
    /// config is used.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let value = match value.get("config") {
            Some(inner) if value.get("command").is_some() => inner.clone(),
            _ => value,
        };
        serde_json::from_value(value).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    /// The model config with `train` overrides applied.
    pub fn model_config(&self) -> Result<ModelConfig> {
        let mut m = self.model.clone();
        let t = &self.train;
        if let Some(v) = t.epochs {
            m.epochs = v;
        }
        if let Some(v) = t.lr {
            m.lr = v;
        }
        if let Some(v) = t.patience {
            m.patience = v;
        }
        if let Some(v) = t.seed {
            m.seed = v;
        }
        if let Some(v) = t.regression_fraction {
            m.regression_fraction = v;
        }
        m.d_sem = self.semantic.dim;
        m.validate()?;
        Ok(m)
    }

    pub fn provider_spec(&self) -> Result<ProviderSpec> {
        match self.semantic.provider.as_str() {
            "hash" => Ok(ProviderSpec::Hash {
                dim: self.semantic.dim,
                seed: self.semantic.seed,
            }),
            "file" => match &self.semantic.path {
                Some(path) => Ok(ProviderSpec::File {
                    path: path.clone(),
                    dim: self.semantic.dim,
                }),
                None => bail!("semantic.provider = \"file\" requires semantic.path"),
            },
            other => bail!("unknown semantic provider `{other}` (expected `hash` or `file`)"),
        }
    }

    pub fn dataset_path(&self) -> Result<&Path> {
        self.data
            .dataset
            .as_deref()
            .context("no dataset given (use --data or data.dataset)")
    }

    pub fn dataset_name(&self) -> String {
        self.data.name.clone().unwrap_or_else(|| {
            self.data
                .dataset
                .as_deref()
                .and_then(Path::file_stem)
                .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_are_optional() {
        let c: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, RunConfig::default());
        let c: RunConfig = serde_json::from_str(r#"{"train": {"epochs": 3}, "semantic": {"seed": 9}}"#).unwrap();
        let m = c.model_config().unwrap();
        assert_eq!(m.epochs, 3);
        assert_eq!(c.provider_spec().unwrap(), ProviderSpec::Hash { dim: 64, seed: 9 });
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"trian": {}}"#).is_err());
    }

    #[test]
    fn invalid_model_config_fails_validation() {
        let c: RunConfig = serde_json::from_str(r#"{"model": {"d_model": 0}}"#).unwrap();
        assert!(c.model_config().is_err());
    }

    #[test]
    fn file_provider_needs_a_path() {
        let c: RunConfig = serde_json::from_str(r#"{"semantic": {"provider": "file"}}"#).unwrap();
        assert!(c.provider_spec().is_err());
    }
}
