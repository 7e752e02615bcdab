//! A trained model: parameters, configuration, the frozen structural
//! regression and the embedding provider it was trained with.
//!
//! On disk this is a binary parameter checkpoint plus a JSON sidecar at
//! `<checkpoint>.json`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use cadren_autodiff::{checkpoint, ParamSet};
use serde::{Deserialize, Serialize};

use crate::features::{load_file_provider, EmbeddingProvider, HashProvider};

use super::config::ModelConfig;
use super::similarity::StructuralRegression;
use super::ModelError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProviderSpec {
    Hash { dim: usize, seed: u64 },
    File { path: PathBuf, dim: usize },
}

impl Default for ProviderSpec {
    fn default() -> Self {
        ProviderSpec::Hash { dim: 64, seed: 0 }
    }
}

impl ProviderSpec {
    pub fn dim(&self) -> usize {
        match self {
            ProviderSpec::Hash { dim, .. } | ProviderSpec::File { dim, .. } => *dim,
        }
    }

    pub fn build(&self) -> Result<Arc<dyn EmbeddingProvider>, ModelError> {
        Ok(match self {
            ProviderSpec::Hash { dim, seed } => Arc::new(HashProvider::new(*dim, *seed)?),
            ProviderSpec::File { path, dim } => Arc::new(load_file_provider(path, *dim)?),
        })
    }
}

/// JSON metadata stored next to the parameter checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format_version: u32,
    pub config: ModelConfig,
    pub regression: StructuralRegression,
    pub provider: ProviderSpec,
    pub provider_name: String,
    pub training_fingerprint: String,
}

#[derive(Clone)]
pub struct Cadren {
    pub params: ParamSet,
    pub config: ModelConfig,
    pub regression: StructuralRegression,
    pub provider_spec: ProviderSpec,
    pub training_fingerprint: String,
    provider: Arc<dyn EmbeddingProvider>,
}

impl std::fmt::Debug for Cadren {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cadren")
            .field("config", &self.config)
            .field("regression", &self.regression)
            .field("provider", &self.provider.name())
            .field("params", &self.params.len())
            .finish()
    }
}

pub fn sidecar_path(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

impl Cadren {
    pub fn new(
        params: ParamSet,
        config: ModelConfig,
        regression: StructuralRegression,
        provider_spec: ProviderSpec,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let provider = provider_spec.build()?;
        if provider.dim() != config.d_sem {
            return Err(ModelError::Config(format!(
                "provider dim {} does not match d_sem {}",
                provider.dim(),
                config.d_sem
            )));
        }
        Ok(Self {
            params,
            config,
            regression,
            provider_spec,
            training_fingerprint: String::new(),
            provider,
        })
    }

    pub fn with_fingerprint(mut self, fp: impl Into<String>) -> Self {
        self.training_fingerprint = fp.into();
        self
    }

    pub fn provider(&self) -> &dyn EmbeddingProvider {
        self.provider.as_ref()
    }

    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            format_version: checkpoint::VERSION,
            config: self.config.clone(),
            regression: self.regression,
            provider: self.provider_spec.clone(),
            provider_name: self.provider.name().to_string(),
            training_fingerprint: self.training_fingerprint.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        checkpoint::save(&self.params, path)?;
        let side = serde_json::to_string_pretty(&self.sidecar()).map_err(|e| ModelError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let sp = sidecar_path(path);
        std::fs::write(&sp, side + "\n").map_err(|e| ModelError::Io {
            path: sp.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let params = checkpoint::load(path)?;
        let sp = sidecar_path(path);
        let io = |message: String| ModelError::Io {
            path: sp.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(&sp).map_err(|e| io(e.to_string()))?;
        let side: Sidecar = serde_json::from_str(&text).map_err(|e| io(e.to_string()))?;
        let expected = super::params::init_params(&side.config);
        for (name, t) in expected.iter() {
            let got = params.get(name)?;
            if got.shape() != t.shape() {
                return Err(ModelError::Config(format!(
                    "checkpoint parameter `{name}` has shape {:?}, config implies {:?}",
                    got.shape(),
                    t.shape()
                )));
            }
        }
        Ok(Self::new(params, side.config, side.regression, side.provider)?.with_fingerprint(side.training_fingerprint))
    }
}
