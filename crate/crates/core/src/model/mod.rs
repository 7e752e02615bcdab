//! The anchor-conditioned importance network, its training driver and
//! inference entry points.

pub mod bundle;
pub mod config;
pub mod forward;
pub mod infer;
pub mod inputs;
pub mod params;
pub mod similarity;
pub mod train;

use thiserror::Error;

use cadren_autodiff::TensorError;

use crate::features::FeatureError;
use crate::graph::GraphError;

pub use bundle::{Cadren, ProviderSpec, Sidecar};
pub use config::{Ablation, ModelConfig};
pub use forward::{ForwardOutput, LossWeights};
pub use inputs::{ExampleInputs, TrainingExample};
pub use params::init_params;
pub use similarity::{fit_structural_regression, least_squares, StructuralRegression};
pub use train::{train, EpochLog, TrainOutput};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("split `{0}` has no examples")]
    EmptySplit(String),
    #[error("CA must be non-empty")]
    EmptyCa,
    #[error("non-finite loss at epoch {epoch} on graph `{graph}`: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        graph: String,
        detail: String,
    },
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}
