//! Raw per-(graph, anchor set) inputs to the network.
//!
//! Everything here is independent of the trainable parameters, so it is
//! computed once per example and reused across epochs.

use std::collections::BTreeSet;

use cadren_autodiff::Tensor;

use crate::features::{semantic_embed, structural_features_all, EmbeddingProvider, STRUCTURAL_DIM};
use crate::graph::{role_labels, AnchorPair, Graph};

use super::config::ModelConfig;
use super::similarity::{semantic_similarity, structural_similarity, StructuralRegression};
use super::ModelError;

#[derive(Debug, Clone)]
pub struct ExampleInputs {
    pub graph_id: String,
    pub node_ids: Vec<String>,
    /// Anchor node indices in ascending id order.
    pub ca: Vec<usize>,
    /// `[N, d_sem]` provider embeddings.
    pub semantic: Tensor,
    /// `[N, 5]` normalized structural features.
    pub structural: Tensor,
    pub s_sem: Vec<f64>,
    pub s_str: Vec<f64>,
}

impl ExampleInputs {
    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    /// Rows of `t` at the anchor positions.
    pub fn gather_ca(&self, t: &Tensor) -> Tensor {
        let rows: Vec<Vec<f64>> = self.ca.iter().map(|&i| t.row(i).to_vec()).collect();
        Tensor::from_rows(&rows).expect("anchor rows share a width")
    }

    /// Builds inputs for one anchor set.
    ///
    /// Network inputs embed each node together with the anchor texts;
    /// `s_sem` compares embeddings of the node texts alone.
    ///
    /// With `enable_ca` off the network sees no anchor information at all:
    /// embeddings are computed from node text alone, the distance-to-anchor
    /// features are zeroed and both similarity vectors are 0.5.
    pub fn build(
        graph: &Graph,
        ca: &BTreeSet<String>,
        provider: &dyn EmbeddingProvider,
        regression: &StructuralRegression,
        cfg: &ModelConfig,
    ) -> Result<Self, ModelError> {
        if ca.is_empty() {
            return Err(ModelError::EmptyCa);
        }
        if provider.dim() != cfg.d_sem {
            return Err(ModelError::Config(format!(
                "provider `{}` has dim {}, model expects d_sem = {}",
                provider.name(),
                provider.dim(),
                cfg.d_sem
            )));
        }
        let ca_idx = graph.indices_of(ca)?;
        let n = graph.len();
        let ca_texts: Vec<&str> = ca_idx.iter().map(|&i| graph.nodes()[i].text.as_str()).collect();

        let embeddings = graph
            .nodes()
            .iter()
            .map(|node| {
                if cfg.enable_ca {
                    semantic_embed(provider, &node.text, &ca_texts)
                } else {
                    provider.embed(&node.text)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;

        let raw = structural_features_all(graph, &ca_idx)?;
        let mut normalized: Vec<[f64; STRUCTURAL_DIM]> = raw.iter().map(|f| f.normalized(n)).collect();

        let (s_sem, s_str) = if cfg.enable_ca {
            let plain = graph
                .nodes()
                .iter()
                .map(|node| provider.embed(&node.text))
                .collect::<Result<Vec<_>, _>>()?;
            (
                semantic_similarity(&plain, &ca_idx),
                structural_similarity(&normalized, regression),
            )
        } else {
            for x in normalized.iter_mut() {
                x[2..].iter_mut().for_each(|v| *v = 0.0);
            }
            (vec![0.5; n], vec![0.5; n])
        };

        Ok(Self {
            graph_id: graph.id().to_string(),
            node_ids: graph.nodes().iter().map(|n| n.id.clone()).collect(),
            ca: ca_idx,
            semantic: Tensor::new(vec![n, cfg.d_sem], embeddings.concat())?,
            structural: Tensor::new(vec![n, STRUCTURAL_DIM], normalized.concat())?,
            s_sem,
            s_str,
        })
    }
}

/// An input bundle plus its supervision target, normalized to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub inputs: ExampleInputs,
    pub target: Vec<f64>,
    /// Raw labels used for ranking metrics.
    pub truth: Vec<f64>,
    pub gt_size: usize,
}

impl TrainingExample {
    pub fn build(
        graph: &Graph,
        pair: &AnchorPair,
        provider: &dyn EmbeddingProvider,
        regression: &StructuralRegression,
        cfg: &ModelConfig,
    ) -> Result<Self, ModelError> {
        let inputs = ExampleInputs::build(graph, &pair.ca, provider, regression, cfg)?;
        let truth = role_labels(graph, pair)?;
        Ok(Self {
            inputs,
            target: normalize_target(&truth),
            truth,
            gt_size: pair.gt.len(),
        })
    }
}

/// Divides by the maximum so continuous importances fit BCE targets.
pub fn normalize_target(truth: &[f64]) -> Vec<f64> {
    let max = truth.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        truth.iter().map(|t| t / max).collect()
    } else {
        truth.to_vec()
    }
}
