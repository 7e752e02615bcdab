//! Training driver: seeded shuffling, one Adam step per (graph, pair)
//! example, early stopping on validation NDCG@20.

use cadren_autodiff::{AdamConfig, AdamState, ParamSet, Tape, TensorError};
use log::info;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::fingerprint::sha256_hex;
use crate::graph::{Dataset, SplitKind};
use crate::metrics::{ndcg_at_k, RankedList};

use super::bundle::{Cadren, ProviderSpec};
use super::config::ModelConfig;
use super::forward::{forward, training_loss};
use super::inputs::TrainingExample;
use super::params::init_params;
use super::similarity::{fit_structural_regression, StructuralRegression};
use super::ModelError;

/// NDCG cutoff used for model selection.
pub const VAL_NDCG_K: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_ndcg: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub model: Cadren,
    pub log: Vec<EpochLog>,
    /// Epoch whose parameters were kept (0 = initialization).
    pub best_epoch: usize,
}

impl TrainOutput {
    /// `epoch,train_loss,val_ndcg20` CSV.
    pub fn log_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_ndcg20\n");
        for e in &self.log {
            let v = e.val_ndcg.map_or(String::new(), |v| format!("{v:.6}"));
            s.push_str(&format!("{},{:.6},{}\n", e.epoch, e.train_loss, v));
        }
        s
    }
}

fn build_examples(
    dataset: &Dataset,
    kind: SplitKind,
    cfg: &ModelConfig,
    provider: &dyn crate::features::EmbeddingProvider,
    regression: &StructuralRegression,
) -> Result<Vec<TrainingExample>, ModelError> {
    dataset
        .cells(kind)
        .into_par_iter()
        .map(|(g, p)| TrainingExample::build(g, p, provider, regression, cfg))
        .collect()
}

/// Mean NDCG@k of `params` over prepared examples.
pub fn mean_ndcg(params: &ParamSet, cfg: &ModelConfig, examples: &[TrainingExample], k: usize) -> Result<f64, ModelError> {
    let cells: Vec<f64> = examples
        .par_iter()
        .map(|ex| {
            let mut tape = Tape::new();
            let bound = params.bind_frozen(&mut tape);
            let fv = forward(&mut tape, &bound, &ex.inputs, cfg, None)?;
            let scores = tape.value(fv.i_final).data().to_vec();
            let ranked = RankedList::new(&ex.inputs.node_ids, &scores);
            ndcg_at_k(&ranked, &ex.truth, k).map_err(|e| ModelError::Config(e.to_string()))
        })
        .collect::<Result<_, ModelError>>()?;
    Ok(cells.iter().sum::<f64>() / cells.len().max(1) as f64)
}

/// SHA-256 over the training graphs in split order.
pub fn training_fingerprint(dataset: &Dataset) -> String {
    let mut bytes = Vec::new();
    for g in dataset.graphs_in(SplitKind::Train) {
        bytes.extend(serde_json::to_vec(g.record()).unwrap_or_default());
        bytes.push(b'\n');
    }
    format!("sha256:{}", sha256_hex(&bytes))
}

pub fn train(dataset: &Dataset, cfg: &ModelConfig, provider_spec: ProviderSpec) -> Result<TrainOutput, ModelError> {
    cfg.validate()?;
    let train_graphs = dataset.graphs_in(SplitKind::Train);
    if dataset.cells(SplitKind::Train).is_empty() {
        return Err(ModelError::EmptySplit("train".into()));
    }
    let regression = fit_structural_regression(&train_graphs, cfg.regression_fraction, cfg.seed)?;
    let mut model = Cadren::new(init_params(cfg), cfg.clone(), regression, provider_spec)?
        .with_fingerprint(training_fingerprint(dataset));

    let examples = build_examples(dataset, SplitKind::Train, cfg, model.provider(), &regression)?;
    let val = build_examples(dataset, SplitKind::Val, cfg, model.provider(), &regression)?;

    let mut params = model.params.clone();
    let mut adam = AdamState::new(
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
        &params,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x7a11_0c0d));
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut log = Vec::new();
    let mut best = (f64::NEG_INFINITY, 0usize, params.clone());
    if !val.is_empty() {
        best.0 = mean_ndcg(&params, cfg, &val, VAL_NDCG_K)?;
    }
    let mut stale = 0;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let ex = &examples[i];
            let mask: Vec<bool> = (0..ex.inputs.len()).map(|_| rng.gen::<f64>() < cfg.ae_drop_prob).collect();
            let mut tape = Tape::new();
            let bound = params.bind(&mut tape);
            let nonfinite = |e: ModelError| match e {
                ModelError::Tensor(TensorError::NonFinite { op }) => ModelError::NonFiniteLoss {
                    epoch,
                    graph: ex.inputs.graph_id.clone(),
                    detail: format!("non-finite value in {op}"),
                },
                other => other,
            };
            let (_, loss) =
                training_loss(&mut tape, &bound, &ex.inputs, &ex.target, cfg, &mask).map_err(nonfinite)?;
            let value = tape.value(loss).item();
            let mut grads = tape.backward(loss)?;
            let g = bound.gradients(&mut grads)?;
            if g.iter().any(|t| !t.is_finite()) {
                return Err(ModelError::NonFiniteLoss {
                    epoch,
                    graph: ex.inputs.graph_id.clone(),
                    detail: "non-finite gradient".into(),
                });
            }
            adam.step(&mut params, &g)?;
            total += value;
        }
        let train_loss = total / examples.len() as f64;
        let val_ndcg = if val.is_empty() {
            None
        } else {
            Some(mean_ndcg(&params, cfg, &val, VAL_NDCG_K)?)
        };
        info!("epoch {epoch}: loss {train_loss:.5} val ndcg@20 {val_ndcg:?}");
        log.push(EpochLog {
            epoch,
            train_loss,
            val_ndcg,
        });
        match val_ndcg {
            Some(v) if v > best.0 => {
                best = (v, epoch, params.clone());
                stale = 0;
            }
            Some(_) => {
                stale += 1;
                if stale >= cfg.patience {
                    info!("early stop at epoch {epoch}, best epoch {}", best.1);
                    break;
                }
            }
            None => best = (f64::NEG_INFINITY, epoch, params.clone()),
        }
    }

    model.params = best.2;
    Ok(TrainOutput {
        model,
        log,
        best_epoch: best.1,
    })
}
