//! Unified evaluation of models and baselines over a dataset split.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{pagerank, personalized_pagerank, PageRankConfig};
use crate::graph::{role_labels, AnchorPair, Dataset, Graph, GraphError, SplitKind};
use crate::metrics::{ndcg_at_k, overlap_at_k, spearman_at_k, MetricError, RankedList};
use crate::model::{Cadren, ModelError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("split `{0:?}` has no (graph, pair) cells")]
    EmptySplit(SplitKind),
    #[error("scorer `{scorer}` failed on graph `{graph}`: {message}")]
    Scorer {
        scorer: String,
        graph: String,
        message: String,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("metric error on graph `{graph}`: {source}")]
    Metric { graph: String, source: MetricError },
}

/// Anything that assigns a score to every node of a graph given an anchor pair.
/// Scorers without anchor support ignore `pair.ca`; only the oracle reads `pair.gt`.
pub trait Scorer: Sync {
    fn name(&self) -> String;
    fn score(&self, graph: &Graph, pair: &AnchorPair) -> Result<Vec<f64>, String>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PageRankScorer(pub PageRankConfig);

impl Scorer for PageRankScorer {
    fn name(&self) -> String {
        "PR".into()
    }

    fn score(&self, graph: &Graph, _pair: &AnchorPair) -> Result<Vec<f64>, String> {
        Ok(pagerank(graph, self.0).scores)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PprScorer(pub PageRankConfig);

impl Scorer for PprScorer {
    fn name(&self) -> String {
        "PPR".into()
    }

    fn score(&self, graph: &Graph, pair: &AnchorPair) -> Result<Vec<f64>, String> {
        let ca = graph.indices_of(&pair.ca).map_err(|e| e.to_string())?;
        if ca.is_empty() {
            return Err("CA must be non-empty".into());
        }
        Ok(personalized_pagerank(graph, &ca, self.0).scores)
    }
}

/// Returns the ground truth itself. An upper bound and a sanity check.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleScorer;

impl Scorer for OracleScorer {
    fn name(&self) -> String {
        "Oracle".into()
    }

    fn score(&self, graph: &Graph, pair: &AnchorPair) -> Result<Vec<f64>, String> {
        role_labels(graph, pair).map_err(|e| e.to_string())
    }
}

/// A trained model under a display name.
pub struct CadrenScorer<'a> {
    pub model: &'a Cadren,
    pub label: String,
}

impl<'a> CadrenScorer<'a> {
    pub fn new(model: &'a Cadren) -> Self {
        Self {
            model,
            label: "CADReN".into(),
        }
    }
}

impl Scorer for CadrenScorer<'_> {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn score(&self, graph: &Graph, pair: &AnchorPair) -> Result<Vec<f64>, String> {
        self.model.score(graph, &pair.ca).map_err(|e: ModelError| e.to_string())
    }
}

/// Cutoffs used by [`evaluate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalKs {
    pub ndcg: usize,
    pub spm: usize,
    pub over: usize,
}

impl EvalKs {
    /// 20 for multi-graph data, 100 when the dataset is a single graph.
    pub fn for_dataset(dataset: &Dataset) -> Self {
        let k = if dataset.len() == 1 { 100 } else { 20 };
        Self {
            ndcg: k,
            spm: k,
            over: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub graph_id: String,
    pub pair_index: usize,
    pub nodes: usize,
    pub ndcg: f64,
    /// `None` when the rank correlation is undefined (constant ranks).
    pub spm: Option<f64>,
    pub over: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub dataset: String,
    pub split: SplitKind,
    pub ks: EvalKs,
    pub cells: Vec<CellReport>,
    pub mean_ndcg: f64,
    /// Mean over cells with a defined SPM.
    pub mean_spm: Option<f64>,
    pub spm_undefined: usize,
    pub mean_over: f64,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn cell(
    scorer: &dyn Scorer,
    graph: &Graph,
    pair_index: usize,
    ks: EvalKs,
) -> Result<CellReport, EvalError> {
    let pair = &graph.pairs()[pair_index];
    let scores = scorer.score(graph, pair).map_err(|message| EvalError::Scorer {
        scorer: scorer.name(),
        graph: graph.id().to_string(),
        message,
    })?;
    if scores.len() != graph.len() {
        return Err(EvalError::Scorer {
            scorer: scorer.name(),
            graph: graph.id().to_string(),
            message: format!("returned {} scores for {} nodes", scores.len(), graph.len()),
        });
    }
    let truth = role_labels(graph, pair)?;
    let ids: Vec<&str> = graph.nodes().iter().map(|n| n.id.as_str()).collect();
    let ranked = RankedList::new(&ids, &scores);
    let metric = |source| EvalError::Metric {
        graph: graph.id().to_string(),
        source,
    };
    let ndcg = ndcg_at_k(&ranked, &truth, ks.ndcg).map_err(metric)?;
    let spm = match spearman_at_k(&ranked, &truth, ks.spm) {
        Ok(v) => Some(v),
        Err(MetricError::Undefined | MetricError::TooShort(_)) => None,
        Err(e) => return Err(metric(e)),
    };
    let over = overlap_at_k(&ranked, &truth, pair.gt.len(), ks.over).map_err(metric)?;
    Ok(CellReport {
        graph_id: graph.id().to_string(),
        pair_index,
        nodes: graph.len(),
        ndcg,
        spm,
        over,
    })
}

/// Scores every (graph, pair) cell of `split` and averages the metrics
/// without weighting. Cells are computed in parallel; the order of
/// `cells` follows the split file.
pub fn evaluate(
    scorer: &dyn Scorer,
    dataset: &Dataset,
    dataset_name: &str,
    split: SplitKind,
    ks: EvalKs,
) -> Result<EvalReport, EvalError> {
    let jobs: Vec<(&Graph, usize)> = dataset
        .graphs_in(split)
        .into_iter()
        .flat_map(|g| (0..g.pairs().len()).map(move |i| (g, i)))
        .collect();
    if jobs.is_empty() {
        return Err(EvalError::EmptySplit(split));
    }
    let cells = jobs
        .par_iter()
        .map(|&(g, i)| cell(scorer, g, i, ks))
        .collect::<Result<Vec<_>, _>>()?;
    let spm_undefined = cells.iter().filter(|c| c.spm.is_none()).count();
    Ok(EvalReport {
        method: scorer.name(),
        dataset: dataset_name.to_string(),
        split,
        ks,
        mean_ndcg: mean(cells.iter().map(|c| c.ndcg)).unwrap_or(0.0),
        mean_spm: mean(cells.iter().filter_map(|c| c.spm)),
        spm_undefined,
        mean_over: mean(cells.iter().map(|c| c.over)).unwrap_or(0.0),
        cells,
    })
}

/// Methods as rows, (dataset, metric) as column groups.
pub fn render_table(reports: &[EvalReport]) -> String {
    let mut datasets: Vec<&str> = Vec::new();
    let mut methods: Vec<&str> = Vec::new();
    for r in reports {
        if !datasets.contains(&r.dataset.as_str()) {
            datasets.push(&r.dataset);
        }
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }
    let width = methods.iter().map(|m| m.len()).max().unwrap_or(6).max(6);
    let col = 8;
    let mut out = String::new();
    let _ = write!(out, "{:<width$}", "Method");
    for d in &datasets {
        let group = 3 * (col + 1);
        let _ = write!(out, " |{:^group$}", d);
    }
    out.push('\n');
    let _ = write!(out, "{:<width$}", "");
    for d in &datasets {
        let ks = reports.iter().find(|r| r.dataset == *d).map(|r| r.ks);
        let (kn, ko) = ks.map_or((20, 2), |k| (k.ndcg, k.over));
        let _ = write!(
            out,
            " | {:>col$} {:>col$} {:>col$}",
            format!("NDCG@{kn}"),
            "SPM",
            format!("OVER@{ko}")
        );
    }
    out.push('\n');
    let rule = width + datasets.len() * (3 + 3 * (col + 1));
    out.push_str(&"-".repeat(rule));
    out.push('\n');
    for m in &methods {
        let _ = write!(out, "{:<width$}", m);
        for d in &datasets {
            match reports.iter().find(|r| r.method == *m && r.dataset == *d) {
                Some(r) => {
                    let spm = r.mean_spm.map_or("-".to_string(), |v| format!("{v:.4}"));
                    let _ = write!(
                        out,
                        " | {:>col$.4} {:>col$} {:>col$.4}",
                        r.mean_ndcg, spm, r.mean_over
                    );
                }
                None => {
                    let _ = write!(out, " | {:>col$} {:>col$} {:>col$}", "-", "-", "-");
                }
            }
        }
        out.push('\n');
    }
    out
}
