//! Ranking metrics: NDCG@k with log-graded relevance, Spearman rank
//! correlation, and Overlap@k with a cutoff that scales with |GT|.
//!
//! Every ordering in this module breaks score ties by ascending node id, so
//! results are reproducible even with binary truth labels.

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("rank correlation is undefined for constant input")]
    Undefined,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least two items, got {0}")]
    TooShort(usize),
    #[error("invalid argument: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    /// Position of the node in its graph's node order.
    #[serde(skip)]
    pub index: usize,
    pub node: String,
    pub score: f64,
}

/// Nodes in descending score order, ties broken by ascending id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RankedList {
    pub entries: Vec<RankedEntry>,
}

/// Descending by score, then ascending by id.
pub fn rank_order(a: (f64, &str), b: (f64, &str)) -> Ordering {
    b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal).then_with(|| a.1.cmp(b.1))
}

impl RankedList {
    pub fn new<S: AsRef<str>>(ids: &[S], scores: &[f64]) -> Self {
        assert_eq!(ids.len(), scores.len(), "ids and scores must align");
        let mut order: Vec<usize> = (0..ids.len()).collect();
        order.sort_by(|&i, &j| rank_order((scores[i], ids[i].as_ref()), (scores[j], ids[j].as_ref())));
        Self {
            entries: order
                .into_iter()
                .map(|i| RankedEntry {
                    index: i,
                    node: ids[i].as_ref().to_string(),
                    score: scores[i],
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn top(&self, k: usize) -> &[RankedEntry] {
        &self.entries[..k.min(self.entries.len())]
    }

    pub fn truncated(mut self, k: usize) -> Self {
        self.entries.truncate(k);
        self
    }

    /// Ids in graph order, recovered from the entries.
    fn ids_in_graph_order(&self) -> Vec<&str> {
        let mut ids = vec![""; self.entries.len()];
        for e in &self.entries {
            ids[e.index] = &e.node;
        }
        ids
    }
}

fn dcg(rels: impl Iterator<Item = f64>) -> f64 {
    rels.enumerate().map(|(i, r)| r / ((i + 2) as f64).log2()).sum()
}

/// NDCG@k with graded relevance `ln(1 + truth)`.
///
/// `truth` is indexed by graph node order. A `k` larger than the list is
/// evaluated at full length. Returns 0 when the ideal DCG is 0.
pub fn ndcg_at_k(pred: &RankedList, truth: &[f64], k: usize) -> Result<f64, MetricError> {
    if k == 0 {
        return Err(MetricError::Invalid("k must be >= 1".into()));
    }
    if pred.len() != truth.len() {
        return Err(MetricError::LengthMismatch(pred.len(), truth.len()));
    }
    if truth.iter().any(|t| *t < 0.0 || !t.is_finite()) {
        return Err(MetricError::Invalid("truth must be finite and non-negative".into()));
    }
    let k = k.min(truth.len());
    let got = dcg(pred.top(k).iter().map(|e| truth[e.index].ln_1p()));
    let ideal_list = RankedList::new(&pred.ids_in_graph_order(), truth);
    let ideal = dcg(ideal_list.top(k).iter().map(|e| truth[e.index].ln_1p()));
    Ok(if ideal == 0.0 { 0.0 } else { got / ideal })
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            ranks[o] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::Undefined);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman correlation: Pearson correlation of average ranks.
pub fn spearman(pred: &[f64], truth: &[f64]) -> Result<f64, MetricError> {
    if pred.len() != truth.len() {
        return Err(MetricError::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.len() < 2 {
        return Err(MetricError::TooShort(pred.len()));
    }
    pearson(&average_ranks(pred), &average_ranks(truth))
}

/// Spearman over the `k` best-predicted nodes.
pub fn spearman_at_k(pred: &RankedList, truth: &[f64], k: usize) -> Result<f64, MetricError> {
    let top = pred.top(k);
    let p: Vec<f64> = top.iter().map(|e| e.score).collect();
    let t: Vec<f64> = top.iter().map(|e| truth[e.index]).collect();
    spearman(&p, &t)
}

/// Overlap of the predicted and true top-m sets, `m = min(k * |GT|, n)`.
pub fn overlap_at_k(pred: &RankedList, truth: &[f64], gt_size: usize, k: usize) -> Result<f64, MetricError> {
    if gt_size == 0 {
        return Err(MetricError::Invalid("|GT| must be >= 1".into()));
    }
    if pred.len() != truth.len() {
        return Err(MetricError::LengthMismatch(pred.len(), truth.len()));
    }
    let m = (k * gt_size).min(truth.len());
    if m == 0 {
        return Err(MetricError::Invalid("cutoff m is zero".into()));
    }
    let truth_list = RankedList::new(&pred.ids_in_graph_order(), truth);
    let truth_top: HashSet<usize> = truth_list.top(m).iter().map(|e| e.index).collect();
    let hits = pred.top(m).iter().filter(|e| truth_top.contains(&e.index)).count();
    Ok(hits as f64 / m as f64)
}
