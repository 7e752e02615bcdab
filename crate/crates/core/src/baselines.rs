//! PageRank and Personalized PageRank by power iteration.

use log::warn;

use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PageRankConfig {
    pub damping: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PageRankConfig {
    fn default() -> Self {
        Self {
            damping: 0.85,
            tol: 1e-10,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PageRankResult {
    pub scores: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration with teleport distribution `teleport` (must sum to 1).
/// Mass from nodes without out-edges is sent back along `teleport`.
fn power_iteration(graph: &Graph, teleport: &[f64], cfg: PageRankConfig) -> PageRankResult {
    let n = graph.len();
    let d = cfg.damping;
    let mut rank = teleport.to_vec();
    let mut next = vec![0.0; n];
    for it in 1..=cfg.max_iter {
        next.iter_mut().for_each(|x| *x = 0.0);
        let mut dangling = 0.0;
        for u in 0..n {
            let out = graph.successors(u);
            if out.is_empty() {
                dangling += rank[u];
            } else {
                let share = rank[u] / out.len() as f64;
                for &v in out {
                    next[v] += share;
                }
            }
        }
        for (x, t) in next.iter_mut().zip(teleport) {
            *x = d * (*x + dangling * t) + (1.0 - d) * t;
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let delta: f64 = next.iter().zip(&rank).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut rank, &mut next);
        if delta < cfg.tol {
            return PageRankResult {
                scores: rank,
                iterations: it,
                converged: true,
            };
        }
    }
    warn!("pagerank on `{}` did not converge in {} iterations", graph.id(), cfg.max_iter);
    PageRankResult {
        scores: rank,
        iterations: cfg.max_iter,
        converged: false,
    }
}

pub fn pagerank(graph: &Graph, cfg: PageRankConfig) -> PageRankResult {
    let n = graph.len();
    power_iteration(graph, &vec![1.0 / n as f64; n], cfg)
}

/// PageRank whose teleport is uniform over the anchor nodes `ca`.
pub fn personalized_pagerank(graph: &Graph, ca: &[usize], cfg: PageRankConfig) -> PageRankResult {
    let n = graph.len();
    let mut teleport = vec![0.0; n];
    let mut uniq = ca.to_vec();
    uniq.sort_unstable();
    uniq.dedup();
    for &c in &uniq {
        teleport[c] = 1.0 / uniq.len() as f64;
    }
    power_iteration(graph, &teleport, cfg)
}
