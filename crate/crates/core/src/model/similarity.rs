//! Anchor similarity vectors used by post-processing: the mean cosine
//! similarity to the anchors, and a frozen linear regression over the
//! structural features.

use std::collections::BTreeSet;

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::{cosine, structural_features_all, STRUCTURAL_DIM};
use crate::graph::Graph;

use super::ModelError;

/// `S_sem[i]`: mean cosine between node `i`'s embedding and each anchor's.
/// Anchor nodes are pinned to 1.
pub fn semantic_similarity(embeddings: &[Vec<f64>], ca: &[usize]) -> Vec<f64> {
    let anchors: BTreeSet<usize> = ca.iter().copied().collect();
    embeddings
        .iter()
        .enumerate()
        .map(|(i, e)| {
            if anchors.contains(&i) {
                1.0
            } else {
                ca.iter().map(|&c| cosine(e, &embeddings[c])).sum::<f64>() / ca.len() as f64
            }
        })
        .collect()
}

/// `S_str[i] = clamp(b + R . x_i, 0, 1)` over normalized structural features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuralRegression {
    pub weights: [f64; STRUCTURAL_DIM],
    pub bias: f64,
}

impl StructuralRegression {
    pub fn constant(bias: f64) -> Self {
        Self {
            weights: [0.0; STRUCTURAL_DIM],
            bias,
        }
    }

    pub fn raw(&self, x: &[f64; STRUCTURAL_DIM]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn similarity(&self, x: &[f64; STRUCTURAL_DIM]) -> f64 {
        self.raw(x).clamp(0.0, 1.0)
    }
}

pub fn structural_similarity(features: &[[f64; STRUCTURAL_DIM]], reg: &StructuralRegression) -> Vec<f64> {
    features.iter().map(|x| reg.similarity(x)).collect()
}

/// Least squares with an intercept. Falls back to the constant model when
/// the design matrix is rank deficient.
pub fn least_squares(xs: &[[f64; STRUCTURAL_DIM]], ys: &[f64]) -> StructuralRegression {
    let n = xs.len();
    let mean_y = if n == 0 { 0.0 } else { ys.iter().sum::<f64>() / n as f64 };
    let cols = STRUCTURAL_DIM + 1;
    if n < cols {
        warn!("structural regression: {n} samples is too few, using the constant fit");
        return StructuralRegression::constant(mean_y);
    }
    let design = DMatrix::from_fn(n, cols, |r, c| if c == 0 { 1.0 } else { xs[r][c - 1] });
    let target = DVector::from_column_slice(ys);
    let svd = design.svd(true, true);
    let max_sv = svd.singular_values.max();
    let tol = max_sv * 1e-10 * n.max(cols) as f64;
    if max_sv == 0.0 || svd.rank(tol) < cols {
        warn!("structural regression: degenerate design matrix, using the constant fit");
        return StructuralRegression::constant(mean_y);
    }
    let Ok(beta) = svd.solve(&target, tol) else {
        warn!("structural regression: solve failed, using the constant fit");
        return StructuralRegression::constant(mean_y);
    };
    let mut weights = [0.0; STRUCTURAL_DIM];
    weights.copy_from_slice(&beta.as_slice()[1..]);
    StructuralRegression {
        weights,
        bias: beta[0],
    }
}

/// Roles a node can play under one anchor pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Stratum {
    Anchor,
    Truth,
    Background,
}

/// Fits the structural regression on a stratified sample of training
/// (graph, pair, node) triples. Each role stratum (CA, GT minus CA, the
/// rest) is sampled at `fraction`, which keeps the role ratio. Targets are
/// GT membership.
pub fn fit_structural_regression(
    graphs: &[&Graph],
    fraction: f64,
    seed: u64,
) -> Result<StructuralRegression, ModelError> {
    let mut strata: [Vec<([f64; STRUCTURAL_DIM], f64)>; 3] = Default::default();
    for g in graphs {
        for pair in g.pairs() {
            let ca = g.indices_of(&pair.ca)?;
            let feats = structural_features_all(g, &ca)?;
            for (node, f) in g.nodes().iter().zip(&feats) {
                let stratum = if pair.ca.contains(&node.id) {
                    Stratum::Anchor
                } else if pair.gt.contains(&node.id) {
                    Stratum::Truth
                } else {
                    Stratum::Background
                };
                let y = if stratum == Stratum::Background { 0.0 } else { 1.0 };
                strata[stratum as usize].push((f.normalized(g.len()), y));
            }
        }
    }
    if strata.iter().all(Vec::is_empty) {
        return Err(ModelError::EmptySplit("train".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_5e9e);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for s in &strata {
        if s.is_empty() {
            continue;
        }
        let take = ((s.len() as f64 * fraction).ceil() as usize).clamp(1, s.len());
        for i in sample(&mut rng, s.len(), take).into_iter() {
            xs.push(s[i].0);
            ys.push(s[i].1);
        }
    }
    Ok(least_squares(&xs, &ys))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(n: usize) -> Vec<[f64; STRUCTURAL_DIM]> {
        (0..n)
            .map(|i| {
                let t = i as f64;
                [
                    (t * 0.37).sin(),
                    (t * 1.3).cos(),
                    (t * 0.11).sin().abs(),
                    (t * 0.7 + 1.0).ln(),
                    t / n as f64,
                ]
            })
            .collect()
    }

    #[test]
    fn semantic_similarity_cases() {
        let e = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![0.0, 0.0]];
        let s = semantic_similarity(&e, &[0]);
        assert_eq!(s[0], 1.0);
        assert_eq!(s[1], 0.0);
        assert_eq!(s[3], 0.0);
        // cosines 0.2 and 0.6 average to 0.4
        let e = vec![vec![1.0, 0.0], vec![0.2, 0.96f64.sqrt()], vec![0.6, 0.8]];
        let s = semantic_similarity(&e, &[1, 2]);
        assert!((s[0] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn constant_targets_give_constant_fit() {
        let xs = design(40);
        let r = least_squares(&xs, &[0.3; 40]);
        assert!(r.weights.iter().all(|w| w.abs() < 1e-9));
        assert!((r.bias - 0.3).abs() < 1e-9);
    }

    #[test]
    fn exact_linear_data_is_recovered() {
        let xs = design(50);
        let truth = StructuralRegression {
            weights: [0.5, -0.25, 1.5, 0.1, -2.0],
            bias: 0.2,
        };
        let ys: Vec<f64> = xs.iter().map(|x| truth.raw(x)).collect();
        let fit = least_squares(&xs, &ys);
        let resid: f64 = xs.iter().zip(&ys).map(|(x, y)| (fit.raw(x) - y).abs()).fold(0.0, f64::max);
        assert!(resid <= 1e-9);
    }

    #[test]
    fn degenerate_design_falls_back() {
        let xs = vec![[1.0, 0.0, 0.5, 0.5, 0.5]; 20];
        let ys: Vec<f64> = (0..20).map(|i| (i % 2) as f64).collect();
        let r = least_squares(&xs, &ys);
        assert_eq!(r.weights, [0.0; 5]);
        assert!((r.bias - 0.5).abs() < 1e-12);
    }

    #[test]
    fn similarity_is_clamped() {
        let r = StructuralRegression::constant(0.3);
        assert_eq!(structural_similarity(&[[0.0; 5], [1.0; 5]], &r), vec![0.3, 0.3]);
        let r = StructuralRegression {
            weights: [1.0, 0.0, 0.0, 0.0, 0.0],
            bias: 0.7,
        };
        assert_eq!(r.similarity(&[1.0, 0.0, 0.0, 0.0, 0.0]), 1.0);
        assert_eq!(r.similarity(&[-5.0, 0.0, 0.0, 0.0, 0.0]), 0.0);
    }
}
