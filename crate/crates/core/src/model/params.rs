//! Parameter layout and seeded initialization.

use cadren_autodiff::{ParamSet, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;

/// The four encoded streams, in fusion order.
pub const STREAMS: [&str; 4] = ["ca_sem", "ca_str", "bg_sem", "bg_str"];

pub fn fuse_name(layer: usize, stream: &str, part: &str) -> String {
    format!("fuse.{layer}.{stream}.{part}")
}

fn uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    // Glorot-uniform bound
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-bound..bound)).collect();
    Tensor::new(vec![rows, cols], data).expect("positive dims")
}

/// Seeded initial parameters. Biases start at zero, `alpha`, `beta` and
/// `gamma` at one.
pub fn init_params(cfg: &ModelConfig) -> ParamSet {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.d_model;
    let dh = d / cfg.heads;
    let ff = cfg.ff_mult * d;
    let mut p = ParamSet::new();

    p.insert("proj.sem.w", uniform(&mut rng, cfg.d_sem, d));
    p.insert("proj.sem.b", Tensor::zeros(&[1, d]));
    p.insert("proj.str.w", uniform(&mut rng, cfg.d_str, d));
    p.insert("proj.str.b", Tensor::zeros(&[1, d]));

    for layer in 0..cfg.n_fusion_layers {
        for s in STREAMS {
            for h in 0..cfg.heads {
                for part in ["q", "k", "v"] {
                    p.insert(fuse_name(layer, s, &format!("{part}.{h}")), uniform(&mut rng, d, dh));
                }
            }
            p.insert(fuse_name(layer, s, "o"), uniform(&mut rng, d, d));
            p.insert(fuse_name(layer, s, "ff1.w"), uniform(&mut rng, d, ff));
            p.insert(fuse_name(layer, s, "ff1.b"), Tensor::zeros(&[1, ff]));
            p.insert(fuse_name(layer, s, "ff2.w"), uniform(&mut rng, ff, d));
            p.insert(fuse_name(layer, s, "ff2.b"), Tensor::zeros(&[1, d]));
        }
    }

    let w = 2 * d;
    p.insert("ae.placeholder", Tensor::zeros(&[1, w]));
    p.insert("ae.enc.w", uniform(&mut rng, w, cfg.ae_hidden));
    p.insert("ae.enc.b", Tensor::zeros(&[1, cfg.ae_hidden]));
    p.insert("ae.dec.w", uniform(&mut rng, cfg.ae_hidden, w));
    p.insert("ae.dec.b", Tensor::zeros(&[1, w]));

    for c in ["sem", "str"] {
        p.insert(format!("agg.key.{c}.w1"), uniform(&mut rng, d, d));
        p.insert(format!("agg.key.{c}.b1"), Tensor::zeros(&[1, d]));
        p.insert(format!("agg.key.{c}.w2"), uniform(&mut rng, d, d));
        p.insert(format!("agg.key.{c}.b2"), Tensor::zeros(&[1, d]));
    }
    p.insert("agg.matrix", uniform(&mut rng, d, 2 * d));

    p.insert("pp.alpha", Tensor::scalar(1.0));
    p.insert("pp.beta", Tensor::scalar(1.0));
    p.insert("pp.gamma", Tensor::scalar(1.0));
    p
}
