//! Independent reference implementations shared by the integration tests
//! and the acceptance harness. Nothing here calls into the code under test
//! except to read inputs and parameters.

#![allow(dead_code)]

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashSet};

use cadren_autodiff::ParamSet;
use cadren_core::features::HashProvider;
use cadren_core::graph::{AnchorPair, Edge, Graph, GraphRecord, Node};
use cadren_core::model::{ExampleInputs, ModelConfig, StructuralRegression};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type M = Vec<Vec<f64>>;

// ---------------------------------------------------------------- metrics

/// Order by descending score then ascending id, by insertion sort.
fn naive_order(ids: &[String], scores: &[f64]) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for i in 0..ids.len() {
        let pos = out
            .iter()
            .position(|&j| scores[i] > scores[j] || (scores[i] == scores[j] && ids[i] < ids[j]))
            .unwrap_or(out.len());
        out.insert(pos, i);
    }
    out
}

pub fn ndcg_ref(ids: &[String], pred: &[f64], truth: &[f64], k: usize) -> f64 {
    let k = k.min(ids.len());
    let gain = |order: &[usize]| -> f64 {
        let mut s = 0.0;
        for (pos, &i) in order.iter().take(k).enumerate() {
            s += (1.0 + truth[i]).ln() / (pos as f64 + 2.0).log2();
        }
        s
    };
    let ideal = gain(&naive_order(ids, truth));
    if ideal == 0.0 {
        0.0
    } else {
        gain(&naive_order(ids, pred)) / ideal
    }
}

/// Average ranks by counting: 1 + #smaller + (#equal - 1) / 2.
fn ranks_by_counting(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| {
            let less = v.iter().filter(|y| *y < x).count() as f64;
            let eq = v.iter().filter(|y| *y == x).count() as f64;
            1.0 + less + (eq - 1.0) / 2.0
        })
        .collect()
}

pub fn spearman_ref(a: &[f64], b: &[f64]) -> Option<f64> {
    let (ra, rb) = (ranks_by_counting(a), ranks_by_counting(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        None
    } else {
        Some(cov / (va * vb).sqrt())
    }
}

pub fn overlap_ref(ids: &[String], pred: &[f64], truth: &[f64], gt_size: usize, k: usize) -> f64 {
    let m = (k * gt_size).min(ids.len());
    let top = |s: &[f64]| -> HashSet<usize> { naive_order(ids, s).into_iter().take(m).collect() };
    top(pred).intersection(&top(truth)).count() as f64 / m as f64
}

// ------------------------------------------------------------- structure

pub fn random_graph(rng: &mut ChaCha8Rng, max_nodes: usize) -> Graph {
    let n = rng.gen_range(1..=max_nodes);
    let p = rng.gen_range(0.02..0.25);
    let mut edges = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.gen_bool(p) {
                edges.push(Edge {
                    src: format!("n{a}"),
                    dst: format!("n{b}"),
                    label: None,
                });
            }
        }
    }
    Graph::new(GraphRecord {
        id: "rand".into(),
        nodes: (0..n)
            .map(|i| Node {
                id: format!("n{i}"),
                text: String::new(),
            })
            .collect(),
        edges,
        pairs: vec![],
        importance: None,
    })
    .unwrap()
}

/// All-pairs hop distances on the undirected view; `None` when unreachable.
pub fn floyd_warshall(g: &Graph) -> Vec<Vec<Option<usize>>> {
    let n = g.len();
    let inf = usize::MAX / 4;
    let mut d = vec![vec![inf; n]; n];
    for (i, row) in d.iter_mut().enumerate() {
        row[i] = 0;
    }
    for e in g.edges() {
        let (a, b) = (g.node_index(&e.src).unwrap(), g.node_index(&e.dst).unwrap());
        d[a][b] = d[a][b].min(1);
        d[b][a] = d[b][a].min(1);
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    d.into_iter()
        .map(|r| r.into_iter().map(|x| (x < inf).then_some(x)).collect())
        .collect()
}

/// Distinct nodes reachable along directed edges, by recursive DFS.
pub fn descendants_dfs(g: &Graph, start: usize) -> usize {
    fn visit(g: &Graph, u: usize, seen: &mut BTreeSet<usize>) {
        for e in g.edges() {
            if g.node_index(&e.src) == Some(u) {
                let v = g.node_index(&e.dst).unwrap();
                if seen.insert(v) {
                    visit(g, v, seen);
                }
            }
        }
    }
    let mut seen = BTreeSet::new();
    visit(g, start, &mut seen);
    seen.remove(&start);
    seen.len()
}

pub fn out_degree(g: &Graph, i: usize) -> usize {
    let id = &g.nodes()[i].id;
    g.edges().iter().filter(|e| &e.src == id).count()
}

// ------------------------------------------------------------ toy model

pub fn toy_graph() -> Graph {
    let texts = [
        "solar panel supplier",
        "panel glass maker",
        "wind turbine blade",
        "solar inverter firm",
        "glass coating supplier",
        "shipping port operator",
    ];
    let edges = [(0, 1), (1, 4), (3, 1), (2, 5), (4, 2), (0, 3)];
    Graph::new(GraphRecord {
        id: "toy".into(),
        nodes: texts
            .iter()
            .enumerate()
            .map(|(i, t)| Node {
                id: format!("n{i}"),
                text: t.to_string(),
            })
            .collect(),
        edges: edges
            .iter()
            .map(|(a, b)| Edge {
                src: format!("n{a}"),
                dst: format!("n{b}"),
                label: None,
            })
            .collect(),
        pairs: vec![
            AnchorPair::new(["n0", "n3"], ["n0", "n1", "n3", "n4"]),
            AnchorPair::new(["n2"], ["n2", "n5"]),
        ],
        importance: None,
    })
    .unwrap()
}

pub fn toy_config() -> ModelConfig {
    ModelConfig {
        d_sem: 8,
        d_model: 4,
        ae_hidden: 6,
        ff_mult: 2,
        seed: 11,
        ..ModelConfig::default()
    }
}

pub fn toy_regression() -> StructuralRegression {
    StructuralRegression {
        weights: [0.1, 0.2, -0.3, -0.6, -0.2],
        bias: 0.7,
    }
}

pub fn toy_inputs(cfg: &ModelConfig, pair: usize) -> ExampleInputs {
    let g = toy_graph();
    let provider = HashProvider::new(cfg.d_sem, 5).unwrap();
    ExampleInputs::build(&g, &g.pairs()[pair].ca, &provider, &toy_regression(), cfg).unwrap()
}

/// Replaces every parameter with seeded values spread over (-1, 1).
pub fn randomize(params: &mut ParamSet, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (_, t) in params.iter_mut() {
        for x in t.data_mut() {
            *x = rng.gen_range(-1.0..1.0);
        }
    }
}

// ------------------------------------------- straight-line forward oracle

fn p2(p: &ParamSet, name: &str) -> M {
    let t = p.get(name).unwrap();
    let (r, c) = (t.shape()[0], t.shape()[1]);
    (0..r).map(|i| t.data()[i * c..(i + 1) * c].to_vec()).collect()
}

fn mm(a: &M, b: &M) -> M {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    let mut out = vec![vec![0.0; m]; n];
    for i in 0..n {
        for j in 0..m {
            let mut s = 0.0;
            for t in 0..k {
                s += a[i][t] * b[t][j];
            }
            out[i][j] = s;
        }
    }
    out
}

fn lin(x: &M, w: &M, b: &M) -> M {
    mm(x, w)
        .into_iter()
        .map(|r| r.iter().zip(&b[0]).map(|(a, c)| a + c).collect())
        .collect()
}

fn relu(x: &M) -> M {
    x.iter().map(|r| r.iter().map(|v| v.max(0.0)).collect()).collect()
}

fn add(a: &M, b: &M) -> M {
    a.iter().zip(b).map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect()).collect()
}

pub fn layer_norm(x: &M) -> M {
    x.iter()
        .map(|r| {
            let m = r.iter().sum::<f64>() / r.len() as f64;
            let v = r.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / r.len() as f64;
            r.iter().map(|a| (a - m) / (v + 1e-10).sqrt()).collect()
        })
        .collect()
}

fn softmax(r: &[f64]) -> Vec<f64> {
    let mx = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = r.iter().map(|x| (x - mx).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s).collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn rows_of(t: &cadren_autodiff::Tensor) -> M {
    t.rows().map(<[f64]>::to_vec).collect()
}

/// Feed-forward half of a fusion block applied to `h1`.
pub fn fusion_ff(p: &ParamSet, layer: usize, stream: &str, h1: &M) -> M {
    let f = |part: &str| p2(p, &format!("fuse.{layer}.{stream}.{part}"));
    let h = relu(&lin(h1, &f("ff1.w"), &f("ff1.b")));
    lin(&h, &f("ff2.w"), &f("ff2.b"))
}

fn fusion_block(p: &ParamSet, cfg: &ModelConfig, layer: usize, stream: &str, target: &M, ctx: &M) -> M {
    let f = |part: &str| p2(p, &format!("fuse.{layer}.{stream}.{part}"));
    let mut joined: M = vec![Vec::new(); target.len()];
    for h in 0..cfg.heads {
        let q = mm(target, &f(&format!("q.{h}")));
        let k = mm(ctx, &f(&format!("k.{h}")));
        let v = mm(ctx, &f(&format!("v.{h}")));
        let dh = q[0].len() as f64;
        for (i, qi) in q.iter().enumerate() {
            let scores: Vec<f64> = k
                .iter()
                .map(|kj| qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() / dh.sqrt())
                .collect();
            let w = softmax(&scores);
            for c in 0..v[0].len() {
                joined[i].push((0..v.len()).map(|j| w[j] * v[j][c]).sum());
            }
        }
    }
    let attended = mm(&joined, &f("o"));
    let h1 = layer_norm(&add(target, &attended));
    let ff = fusion_ff(p, layer, stream, &h1);
    layer_norm(&add(&h1, &ff))
}

pub struct NaiveOutput {
    pub fused_sem: M,
    pub fused_str: M,
    pub scores: M,
    pub i_init: Vec<f64>,
    pub i_final: Vec<f64>,
    pub recon: f64,
}

pub fn naive_forward(p: &ParamSet, x: &ExampleInputs, cfg: &ModelConfig, mask: &[bool]) -> NaiveOutput {
    let d = cfg.d_model;
    let bg_sem = lin(&rows_of(&x.semantic), &p2(p, "proj.sem.w"), &p2(p, "proj.sem.b"));
    let bg_str = lin(&rows_of(&x.structural), &p2(p, "proj.str.w"), &p2(p, "proj.str.b"));
    let (ca_sem, ca_str) = if cfg.enable_ca {
        (
            x.ca.iter().map(|&i| bg_sem[i].clone()).collect(),
            x.ca.iter().map(|&i| bg_str[i].clone()).collect(),
        )
    } else {
        (vec![vec![0.0; d]; x.ca.len()], vec![vec![0.0; d]; x.ca.len()])
    };
    let names = ["ca_sem", "ca_str", "bg_sem", "bg_str"];
    let mut streams: Vec<M> = vec![ca_sem, ca_str, bg_sem, bg_str];
    for layer in 0..cfg.n_fusion_layers {
        let mut next = streams.clone();
        for s in 0..4 {
            let ctx: M = (0..4).filter(|&j| j != s).flat_map(|j| streams[j].clone()).collect();
            next[s] = fusion_block(p, cfg, layer, names[s], &streams[s], &ctx);
        }
        streams = next;
    }
    let (fs, ft) = (streams[2].clone(), streams[3].clone());

    let masked = mask.iter().filter(|&&m| m).count();
    let recon = if cfg.enable_ae && masked > 0 {
        let xcat: M = fs.iter().zip(&ft).map(|(a, b)| a.iter().chain(b).copied().collect()).collect();
        let ph = p2(p, "ae.placeholder");
        let corrupted: M = xcat
            .iter()
            .zip(mask)
            .map(|(r, &m)| if m { ph[0].clone() } else { r.clone() })
            .collect();
        let h = relu(&lin(&corrupted, &p2(p, "ae.enc.w"), &p2(p, "ae.enc.b")));
        let out = lin(&h, &p2(p, "ae.dec.w"), &p2(p, "ae.dec.b"));
        let mut s = 0.0;
        for i in 0..xcat.len() {
            if mask[i] {
                s += out[i].iter().zip(&xcat[i]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            }
        }
        s / (masked * 2 * d) as f64
    } else {
        0.0
    };

    let key = |f: &M, c: &str| {
        let h = relu(&lin(f, &p2(p, &format!("agg.key.{c}.w1")), &p2(p, &format!("agg.key.{c}.b1"))));
        lin(&h, &p2(p, &format!("agg.key.{c}.w2")), &p2(p, &format!("agg.key.{c}.b2")))
    };
    let (ks, kt) = (key(&fs, "sem"), key(&ft, "str"));
    let mut scores = Vec::new();
    let mut i_init = Vec::new();
    if cfg.enable_aa {
        let mixed: M = fs.iter().zip(&ft).map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x + y) / 2.0).collect()).collect();
        let q = mm(&mixed, &p2(p, "agg.matrix"));
        for i in 0..fs.len() {
            let s1: f64 = (0..d).map(|c| ks[i][c] * q[i][c]).sum::<f64>() / (d as f64).sqrt();
            let s2: f64 = (0..d).map(|c| kt[i][c] * q[i][d + c]).sum::<f64>() / (d as f64).sqrt();
            let w = softmax(&[s1, s2]);
            i_init.push(w[0] * s1 + w[1] * s2);
            scores.push(vec![s1, s2]);
        }
    } else {
        for i in 0..fs.len() {
            let s1 = ks[i].iter().sum::<f64>() / d as f64;
            let s2 = kt[i].iter().sum::<f64>() / d as f64;
            i_init.push((s1 + s2) / 2.0);
            scores.push(vec![s1, s2]);
        }
    }
    let i_final = if cfg.enable_pp {
        let a = p.get("pp.alpha").unwrap().item();
        let b = p.get("pp.beta").unwrap().item();
        let c = p.get("pp.gamma").unwrap().item();
        (0..fs.len())
            .map(|i| sigmoid(a * i_init[i] + b * x.s_sem[i] + c * x.s_str[i]))
            .collect()
    } else {
        i_init.iter().map(|&v| sigmoid(v)).collect()
    };
    NaiveOutput {
        fused_sem: fs,
        fused_str: ft,
        scores,
        i_init,
        i_final,
        recon,
    }
}

/// Mean binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7].
pub fn bce_ref(pred: &[f64], target: &[f64]) -> f64 {
    let eps = 1e-7;
    pred.iter()
        .zip(target)
        .map(|(&p, &t)| {
            let p = p.clamp(eps, 1.0 - eps);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / pred.len() as f64
}

pub fn loss_ref(out: &NaiveOutput, target: &[f64], s_sem: &[f64], s_str: &[f64], mu: f64, nu: f64, lambda: f64) -> f64 {
    let sem: Vec<f64> = s_sem.iter().zip(target).map(|(a, b)| a * b).collect();
    let st: Vec<f64> = s_str.iter().zip(target).map(|(a, b)| a * b).collect();
    bce_ref(&out.i_final, target) + mu * bce_ref(&out.i_final, &sem) + nu * bce_ref(&out.i_final, &st) + lambda * out.recon
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn argsort_desc(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    idx
}

// ------------------------------------------------------- gradient check

pub const GRAD_H: f64 = 1e-5;
pub const GRAD_TOL: f64 = 1e-4;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

pub const TOY_MASK: [bool; 6] = [true, false, false, true, false, false];

pub fn toy_target() -> Vec<f64> {
    let g = toy_graph();
    cadren_core::graph::role_labels(&g, &g.pairs()[0]).unwrap()
}

/// Loss value and, when `grads` is set, its gradient per parameter.
pub fn toy_loss(params: &ParamSet, cfg: &ModelConfig, x: &ExampleInputs, grads: bool) -> (f64, Vec<cadren_autodiff::Tensor>) {
    let mut tape = cadren_autodiff::Tape::new();
    let bound = params.bind(&mut tape);
    let (_, loss) =
        cadren_core::model::forward::training_loss(&mut tape, &bound, x, &toy_target(), cfg, &TOY_MASK).unwrap();
    let value = tape.value(loss).item();
    if !grads {
        return (value, Vec::new());
    }
    let mut g = tape.backward(loss).unwrap();
    (value, bound.gradients(&mut g).unwrap())
}

/// Central differences against backprop for every scalar of the full
/// model. Returns the worst relative error and the number of scalars.
pub fn gradcheck_full_model() -> (f64, usize) {
    let cfg = toy_config();
    let x = toy_inputs(&cfg, 0);
    let mut params = cadren_core::model::init_params(&cfg);
    randomize(&mut params, 3);
    let (_, analytic) = toy_loss(&params, &cfg, &x, true);
    let names: Vec<String> = params.names().map(str::to_string).collect();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for (pi, name) in names.iter().enumerate() {
        let len = params.get(name).unwrap().numel();
        for j in 0..len {
            let orig = params.get(name).unwrap().data()[j];
            params.get_mut(name).unwrap().data_mut()[j] = orig + GRAD_H;
            let (lp, _) = toy_loss(&params, &cfg, &x, false);
            params.get_mut(name).unwrap().data_mut()[j] = orig - GRAD_H;
            let (lm, _) = toy_loss(&params, &cfg, &x, false);
            params.get_mut(name).unwrap().data_mut()[j] = orig;
            let numeric = (lp - lm) / (2.0 * GRAD_H);
            worst = worst.max(rel_err(analytic[pi].data()[j], numeric));
            count += 1;
        }
    }
    (worst, count)
}
