//! Deterministic synthetic multi-graph corpora with planted anchor pairs.
//!
//! Each graph is a set of topic clusters grown by preferential attachment
//! and joined by sparse cross-cluster edges. Node texts draw most tokens
//! from their cluster's vocabulary. For each pair a topic is chosen, the
//! anchors are sampled from that cluster, and the ground truth is every
//! node within `gt_radius` hops of an anchor whose text shares a topic
//! token with the anchor texts. Neither proximity nor text alone recovers
//! the ground truth.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{AnchorPair, Dataset, Edge, Graph, GraphError, GraphRecord, Node, Split};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    A,
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub n_graphs: usize,
    /// Mean node count; each graph draws uniformly within `± node_jitter`.
    pub nodes_per_graph: usize,
    pub node_jitter: f64,
    /// Edges each new node adds to earlier nodes of its cluster.
    pub attach: usize,
    /// Cross-cluster edges per node.
    pub cross_density: f64,
    pub n_topics: usize,
    /// Relative cluster sizes, one per topic. Empty means equal sizes.
    pub cluster_weights: Vec<f64>,
    pub vocab_per_topic: usize,
    /// Probability that a text token is drawn from another topic.
    pub noise: f64,
    pub n_pairs_per_graph: usize,
    pub ca_size: usize,
    pub gt_radius: usize,
    pub seed: u64,
    pub family: Family,
    pub n_val: usize,
    pub n_test: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self::family_a(100, 0)
    }
}

impl GenConfig {
    /// Sized after a reference corpus of small graphs (about 43 nodes, 10 GT, 3 CA):
    /// three equal tree-like clusters.
    pub fn family_a(n_graphs: usize, seed: u64) -> Self {
        Self {
            n_graphs,
            nodes_per_graph: 43,
            node_jitter: 0.15,
            attach: 1,
            cross_density: 0.5,
            n_topics: 3,
            cluster_weights: Vec::new(),
            vocab_per_topic: 24,
            noise: 0.2,
            n_pairs_per_graph: 2,
            ca_size: 3,
            gt_radius: 2,
            seed,
            family: Family::A,
            n_val: 0,
            n_test: 0,
        }
    }

    /// Same anchor-to-truth rule, different cluster shape: more, uneven,
    /// denser clusters and fewer cross edges.
    pub fn family_b(n_graphs: usize, seed: u64) -> Self {
        Self {
            nodes_per_graph: 50,
            attach: 2,
            cross_density: 0.3,
            n_topics: 4,
            cluster_weights: vec![0.4, 0.25, 0.2, 0.15],
            vocab_per_topic: 20,
            family: Family::B,
            ..Self::family_a(n_graphs, seed)
        }
    }

    fn shares(&self) -> Vec<f64> {
        let w = if self.cluster_weights.is_empty() {
            vec![1.0; self.n_topics]
        } else {
            self.cluster_weights.clone()
        };
        let total: f64 = w.iter().sum();
        w.iter().map(|x| x / total).collect()
    }

    fn min_nodes(&self) -> usize {
        ((self.nodes_per_graph as f64) * (1.0 - self.node_jitter)).floor() as usize
    }

    fn node_range(&self) -> (usize, usize) {
        let lo = self.min_nodes().max(1);
        let hi = ((self.nodes_per_graph as f64) * (1.0 + self.node_jitter)).ceil() as usize;
        (lo, hi.max(lo))
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::Config(m.into()));
        if self.n_graphs == 0 || self.nodes_per_graph == 0 || self.n_topics == 0 || self.vocab_per_topic == 0 {
            return bad("counts must be >= 1");
        }
        if self.n_pairs_per_graph == 0 || self.ca_size == 0 || self.attach == 0 {
            return bad("n_pairs_per_graph, ca_size and attach must be >= 1");
        }
        if self.gt_radius == 0 {
            return bad("gt_radius must be >= 1");
        }
        if !(0.0..1.0).contains(&self.node_jitter) || !(0.0..=1.0).contains(&self.noise) {
            return bad("node_jitter must be in [0, 1) and noise in [0, 1]");
        }
        if !self.cross_density.is_finite() || self.cross_density < 0.0 {
            return bad("cross_density must be >= 0");
        }
        if !self.cluster_weights.is_empty()
            && (self.cluster_weights.len() != self.n_topics || self.cluster_weights.iter().any(|w| !(*w > 0.0)))
        {
            return bad("cluster_weights needs one positive weight per topic");
        }
        if self.n_val + self.n_test > self.n_graphs {
            return bad("n_val + n_test exceeds n_graphs");
        }
        let smallest = cluster_sizes(self.min_nodes(), &self.shares()).into_iter().min().unwrap_or(0);
        if smallest < self.ca_size {
            return Err(GenError::Config(format!(
                "ca_size {} exceeds the smallest cluster ({smallest} nodes)",
                self.ca_size
            )));
        }
        Ok(())
    }
}

/// Largest-remainder apportionment of `n` nodes to clusters.
fn cluster_sizes(n: usize, shares: &[f64]) -> Vec<usize> {
    let raw: Vec<f64> = shares.iter().map(|s| s * n as f64).collect();
    let mut sizes: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    let missing = n - sizes.iter().sum::<usize>();
    for &i in order.iter().take(missing) {
        sizes[i] += 1;
    }
    sizes
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn pseudo_word(rng: &mut ChaCha8Rng) -> String {
    const ONSETS: [&str; 16] = ["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "ch", "st"];
    const VOWELS: [&str; 6] = ["a", "e", "i", "o", "u", "ai"];
    let syllables = rng.gen_range(2..=3);
    (0..syllables)
        .map(|_| format!("{}{}", ONSETS[rng.gen_range(0..ONSETS.len())], VOWELS[rng.gen_range(0..VOWELS.len())]))
        .collect()
}

/// `n_topics * vocab_per_topic` distinct pseudo-words, grouped by topic.
fn vocabulary(cfg: &GenConfig, rng: &mut ChaCha8Rng) -> Vec<Vec<String>> {
    let mut seen = BTreeSet::new();
    (0..cfg.n_topics)
        .map(|_| {
            let mut words = Vec::with_capacity(cfg.vocab_per_topic);
            while words.len() < cfg.vocab_per_topic {
                let w = pseudo_word(rng);
                if seen.insert(w.clone()) {
                    words.push(w);
                }
            }
            words
        })
        .collect()
}

fn hop_distances(adj: &[Vec<usize>], sources: &[usize]) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    let mut queue = VecDeque::new();
    for &s in sources {
        dist[s] = 0;
        queue.push_back(s);
    }
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

fn generate_graph(cfg: &GenConfig, index: usize) -> Result<Graph, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(cfg.seed ^ splitmix(index as u64)));
    let (lo, hi) = cfg.node_range();
    let n = rng.gen_range(lo..=hi);
    let sizes = cluster_sizes(n, &cfg.shares());
    let vocab = vocabulary(cfg, &mut rng);

    // Topic per node, in cluster order; node positions are shuffled later.
    let topic: Vec<usize> = sizes.iter().enumerate().flat_map(|(t, &s)| std::iter::repeat(t).take(s)).collect();
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut degree = vec![0usize; n];
    let mut start = 0;
    for &size in &sizes {
        for k in 1..size {
            let node = start + k;
            let targets = cfg.attach.min(k);
            let mut chosen = BTreeSet::new();
            while chosen.len() < targets {
                let weights: Vec<f64> = (start..node)
                    .map(|j| if chosen.contains(&j) { 0.0 } else { (degree[j] + 1) as f64 })
                    .collect();
                let total: f64 = weights.iter().sum();
                let mut x = rng.gen::<f64>() * total;
                let mut pick = node - 1;
                for (off, w) in weights.iter().enumerate() {
                    if x < *w {
                        pick = start + off;
                        break;
                    }
                    x -= w;
                }
                if chosen.contains(&pick) {
                    continue;
                }
                chosen.insert(pick);
            }
            for j in chosen {
                degree[j] += 1;
                degree[node] += 1;
                if rng.gen_bool(0.5) {
                    edges.insert((node, j));
                } else {
                    edges.insert((j, node));
                }
            }
        }
        start += size;
    }
    if cfg.n_topics > 1 {
        let cross = (cfg.cross_density * n as f64).round() as usize;
        let mut added = 0;
        let mut attempts = 0;
        while added < cross && attempts < 100 * (cross + 1) {
            attempts += 1;
            let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
            if topic[a] == topic[b] || edges.contains(&(a, b)) || edges.contains(&(b, a)) {
                continue;
            }
            edges.insert((a, b));
            added += 1;
        }
    }

    let texts: Vec<Vec<String>> = topic
        .iter()
        .map(|&t| {
            let len = rng.gen_range(3..=6);
            (0..len)
                .map(|_| {
                    let src = if cfg.n_topics > 1 && rng.gen::<f64>() < cfg.noise {
                        let other = rng.gen_range(0..cfg.n_topics - 1);
                        if other >= t {
                            other + 1
                        } else {
                            other
                        }
                    } else {
                        t
                    };
                    vocab[src][rng.gen_range(0..cfg.vocab_per_topic)].clone()
                })
                .collect()
        })
        .collect();

    let mut adj = vec![Vec::new(); n];
    for &(a, b) in &edges {
        adj[a].push(b);
        adj[b].push(a);
    }

    let mut topics: Vec<usize> = (0..cfg.n_topics).filter(|&t| sizes[t] >= cfg.ca_size).collect();
    topics.shuffle(&mut rng);
    let mut pairs_idx = Vec::new();
    for p in 0..cfg.n_pairs_per_graph {
        let t = if p < topics.len() {
            topics[p]
        } else {
            topics[rng.gen_range(0..topics.len())]
        };
        let members: Vec<usize> = (0..n).filter(|&i| topic[i] == t).collect();
        let mut ca: Vec<usize> = members.choose_multiple(&mut rng, cfg.ca_size).copied().collect();
        ca.sort_unstable();
        let topic_words: BTreeSet<&str> = vocab[t].iter().map(String::as_str).collect();
        let anchor_words: BTreeSet<&str> = ca
            .iter()
            .flat_map(|&c| texts[c].iter().map(String::as_str))
            .filter(|w| topic_words.contains(w))
            .collect();
        let dist = hop_distances(&adj, &ca);
        let gt: Vec<usize> = (0..n)
            .filter(|&i| {
                dist[i] == 0
                    || (dist[i] <= cfg.gt_radius && texts[i].iter().any(|w| anchor_words.contains(w.as_str())))
            })
            .collect();
        pairs_idx.push((ca, gt));
    }

    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let width = (n.max(2) - 1).to_string().len();
    let ids: Vec<String> = perm.iter().map(|p| format!("v{p:0width$}")).collect();
    let mut nodes: Vec<Node> = (0..n)
        .map(|i| Node {
            id: ids[i].clone(),
            text: texts[i].join(" "),
        })
        .collect();
    nodes.sort_by(|a, b| a.id.cmp(&b.id));
    let mut edge_list: Vec<Edge> = edges
        .iter()
        .map(|&(a, b)| Edge {
            src: ids[a].clone(),
            dst: ids[b].clone(),
            label: None,
        })
        .collect();
    edge_list.sort_by(|a, b| (&a.src, &a.dst).cmp(&(&b.src, &b.dst)));
    let pairs = pairs_idx
        .into_iter()
        .map(|(ca, gt)| AnchorPair::new(ca.iter().map(|&i| ids[i].clone()), gt.iter().map(|&i| ids[i].clone())))
        .collect();
    let family = match cfg.family {
        Family::A => "A",
        Family::B => "B",
    };
    Ok(Graph::new(GraphRecord {
        id: format!("{family}{}-{index:05}", cfg.seed),
        nodes,
        edges: edge_list,
        pairs,
        importance: None,
    })?)
}

/// Builds the dataset and its split: the last `n_test` graphs are test,
/// the `n_val` before them validation, the rest training.
pub fn generate(cfg: &GenConfig) -> Result<Dataset, GenError> {
    cfg.validate()?;
    let graphs = (0..cfg.n_graphs)
        .into_par_iter()
        .map(|i| generate_graph(cfg, i))
        .collect::<Result<Vec<_>, _>>()?;
    let ids: Vec<String> = graphs.iter().map(|g| g.id().to_string()).collect();
    let n_train = cfg.n_graphs - cfg.n_val - cfg.n_test;
    let split = Split {
        train: ids[..n_train].to_vec(),
        val: ids[n_train..n_train + cfg.n_val].to_vec(),
        test: ids[n_train + cfg.n_val..].to_vec(),
    };
    Ok(Dataset::new(graphs)?.with_split(split)?)
}

/// Unweighted per-graph means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub edges: f64,
    pub bg: f64,
    pub gt: f64,
    pub ca: f64,
    pub graphs: usize,
}

/// Per-graph means of edge, node, GT and CA counts. GT and CA are first
/// averaged over each graph's pairs; graphs without pairs count as 0.
pub fn stats(dataset: &Dataset) -> DatasetStats {
    let graphs = dataset.graphs();
    let n = graphs.len().max(1) as f64;
    let per_pair = |g: &Graph, f: &dyn Fn(&AnchorPair) -> usize| {
        if g.pairs().is_empty() {
            0.0
        } else {
            g.pairs().iter().map(|p| f(p) as f64).sum::<f64>() / g.pairs().len() as f64
        }
    };
    DatasetStats {
        edges: graphs.iter().map(|g| g.edges().len() as f64).sum::<f64>() / n,
        bg: graphs.iter().map(|g| g.len() as f64).sum::<f64>() / n,
        gt: graphs.iter().map(|g| per_pair(g, &|p| p.gt.len())).sum::<f64>() / n,
        ca: graphs.iter().map(|g| per_pair(g, &|p| p.ca.len())).sum::<f64>() / n,
        graphs: graphs.len(),
    }
}

/// Rows of `(name, stats)` as an aligned text table.
pub struct StatsTable<'a>(pub &'a [(String, DatasetStats)]);

impl fmt::Display for StatsTable<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = self.0.iter().map(|(n, _)| n.len()).max().unwrap_or(8).max(8);
        writeln!(f, "{:<w$} | {:>9} {:>9} {:>7} {:>7} {:>8}", "Database", "#Edges", "#BG", "#GT", "#CA", "#Graphs")?;
        writeln!(f, "{}", "-".repeat(w + 48))?;
        for (name, s) in self.0 {
            writeln!(
                f,
                "{:<w$} | {:>9.1} {:>9.1} {:>7.1} {:>7.1} {:>8}",
                name, s.edges, s.bg, s.gt, s.ca, s.graphs
            )?;
        }
        Ok(())
    }
}
