//! Per-node structural statistics and semantic embeddings relative to a
//! contextual anchor (CA) set.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use thiserror::Error;

use crate::graph::{Graph, GraphError};

/// Separator placed between the node text and each CA text.
pub const SEP: &str = " [SEP] ";

/// Width of the structural vector.
pub const STRUCTURAL_DIM: usize = 5;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("CA set is empty")]
    EmptyCa,
    #[error("embedding dimension must be even and >= 8, got {0}")]
    BadDim(usize),
    #[error("no embedding stored for `{0}`")]
    MissingKey(String),
    #[error("embedding for `{key}` has length {got}, expected {expected}")]
    WrongLength {
        key: String,
        got: usize,
        expected: usize,
    },
    #[error("provider `{0}` returned non-finite values")]
    NonFinite(String),
    #[error("embedding file {path}: {message}")]
    File { path: String, message: String },
}

pub type Result<T, E = FeatureError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuralFeatures {
    /// Distinct nodes reachable along directed edges, excluding the node.
    pub descendant_count: usize,
    /// Directed out-degree (distinct successors).
    pub direct_child_count: usize,
    pub max_steps_to_ca: f64,
    pub min_steps_to_ca: f64,
    pub avg_steps_to_ca: f64,
}

impl StructuralFeatures {
    /// `ln(1+x)` for the two counts, distances divided by `graph_size`.
    pub fn normalized(&self, graph_size: usize) -> [f64; STRUCTURAL_DIM] {
        let n = graph_size.max(1) as f64;
        [
            (self.descendant_count as f64).ln_1p(),
            (self.direct_child_count as f64).ln_1p(),
            self.max_steps_to_ca / n,
            self.min_steps_to_ca / n,
            self.avg_steps_to_ca / n,
        ]
    }
}

pub fn normalize_structural(features: &StructuralFeatures, graph_size: usize) -> [f64; STRUCTURAL_DIM] {
    features.normalized(graph_size)
}

/// Hop distances from `sources` to every node on the undirected view.
/// Unreached nodes stay `None`.
pub fn bfs_undirected(graph: &Graph, source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; graph.len()];
    let mut queue = VecDeque::from([source]);
    dist[source] = Some(0);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        for &v in graph.neighbors(u) {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Number of distinct nodes reachable from `start` along directed edges.
pub fn descendant_count(graph: &Graph, start: usize) -> usize {
    let mut seen = vec![false; graph.len()];
    seen[start] = true;
    let mut stack = vec![start];
    let mut count = 0;
    while let Some(u) = stack.pop() {
        for &v in graph.successors(u) {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count
}

/// Structural features of every node for one CA set, in graph node order.
///
/// Unreachable CA nodes count as `|V|` hops.
pub fn structural_features_all(graph: &Graph, ca: &[usize]) -> Result<Vec<StructuralFeatures>> {
    if ca.is_empty() {
        return Err(FeatureError::EmptyCa);
    }
    let n = graph.len();
    let sentinel = n as f64;
    let from_ca: Vec<Vec<Option<usize>>> = ca.iter().map(|&c| bfs_undirected(graph, c)).collect();
    Ok((0..n)
        .map(|i| {
            let steps: Vec<f64> = from_ca
                .iter()
                .map(|d| d[i].map_or(sentinel, |x| x as f64))
                .collect();
            let max = steps.iter().copied().fold(f64::MIN, f64::max);
            let min = steps.iter().copied().fold(f64::MAX, f64::min);
            let avg = steps.iter().sum::<f64>() / steps.len() as f64;
            StructuralFeatures {
                descendant_count: descendant_count(graph, i),
                direct_child_count: graph.successors(i).len(),
                max_steps_to_ca: max,
                min_steps_to_ca: min,
                avg_steps_to_ca: avg.clamp(min, max),
            }
        })
        .collect())
}

pub fn structural_features<S: AsRef<str>>(graph: &Graph, ca: &[S], node: &str) -> Result<StructuralFeatures> {
    let target = graph.require_index(node)?;
    let ca_idx = ca
        .iter()
        .map(|c| graph.require_index(c.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;
    if ca_idx.is_empty() {
        return Err(FeatureError::EmptyCa);
    }
    let sentinel = graph.len() as f64;
    let steps: Vec<f64> = ca_idx
        .iter()
        .map(|&c| bfs_undirected(graph, c)[target].map_or(sentinel, |x| x as f64))
        .collect();
    let max = steps.iter().copied().fold(f64::MIN, f64::max);
    let min = steps.iter().copied().fold(f64::MAX, f64::min);
    let avg = steps.iter().sum::<f64>() / steps.len() as f64;
    Ok(StructuralFeatures {
        descendant_count: descendant_count(graph, target),
        direct_child_count: graph.successors(target).len(),
        max_steps_to_ca: max,
        min_steps_to_ca: min,
        avg_steps_to_ca: avg.clamp(min, max),
    })
}

/// Source of fixed-width text embeddings. Implementations must be
/// deterministic and shareable across threads.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>>;
}

/// Joins a node text with its anchor texts: `node [SEP] ca_1 [SEP] ... [SEP] ca_k`.
pub fn anchored_input<S: AsRef<str>>(node_text: &str, ca_texts: &[S]) -> String {
    let mut s = node_text.to_string();
    for c in ca_texts {
        s.push_str(SEP);
        s.push_str(c.as_ref());
    }
    s
}

pub fn semantic_embed<S: AsRef<str>>(
    provider: &dyn EmbeddingProvider,
    node_text: &str,
    ca_texts: &[S],
) -> Result<Vec<f64>> {
    if ca_texts.is_empty() {
        return Err(FeatureError::EmptyCa);
    }
    let v = provider.embed(&anchored_input(node_text, ca_texts))?;
    if v.len() != provider.dim() {
        return Err(FeatureError::WrongLength {
            key: node_text.to_string(),
            got: v.len(),
            expected: provider.dim(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(FeatureError::NonFinite(provider.name().to_string()));
    }
    Ok(v)
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Lowercased alphanumeric tokens; the `[SEP]` marker is not a token.
pub fn tokenize(text: &str) -> Vec<String> {
    text.replace("[SEP]", " ")
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Signed feature hashing over whitespace/punctuation tokens.
///
/// The first half of the output is the hashed bag of the first half of the
/// token sequence, the second half that of the second half; each half is
/// L2-normalized unless empty. With an odd token count the middle token
/// lands in both halves, so a single token fills both.
#[derive(Debug, Clone)]
pub struct HashProvider {
    dim: usize,
    seed: u64,
    name: String,
}

impl HashProvider {
    pub fn new(dim: usize, seed: u64) -> Result<Self> {
        if dim % 2 != 0 || dim < 8 {
            return Err(FeatureError::BadDim(dim));
        }
        Ok(Self {
            dim,
            seed,
            name: format!("hash-{dim}-{seed}"),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Bucket and sign of a token within one half.
    pub fn slot(&self, token: &str) -> (usize, f64) {
        let h = fnv1a(self.seed, token.as_bytes());
        let bucket = (h % (self.dim as u64 / 2)) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        (bucket, sign)
    }

    fn bag(&self, tokens: &[String]) -> Vec<f64> {
        let mut v = vec![0.0; self.dim / 2];
        for t in tokens {
            let (b, s) = self.slot(t);
            v[b] += s;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

pub fn default_hash_provider(dim: usize, seed: u64) -> Result<HashProvider> {
    HashProvider::new(dim, seed)
}

fn fnv1a(seed: u64, bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    // final avalanche so the sign bit depends on every byte
    h ^= h >> 33;
    h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
    h ^= h >> 33;
    h
}

impl EmbeddingProvider for HashProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let tokens = tokenize(text);
        let n = tokens.len();
        let first = &tokens[..n.div_ceil(2)];
        let last = &tokens[n / 2..];
        let mut out = self.bag(first);
        out.extend(self.bag(last));
        Ok(out)
    }
}

/// Precomputed vectors looked up by exact input string.
#[derive(Debug, Clone)]
pub struct FileProvider {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    name: String,
}

impl FileProvider {
    pub fn from_map(vectors: HashMap<String, Vec<f64>>, dim: usize) -> Result<Self> {
        for (k, v) in &vectors {
            if v.len() != dim {
                return Err(FeatureError::WrongLength {
                    key: k.clone(),
                    got: v.len(),
                    expected: dim,
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(FeatureError::NonFinite(k.clone()));
            }
        }
        Ok(Self {
            dim,
            vectors,
            name: "file".into(),
        })
    }
}

pub fn load_file_provider(path: &Path, dim: usize) -> Result<FileProvider> {
    let file_err = |message: String| FeatureError::File {
        path: path.display().to_string(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| file_err(e.to_string()))?;
    let vectors: HashMap<String, Vec<f64>> = serde_json::from_str(&text).map_err(|e| file_err(e.to_string()))?;
    let mut p = FileProvider::from_map(vectors, dim)?;
    p.name = format!("file:{}", path.display());
    Ok(p)
}

impl EmbeddingProvider for FileProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        self.vectors
            .get(text)
            .cloned()
            .ok_or_else(|| FeatureError::MissingKey(text.to_string()))
    }
}
