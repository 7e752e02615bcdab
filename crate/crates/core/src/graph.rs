//! Graph and multi-graph dataset model.
//!
//! A [`Graph`] is immutable once built: [`Graph::new`] validates every
//! invariant (unique ids, resolvable edges, `CA ⊆ GT ⊆ nodes`) and
//! precomputes the directed and undirected adjacency used by the feature
//! extractors. Datasets are stored as JSON lines, one graph per line.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("graph `{graph}`: {message}")]
    Invalid { graph: String, message: String },
    #[error("graph `{graph}`, pair {pair}: {message}")]
    InvalidPair {
        graph: String,
        pair: usize,
        message: String,
    },
    #[error("duplicate graph id `{0}`")]
    DuplicateGraph(String),
    #[error("split: {0}")]
    Split(String),
    #[error("pair is not registered on graph `{0}`")]
    UnknownPair(String),
    #[error("unknown node `{node}` in graph `{graph}`")]
    UnknownNode { graph: String, node: String },
}

pub type Result<T, E = GraphError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    #[serde(default)]
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub src: String,
    pub dst: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// One (contextual anchor, ground truth) labeling of a graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorPair {
    pub ca: BTreeSet<String>,
    pub gt: BTreeSet<String>,
}

impl AnchorPair {
    pub fn new<I, J, S, T>(ca: I, gt: J) -> Self
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: Into<String>,
        T: Into<String>,
    {
        Self {
            ca: ca.into_iter().map(Into::into).collect(),
            gt: gt.into_iter().map(Into::into).collect(),
        }
    }
}

/// Wire form of a graph, exactly one JSON object per dataset line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub id: String,
    pub nodes: Vec<Node>,
    #[serde(default)]
    pub edges: Vec<Edge>,
    #[serde(default)]
    pub pairs: Vec<AnchorPair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub importance: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone)]
pub struct Graph {
    record: GraphRecord,
    index: HashMap<String, usize>,
    out_adj: Vec<Vec<usize>>,
    undirected_adj: Vec<Vec<usize>>,
}

impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.record == other.record
    }
}

impl Graph {
    /// Validates a record and builds adjacency. Duplicate edges are dropped.
    pub fn new(mut record: GraphRecord) -> Result<Self> {
        let invalid = |message: String| GraphError::Invalid {
            graph: record.id.clone(),
            message,
        };
        if record.id.is_empty() {
            return Err(invalid("graph id is empty".into()));
        }
        if record.nodes.is_empty() {
            return Err(invalid("graph has no nodes".into()));
        }
        let mut index = HashMap::with_capacity(record.nodes.len());
        for (i, n) in record.nodes.iter().enumerate() {
            if n.id.is_empty() {
                return Err(invalid(format!("node {i} has an empty id")));
            }
            if index.insert(n.id.clone(), i).is_some() {
                return Err(invalid(format!("duplicate node id `{}`", n.id)));
            }
        }

        let mut seen = HashSet::new();
        record.edges.retain(|e| seen.insert(e.clone()));
        let n = record.nodes.len();
        let mut out_adj = vec![Vec::new(); n];
        let mut undirected_adj = vec![Vec::new(); n];
        for e in &record.edges {
            let (Some(&s), Some(&d)) = (index.get(&e.src), index.get(&e.dst)) else {
                return Err(invalid(format!("dangling edge {} -> {}", e.src, e.dst)));
            };
            out_adj[s].push(d);
            undirected_adj[s].push(d);
            undirected_adj[d].push(s);
        }
        for adj in out_adj.iter_mut().chain(undirected_adj.iter_mut()) {
            adj.sort_unstable();
            adj.dedup();
        }

        for (p, pair) in record.pairs.iter().enumerate() {
            let pair_err = |message: String| GraphError::InvalidPair {
                graph: record.id.clone(),
                pair: p,
                message,
            };
            if pair.ca.is_empty() {
                return Err(pair_err("CA set is empty".into()));
            }
            if let Some(x) = pair.ca.iter().find(|x| !pair.gt.contains(*x)) {
                return Err(pair_err(format!("CA node `{x}` is not in GT")));
            }
            if let Some(x) = pair.gt.iter().find(|x| !index.contains_key(*x)) {
                return Err(pair_err(format!("GT node `{x}` is not a graph node")));
            }
        }

        if let Some(imp) = &record.importance {
            if let Some(missing) = record.nodes.iter().find(|n| !imp.contains_key(&n.id)) {
                return Err(invalid(format!("importance missing node `{}`", missing.id)));
            }
            if let Some(extra) = imp.keys().find(|k| !index.contains_key(*k)) {
                return Err(invalid(format!("importance names unknown node `{extra}`")));
            }
            if let Some((k, v)) = imp.iter().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
                return Err(invalid(format!("importance of `{k}` must be finite and >= 0, got {v}")));
            }
        }

        Ok(Self {
            record,
            index,
            out_adj,
            undirected_adj,
        })
    }

    pub fn id(&self) -> &str {
        &self.record.id
    }

    pub fn nodes(&self) -> &[Node] {
        &self.record.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.record.edges
    }

    pub fn pairs(&self) -> &[AnchorPair] {
        &self.record.pairs
    }

    pub fn importance(&self) -> Option<&BTreeMap<String, f64>> {
        self.record.importance.as_ref()
    }

    pub fn record(&self) -> &GraphRecord {
        &self.record
    }

    pub fn len(&self) -> usize {
        self.record.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.record.nodes.is_empty()
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn require_index(&self, id: &str) -> Result<usize> {
        self.node_index(id).ok_or_else(|| GraphError::UnknownNode {
            graph: self.record.id.clone(),
            node: id.to_string(),
        })
    }

    /// Directed successors of node `i`, deduplicated and sorted.
    pub fn successors(&self, i: usize) -> &[usize] {
        &self.out_adj[i]
    }

    /// Neighbours of node `i` ignoring edge direction.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.undirected_adj[i]
    }

    /// Resolves a set of node ids to indices in ascending id order.
    pub fn indices_of<'a>(&self, ids: impl IntoIterator<Item = &'a String>) -> Result<Vec<usize>> {
        ids.into_iter().map(|id| self.require_index(id)).collect()
    }

    pub fn has_pair(&self, pair: &AnchorPair) -> bool {
        self.record.pairs.contains(pair)
    }
}

/// Importance targets for one pair, in graph node order.
///
/// A graph-level importance map takes precedence; otherwise GT members get
/// 1.0 and everything else 0.0.
pub fn role_labels(graph: &Graph, pair: &AnchorPair) -> Result<Vec<f64>> {
    if !graph.has_pair(pair) {
        return Err(GraphError::UnknownPair(graph.id().to_string()));
    }
    Ok(match graph.importance() {
        Some(imp) => graph.nodes().iter().map(|n| imp[&n.id]).collect(),
        None => graph
            .nodes()
            .iter()
            .map(|n| if pair.gt.contains(&n.id) { 1.0 } else { 0.0 })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    #[serde(default)]
    pub train: Vec<String>,
    #[serde(default)]
    pub val: Vec<String>,
    #[serde(default)]
    pub test: Vec<String>,
}

impl Split {
    pub fn ids(&self, kind: SplitKind) -> &[String] {
        match kind {
            SplitKind::Train => &self.train,
            SplitKind::Val => &self.val,
            SplitKind::Test => &self.test,
        }
    }

    fn validate(&self, known: &HashSet<&str>) -> Result<()> {
        let mut seen = HashSet::new();
        for id in self.train.iter().chain(&self.val).chain(&self.test) {
            if !seen.insert(id.as_str()) {
                return Err(GraphError::Split(format!("graph `{id}` appears in more than one split")));
            }
            if !known.contains(id.as_str()) {
                return Err(GraphError::Split(format!("unknown graph `{id}`")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    graphs: Vec<Graph>,
    split: Split,
}

impl Dataset {
    pub fn new(graphs: Vec<Graph>) -> Result<Self> {
        let mut ids = HashSet::new();
        for g in &graphs {
            if !ids.insert(g.id().to_string()) {
                return Err(GraphError::DuplicateGraph(g.id().to_string()));
            }
        }
        Ok(Self {
            graphs,
            split: Split::default(),
        })
    }

    pub fn with_split(mut self, split: Split) -> Result<Self> {
        let known: HashSet<&str> = self.graphs.iter().map(Graph::id).collect();
        split.validate(&known)?;
        self.split = split;
        Ok(self)
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn split(&self) -> &Split {
        &self.split
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn graph(&self, id: &str) -> Option<&Graph> {
        self.graphs.iter().find(|g| g.id() == id)
    }

    /// Graphs assigned to `kind`, in split-file order.
    pub fn graphs_in(&self, kind: SplitKind) -> Vec<&Graph> {
        self.split
            .ids(kind)
            .iter()
            .filter_map(|id| self.graph(id))
            .collect()
    }

    /// Every (graph, pair) cell of a split.
    pub fn cells(&self, kind: SplitKind) -> Vec<(&Graph, &AnchorPair)> {
        self.graphs_in(kind)
            .into_iter()
            .flat_map(|g| g.pairs().iter().map(move |p| (g, p)))
            .collect()
    }
}

/// Reads a JSON-lines dataset. Blank lines are skipped.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_dataset(BufReader::new(file))
}

pub fn read_dataset<R: BufRead>(reader: R) -> Result<Dataset> {
    let mut graphs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| GraphError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: GraphRecord = serde_json::from_str(&line).map_err(|e| GraphError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        graphs.push(Graph::new(record)?);
    }
    Dataset::new(graphs)
}

pub fn write_dataset<W: Write>(dataset: &Dataset, mut w: W) -> std::io::Result<()> {
    for g in dataset.graphs() {
        serde_json::to_writer(&mut w, g.record())?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let io = |source| GraphError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut buf = Vec::new();
    write_dataset(dataset, &mut buf).map_err(io)?;
    std::fs::write(path, buf).map_err(io)
}

pub fn load_split(path: &Path) -> Result<Split> {
    let text = std::fs::read_to_string(path).map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| GraphError::Split(e.to_string()))
}

pub fn save_split(split: &Split, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(split).map_err(|e| GraphError::Split(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|source| GraphError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads a dataset and, when given, its split file.
pub fn load_with_split(data: &Path, split: Option<&Path>) -> Result<Dataset> {
    let ds = load_dataset(data)?;
    match split {
        Some(p) => ds.with_split(load_split(p)?),
        None => Ok(ds),
    }
}

/// Collapses every graph into one, prefixing colliding node ids with
/// `<graphId>/`. Pairs and edges are carried over with remapped ids.
pub fn merge_to_single(dataset: &Dataset) -> Result<Graph> {
    let graphs = dataset.graphs();
    let Some(first) = graphs.first() else {
        return Err(GraphError::Invalid {
            graph: String::new(),
            message: "cannot merge an empty dataset".into(),
        });
    };
    if graphs.len() == 1 {
        return Ok(first.clone());
    }

    let mut counts: HashMap<&str, usize> = HashMap::new();
    for g in graphs {
        for n in g.nodes() {
            *counts.entry(n.id.as_str()).or_default() += 1;
        }
    }
    let remap = |g: &Graph, id: &str| -> String {
        if counts[id] > 1 {
            format!("{}/{}", g.id(), id)
        } else {
            id.to_string()
        }
    };

    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut pairs = Vec::new();
    let mut importance = graphs.iter().all(|g| g.importance().is_some()).then(BTreeMap::new);
    for g in graphs {
        for n in g.nodes() {
            nodes.push(Node {
                id: remap(g, &n.id),
                text: n.text.clone(),
            });
        }
        for e in g.edges() {
            edges.push(Edge {
                src: remap(g, &e.src),
                dst: remap(g, &e.dst),
                label: e.label.clone(),
            });
        }
        for p in g.pairs() {
            pairs.push(AnchorPair {
                ca: p.ca.iter().map(|x| remap(g, x)).collect(),
                gt: p.gt.iter().map(|x| remap(g, x)).collect(),
            });
        }
        if let (Some(out), Some(imp)) = (importance.as_mut(), g.importance()) {
            for (k, v) in imp {
                out.insert(remap(g, k), *v);
            }
        }
    }
    Graph::new(GraphRecord {
        id: "merged".into(),
        nodes,
        edges,
        pairs,
        importance,
    })
}
