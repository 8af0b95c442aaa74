//! Graphs, multi-task datasets and batching.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use blmol_core::RandomStream;
use serde::{Deserialize, Serialize};

use crate::tensor::{Csr, Matrix};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DataError {
    #[error("graph {graph}: {message}")]
    Graph { graph: usize, message: String },
    #[error("dataset: {0}")]
    Dataset(String),
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },
    #[error("{0}: empty")]
    Empty(String),
    #[error("{0}")]
    Io(String),
}

/// Downstream task handled by one head.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Task {
    #[serde(rename = "GC")]
    Graph,
    #[serde(rename = "NC")]
    Node,
    #[serde(rename = "LP")]
    Link,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Graph, Task::Node, Task::Link];

    pub fn code(self) -> &'static str {
        match self {
            Task::Graph => "GC",
            Task::Node => "NC",
            Task::Link => "LP",
        }
    }

    /// Name of the validation metric reported for the task.
    pub fn metric_name(self) -> &'static str {
        match self {
            Task::Graph => "gc_acc",
            Task::Node => "nc_acc",
            Task::Link => "lp_auc",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Task {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "GC" => Ok(Task::Graph),
            "NC" => Ok(Task::Node),
            "LP" => Ok(Task::Link),
            _ => Err(format!("unknown task {s:?}, expected GC, NC or LP")),
        }
    }
}

/// Non-empty ordered set of tasks, always in GC, NC, LP order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Task>", into = "Vec<Task>")]
pub struct TaskSet(Vec<Task>);

impl TaskSet {
    pub fn new(tasks: impl IntoIterator<Item = Task>) -> Result<Self, String> {
        let set: BTreeSet<Task> = tasks.into_iter().collect();
        if set.is_empty() {
            return Err("task set must not be empty".into());
        }
        Ok(Self(set.into_iter().collect()))
    }

    pub fn all() -> Self {
        Self(Task::ALL.to_vec())
    }

    pub fn tasks(&self) -> &[Task] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, t: Task) -> bool {
        self.0.contains(&t)
    }
}

impl TryFrom<Vec<Task>> for TaskSet {
    type Error = String;
    fn try_from(v: Vec<Task>) -> Result<Self, String> {
        let n = v.len();
        let set = TaskSet::new(v)?;
        if set.len() != n {
            return Err("duplicate task".into());
        }
        Ok(set)
    }
}

impl From<TaskSet> for Vec<Task> {
    fn from(t: TaskSet) -> Self {
        t.0
    }
}

/// `D^-1/2 (A + I) D^-1/2` for an undirected edge list.
pub fn normalized_adjacency(n: usize, edges: &[(usize, usize)]) -> Csr {
    let mut degree = vec![1.0f64; n];
    for &(u, v) in edges {
        degree[u] += 1.0;
        degree[v] += 1.0;
    }
    let inv: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut entries = Vec::with_capacity(n + 2 * edges.len());
    for i in 0..n {
        entries.push((i, i, inv[i] * inv[i]));
    }
    for &(u, v) in edges {
        let w = inv[u] * inv[v];
        entries.push((u, v, w));
        entries.push((v, u, w));
    }
    Csr::from_triplets(n, entries)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    pub nodes: usize,
    pub edges: Vec<(usize, usize)>,
    pub features: Vec<Vec<f64>>,
    pub node_labels: Vec<usize>,
    pub graph_label: usize,
    #[serde(default)]
    pub link_positive: Vec<(usize, usize)>,
    #[serde(default)]
    pub link_negative: Vec<(usize, usize)>,
}

/// One graph with features, labels and held-out link samples.
///
/// `edges` are the message-passing edges, stored once per undirected pair
/// with `u < v`. Held-out positive links are not among them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphRecord", into = "GraphRecord")]
pub struct GraphData {
    record: GraphRecord,
    adjacency: Arc<Csr>,
}

fn canonical_edge(u: usize, v: usize) -> (usize, usize) {
    (u.min(v), u.max(v))
}

impl GraphData {
    pub fn new(record: GraphRecord) -> Result<Self, String> {
        let n = record.nodes;
        if n == 0 {
            return Err("graph has no nodes".into());
        }
        if record.features.len() != n || record.node_labels.len() != n {
            return Err(format!(
                "{} feature rows and {} node labels for {n} nodes",
                record.features.len(),
                record.node_labels.len()
            ));
        }
        let width = record.features[0].len();
        if record.features.iter().any(|r| r.len() != width) {
            return Err("feature rows differ in width".into());
        }
        if record.features.iter().flatten().any(|v| !v.is_finite()) {
            return Err("non-finite feature".into());
        }
        let mut seen = BTreeSet::new();
        for &(u, v) in &record.edges {
            if u >= n || v >= n {
                return Err(format!("edge ({u}, {v}) out of range for {n} nodes"));
            }
            if u == v {
                return Err(format!("self-loop at node {u}"));
            }
            if !seen.insert(canonical_edge(u, v)) {
                return Err(format!("duplicate edge ({u}, {v})"));
            }
        }
        for &(u, v) in record.link_positive.iter().chain(&record.link_negative) {
            if u >= n || v >= n || u == v {
                return Err(format!("link sample ({u}, {v}) invalid for {n} nodes"));
            }
        }
        for &(u, v) in &record.link_negative {
            if seen.contains(&canonical_edge(u, v)) || record.link_positive.iter().any(|&p| canonical_edge(p.0, p.1) == canonical_edge(u, v)) {
                return Err(format!("negative link sample ({u}, {v}) is an edge"));
            }
        }
        let mut record = record;
        record.edges = seen.into_iter().collect();
        let adjacency = Arc::new(normalized_adjacency(n, &record.edges));
        Ok(Self { record, adjacency })
    }

    pub fn num_nodes(&self) -> usize {
        self.record.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.record.edges
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.record.features
    }

    pub fn feature_width(&self) -> usize {
        self.record.features[0].len()
    }

    pub fn node_labels(&self) -> &[usize] {
        &self.record.node_labels
    }

    pub fn graph_label(&self) -> usize {
        self.record.graph_label
    }

    pub fn link_positive(&self) -> &[(usize, usize)] {
        &self.record.link_positive
    }

    pub fn link_negative(&self) -> &[(usize, usize)] {
        &self.record.link_negative
    }

    pub fn adjacency(&self) -> &Arc<Csr> {
        &self.adjacency
    }

    pub fn record(&self) -> &GraphRecord {
        &self.record
    }

    /// Moves a fraction of the edges into held-out positives and samples as
    /// many non-edges as negatives. Graphs with fewer than two edges keep all
    /// their edges. When too few non-edges exist, positives are trimmed to
    /// keep the classes balanced.
    pub fn with_link_samples(&self, fraction: f64, rng: &mut RandomStream) -> Self {
        let mut record = self.record.clone();
        let all: Vec<(usize, usize)> = {
            let mut e = record.edges.clone();
            e.extend(record.link_positive.iter().map(|&(u, v)| canonical_edge(u, v)));
            e.sort_unstable();
            e.dedup();
            e
        };
        let n = record.nodes;
        let mut shuffled = all.clone();
        rng.shuffle(&mut shuffled);
        let held = if all.len() < 2 { 0 } else { ((all.len() as f64 * fraction).round() as usize).clamp(1, all.len() - 1) };
        let edge_set: BTreeSet<(usize, usize)> = all.iter().copied().collect();
        let non_edges = n * (n - 1) / 2 - edge_set.len();
        let held = held.min(non_edges);
        let mut negatives = BTreeSet::new();
        while negatives.len() < held {
            let u = rng.index(n);
            let v = rng.index(n);
            if u == v {
                continue;
            }
            let e = canonical_edge(u, v);
            if !edge_set.contains(&e) {
                negatives.insert(e);
            }
        }
        let mut positives: Vec<(usize, usize)> = shuffled[..held].to_vec();
        positives.sort_unstable();
        let mut kept: Vec<(usize, usize)> = shuffled[held..].to_vec();
        kept.sort_unstable();
        let mut negatives: Vec<(usize, usize)> = negatives.into_iter().collect();
        rng.shuffle(&mut negatives);
        record.edges = kept;
        record.link_positive = positives;
        record.link_negative = negatives;
        Self::new(record).expect("link sampling preserves validity")
    }
}

impl TryFrom<GraphRecord> for GraphData {
    type Error = String;
    fn try_from(r: GraphRecord) -> Result<Self, String> {
        GraphData::new(r)
    }
}

impl From<GraphData> for GraphRecord {
    fn from(g: GraphData) -> Self {
        g.record
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    /// Shuffles `0..n` and cuts it 70/10/20, rounding the first two down.
    pub fn random(n: usize, rng: &mut RandomStream) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut order);
        let train = n * 7 / 10;
        let val = n / 10;
        let mut s = Self {
            train: order[..train].to_vec(),
            val: order[train..train + val].to_vec(),
            test: order[train + val..].to_vec(),
        };
        s.train.sort_unstable();
        s.val.sort_unstable();
        s.test.sort_unstable();
        s
    }

    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.val.len(), self.test.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

/// Graphs plus their split assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiTaskDataset {
    pub name: String,
    pub node_classes: usize,
    pub graph_classes: usize,
    pub graphs: Vec<GraphData>,
    pub splits: Splits,
}

impl MultiTaskDataset {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.graphs.is_empty() {
            return Err(DataError::Dataset("no graphs".into()));
        }
        let width = self.graphs[0].feature_width();
        for (i, g) in self.graphs.iter().enumerate() {
            let fail = |message: String| DataError::Graph { graph: i, message };
            if g.feature_width() != width {
                return Err(fail(format!("feature width {} differs from {width}", g.feature_width())));
            }
            if g.graph_label() >= self.graph_classes {
                return Err(fail(format!("graph label {} outside {} classes", g.graph_label(), self.graph_classes)));
            }
            if let Some(&l) = g.node_labels().iter().find(|&&l| l >= self.node_classes) {
                return Err(fail(format!("node label {l} outside {} classes", self.node_classes)));
            }
        }
        let mut all: Vec<usize> = self.splits.train.iter().chain(&self.splits.val).chain(&self.splits.test).copied().collect();
        all.sort_unstable();
        if all != (0..self.graphs.len()).collect::<Vec<_>>() {
            return Err(DataError::Dataset("splits are not a disjoint cover of the graphs".into()));
        }
        Ok(())
    }

    pub fn feature_width(&self) -> usize {
        self.graphs[0].feature_width()
    }

    pub fn split(&self, which: Split) -> &[usize] {
        match which {
            Split::Train => &self.splits.train,
            Split::Val => &self.splits.val,
            Split::Test => &self.splits.test,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("dataset serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DataError> {
        let ds: Self = serde_json::from_str(text).map_err(|e| DataError::Dataset(e.to_string()))?;
        ds.validate()?;
        Ok(ds)
    }

    pub fn batch(&self, indices: &[usize]) -> GraphBatch {
        let graphs: Vec<&GraphData> = indices.iter().map(|&i| &self.graphs[i]).collect();
        GraphBatch::new(&graphs)
    }
}

/// Disjoint union of several graphs, ready for a forward pass.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub features: Matrix,
    pub adjacency: Arc<Csr>,
    pub node_graph: Arc<Vec<usize>>,
    pub num_graphs: usize,
    pub node_labels: Arc<Vec<usize>>,
    pub graph_labels: Arc<Vec<usize>>,
    pub link_pairs: Arc<Vec<(usize, usize)>>,
    pub link_labels: Arc<Vec<f64>>,
}

impl GraphBatch {
    pub fn new(graphs: &[&GraphData]) -> Self {
        assert!(!graphs.is_empty(), "empty batch");
        let width = graphs[0].feature_width();
        let total: usize = graphs.iter().map(|g| g.num_nodes()).sum();
        let mut features = Vec::with_capacity(total * width);
        let mut entries = Vec::new();
        let mut node_graph = Vec::with_capacity(total);
        let mut node_labels = Vec::with_capacity(total);
        let mut pairs = Vec::new();
        let mut labels = Vec::new();
        let mut base = 0;
        for (gi, g) in graphs.iter().enumerate() {
            for row in g.features() {
                features.extend_from_slice(row);
            }
            let adj = g.adjacency();
            for r in 0..adj.n {
                for idx in adj.row_ptr[r]..adj.row_ptr[r + 1] {
                    entries.push((base + r, base + adj.cols[idx], adj.vals[idx]));
                }
            }
            node_graph.extend(std::iter::repeat_n(gi, g.num_nodes()));
            node_labels.extend_from_slice(g.node_labels());
            for &(u, v) in g.link_positive() {
                pairs.push((base + u, base + v));
                labels.push(1.0);
            }
            for &(u, v) in g.link_negative() {
                pairs.push((base + u, base + v));
                labels.push(0.0);
            }
            base += g.num_nodes();
        }
        Self {
            features: Matrix::from_vec(total, width, features),
            adjacency: Arc::new(Csr::from_triplets(total, entries)),
            node_graph: Arc::new(node_graph),
            num_graphs: graphs.len(),
            node_labels: Arc::new(node_labels),
            graph_labels: Arc::new(graphs.iter().map(|g| g.graph_label()).collect()),
            link_pairs: Arc::new(pairs),
            link_labels: Arc::new(labels),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows
    }
}
