//! Reader for the TUDataset text format.
//!
//! A dataset named `DS` lives in a directory holding `DS_A.txt` (one
//! `i, j` edge per line, 1-based global node ids), `DS_graph_indicator.txt`
//! (graph id per node), `DS_graph_labels.txt`, `DS_node_labels.txt` and
//! `DS_node_attributes.txt` (comma-separated reals per node).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use blmol_core::RandomStream;

use crate::graph::{DataError, GraphData, GraphRecord, MultiTaskDataset, Splits};

/// Fraction of each graph's edges held out as link-prediction positives.
pub const LINK_FRACTION: f64 = 0.1;

struct Table {
    file: String,
    rows: Vec<(usize, Vec<String>)>,
}

fn read_table(dir: &Path, name: &str, suffix: &str) -> Result<Table, DataError> {
    let file = format!("{name}_{suffix}.txt");
    let path = dir.join(&file);
    let text = fs::read_to_string(&path).map_err(|e| DataError::Io(format!("{}: {e}", path.display())))?;
    let rows: Vec<(usize, Vec<String>)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.split(',').map(|f| f.trim().to_string()).collect()))
        .collect();
    if rows.is_empty() {
        return Err(DataError::Empty(suffix.to_string()));
    }
    Ok(Table { file, rows })
}

impl Table {
    fn error(&self, line: usize, message: impl Into<String>) -> DataError {
        DataError::Parse { file: self.file.clone(), line, message: message.into() }
    }

    fn ints(&self, arity: usize) -> Result<Vec<Vec<i64>>, DataError> {
        self.rows
            .iter()
            .map(|(line, fields)| {
                if fields.len() < arity {
                    return Err(self.error(*line, format!("expected {arity} fields, found {}", fields.len())));
                }
                fields[..arity]
                    .iter()
                    .map(|f| f.parse::<i64>().map_err(|_| self.error(*line, format!("not an integer: {f:?}"))))
                    .collect()
            })
            .collect()
    }

    fn reals(&self) -> Result<Vec<Vec<f64>>, DataError> {
        self.rows
            .iter()
            .map(|(line, fields)| {
                fields
                    .iter()
                    .map(|f| match f.parse::<f64>() {
                        Ok(v) if v.is_finite() => Ok(v),
                        _ => Err(self.error(*line, format!("not a finite real: {f:?}"))),
                    })
                    .collect()
            })
            .collect()
    }

    fn line(&self, row: usize) -> usize {
        self.rows[row].0
    }
}

/// Maps label values to `0..classes` in ascending order.
fn dense_labels(values: &[i64]) -> (Vec<usize>, usize) {
    let distinct: BTreeSet<i64> = values.iter().copied().collect();
    let index: BTreeMap<i64, usize> = distinct.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    (values.iter().map(|v| index[v]).collect(), distinct.len())
}

/// Parses the dataset in `dir`, whose last path component names the files.
/// Link samples and splits are drawn from `rng`.
pub fn parse_tudataset(dir: &Path, rng: &RandomStream) -> Result<MultiTaskDataset, DataError> {
    let name = dir
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| DataError::Io(format!("{}: not a dataset directory", dir.display())))?
        .to_string();
    let indicator_table = read_table(dir, &name, "graph_indicator")?;
    let indicator: Vec<i64> = indicator_table.ints(1)?.into_iter().map(|r| r[0]).collect();
    let num_nodes = indicator.len();
    let num_graphs = *indicator.iter().max().expect("non-empty");
    for (row, &g) in indicator.iter().enumerate() {
        if g < 1 {
            return Err(indicator_table.error(indicator_table.line(row), format!("graph id {g} below 1")));
        }
    }
    let num_graphs = num_graphs as usize;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); num_graphs];
    let mut local = vec![0usize; num_nodes];
    for (node, &g) in indicator.iter().enumerate() {
        let list = &mut members[g as usize - 1];
        local[node] = list.len();
        list.push(node);
    }
    if let Some(g) = members.iter().position(Vec::is_empty) {
        return Err(DataError::Dataset(format!("graph {} has no nodes", g + 1)));
    }

    let labels_table = read_table(dir, &name, "graph_labels")?;
    let graph_raw: Vec<i64> = labels_table.ints(1)?.into_iter().map(|r| r[0]).collect();
    if graph_raw.len() != num_graphs {
        return Err(labels_table.error(0, format!("{} labels for {num_graphs} graphs", graph_raw.len())));
    }
    let (graph_labels, graph_classes) = dense_labels(&graph_raw);

    let node_table = read_table(dir, &name, "node_labels")?;
    let node_raw: Vec<i64> = node_table.ints(1)?.into_iter().map(|r| r[0]).collect();
    if node_raw.len() != num_nodes {
        return Err(node_table.error(0, format!("{} labels for {num_nodes} nodes", node_raw.len())));
    }
    let (node_labels, node_classes) = dense_labels(&node_raw);

    let attr_table = read_table(dir, &name, "node_attributes")?;
    let attributes = attr_table.reals()?;
    if attributes.len() != num_nodes {
        return Err(attr_table.error(0, format!("{} attribute rows for {num_nodes} nodes", attributes.len())));
    }
    let width = attributes[0].len();
    if let Some(row) = attributes.iter().position(|r| r.len() != width) {
        return Err(attr_table.error(attr_table.line(row), format!("expected {width} attributes")));
    }

    let edge_table = read_table(dir, &name, "A")?;
    let mut edges: Vec<BTreeSet<(usize, usize)>> = vec![BTreeSet::new(); num_graphs];
    for (row, pair) in edge_table.ints(2)?.into_iter().enumerate() {
        let line = edge_table.line(row);
        let node = |v: i64| {
            if v < 1 || v as usize > num_nodes {
                Err(edge_table.error(line, format!("unknown node {v}")))
            } else {
                Ok(v as usize - 1)
            }
        };
        let (u, v) = (node(pair[0])?, node(pair[1])?);
        if indicator[u] != indicator[v] {
            return Err(edge_table.error(line, format!("edge joins graphs {} and {}", indicator[u], indicator[v])));
        }
        if u != v {
            let (a, b) = (local[u], local[v]);
            edges[indicator[u] as usize - 1].insert((a.min(b), a.max(b)));
        }
    }

    let graphs = members
        .iter()
        .enumerate()
        .map(|(g, nodes)| {
            let record = GraphRecord {
                nodes: nodes.len(),
                edges: edges[g].iter().copied().collect(),
                features: nodes.iter().map(|&n| attributes[n].clone()).collect(),
                node_labels: nodes.iter().map(|&n| node_labels[n]).collect(),
                graph_label: graph_labels[g],
                link_positive: Vec::new(),
                link_negative: Vec::new(),
            };
            let data = GraphData::new(record).map_err(|message| DataError::Graph { graph: g, message })?;
            Ok(data.with_link_samples(LINK_FRACTION, &mut rng.derive_index("links", g)))
        })
        .collect::<Result<Vec<_>, DataError>>()?;
    let splits = Splits::random(num_graphs, &mut rng.derive("splits"));
    let ds = MultiTaskDataset { name, node_classes, graph_classes, graphs, splits };
    ds.validate()?;
    Ok(ds)
}

/// Summary counts of a parsed dataset.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct DatasetSummary {
    pub graphs: usize,
    pub nodes: usize,
    pub edges: usize,
    pub graph_classes: usize,
    pub node_classes: usize,
    pub attribute_width: usize,
}

impl DatasetSummary {
    /// Edges count message-passing edges plus held-out positives.
    pub fn of(ds: &MultiTaskDataset) -> Self {
        Self {
            graphs: ds.graphs.len(),
            nodes: ds.graphs.iter().map(|g| g.num_nodes()).sum(),
            edges: ds.graphs.iter().map(|g| g.edges().len() + g.link_positive().len()).sum(),
            graph_classes: ds.graph_classes,
            node_classes: ds.node_classes,
            attribute_width: ds.feature_width(),
        }
    }
}
