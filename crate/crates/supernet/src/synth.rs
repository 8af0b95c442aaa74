//! Stochastic-block-model datasets.

use blmol_core::RandomStream;
use serde::{Deserialize, Serialize};

use crate::graph::{DataError, GraphData, GraphRecord, MultiTaskDataset, Splits};

/// Parameters of the synthetic generator.
///
/// Each graph picks a dominant community; every node joins it with
/// probability `dominance` and otherwise a uniformly drawn community. Node
/// features are community indicators plus Gaussian noise of standard
/// deviation `noise`, followed by `extra_features` pure-noise columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SbmConfig {
    pub graphs: usize,
    pub nodes: usize,
    pub communities: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub noise: f64,
    pub extra_features: usize,
    pub dominance: f64,
    pub link_fraction: f64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        Self {
            graphs: 60,
            nodes: 20,
            communities: 3,
            p_in: 0.3,
            p_out: 0.05,
            noise: 0.5,
            extra_features: 0,
            dominance: 0.5,
            link_fraction: 0.15,
        }
    }
}

impl SbmConfig {
    pub fn validate(&self) -> Result<(), DataError> {
        let fail = |m: &str| Err(DataError::Dataset(m.into()));
        if self.graphs < 1 {
            return fail("graphs must be at least 1");
        }
        if self.nodes < 3 {
            return fail("nodes must be at least 3");
        }
        if self.communities < 2 {
            return fail("communities must be at least 2");
        }
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out), ("dominance", self.dominance)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(DataError::Dataset(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.p_in + self.p_out <= 0.0 {
            return fail("at least one edge probability must be positive");
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return fail("noise must be finite and non-negative");
        }
        if !(self.link_fraction > 0.0 && self.link_fraction < 1.0) {
            return fail("link_fraction must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Label of a graph: its most frequent community, ties to the smallest.
pub fn majority(labels: &[usize], classes: usize) -> usize {
    let mut counts = vec![0usize; classes];
    for &l in labels {
        counts[l] += 1;
    }
    let best = *counts.iter().max().expect("at least one class");
    counts.iter().position(|&c| c == best).expect("max exists")
}

fn graph(config: &SbmConfig, rng: &mut RandomStream) -> GraphRecord {
    let c = config.communities;
    let n = config.nodes;
    let dominant = rng.index(c);
    let labels: Vec<usize> = (0..n).map(|_| if rng.uniform() < config.dominance { dominant } else { rng.index(c) }).collect();
    let mut edges = Vec::new();
    for attempt in 0.. {
        edges.clear();
        for u in 0..n {
            for v in (u + 1)..n {
                let p = if labels[u] == labels[v] { config.p_in } else { config.p_out };
                if rng.uniform() < p {
                    edges.push((u, v));
                }
            }
        }
        if edges.len() >= 2 || attempt >= 100 {
            break;
        }
    }
    let width = c + config.extra_features;
    let features = labels
        .iter()
        .map(|&l| (0..width).map(|j| if j == l { 1.0 } else { 0.0 } + config.noise * rng.normal()).collect())
        .collect();
    GraphRecord {
        nodes: n,
        edges,
        features,
        graph_label: majority(&labels, c),
        node_labels: labels,
        link_positive: Vec::new(),
        link_negative: Vec::new(),
    }
}

/// Generates a dataset; graph `i` draws from `rng.derive_index("graph", i)`.
pub fn synth_dataset(config: &SbmConfig, rng: &RandomStream) -> Result<MultiTaskDataset, DataError> {
    config.validate()?;
    let graphs = (0..config.graphs)
        .map(|i| {
            let mut stream = rng.derive_index("graph", i);
            let record = graph(config, &mut stream);
            let g = GraphData::new(record).map_err(|message| DataError::Graph { graph: i, message })?;
            Ok(g.with_link_samples(config.link_fraction, &mut stream))
        })
        .collect::<Result<Vec<_>, DataError>>()?;
    let splits = Splits::random(graphs.len(), &mut rng.derive("splits"));
    let ds = MultiTaskDataset {
        name: "sbm".into(),
        node_classes: config.communities,
        graph_classes: config.communities,
        graphs,
        splits,
    };
    ds.validate()?;
    Ok(ds)
}
