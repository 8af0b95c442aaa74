use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::RandomStream;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestParams {
    pub trees: usize,
    /// Features tried per split; `None` means `ceil(width / 3)`.
    pub features_per_split: Option<usize>,
    pub min_leaf: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self { trees: 100, features_per_split: None, min_leaf: 2, bootstrap: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(f64),
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<Tree>,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    mtry: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

fn mean(y: &[f64], rows: &[usize]) -> f64 {
    rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<usize>, rng: &mut RandomStream) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf(mean(self.y, &rows)));
        let first = self.y[rows[0]];
        if rows.len() < 2 * self.min_leaf || rows.iter().all(|&i| self.y[i] == first) {
            return id;
        }
        let width = self.x[0].len();
        let mut candidates: Vec<usize> = (0..width).collect();
        rng.shuffle(&mut candidates);
        candidates.truncate(self.mtry);
        candidates.sort_unstable();

        let Some((feature, threshold)) = self.best_split(&rows, &candidates) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| self.x[i][feature] <= threshold);
        let l = self.grow(left, rng);
        let r = self.grow(right, rng);
        self.nodes[id] = Node::Split { feature, threshold, left: l, right: r };
        id
    }

    fn best_split(&self, rows: &[usize], features: &[usize]) -> Option<(usize, f64)> {
        let n = rows.len();
        let total: f64 = rows.iter().map(|&i| self.y[i]).sum();
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = rows.to_vec();
        for &f in features {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let mut left_sum = 0.0;
            for k in 0..n - 1 {
                left_sum += self.y[order[k]];
                let (lo, hi) = (self.x[order[k]][f], self.x[order[k + 1]][f]);
                let nl = k + 1;
                if lo == hi || nl < self.min_leaf || n - nl < self.min_leaf {
                    continue;
                }
                // maximizing sum^2/n over both sides minimizes the SSE
                let right_sum = total - left_sum;
                let gain = left_sum * left_sum / nl as f64 + right_sum * right_sum / (n - nl) as f64;
                if best.map_or(true, |(g, _, _)| gain > g) {
                    best = Some((gain, f, lo + (hi - lo) / 2.0));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }
}

impl Forest {
    /// Fits on rows already in canonical order. Tree `t` draws from the
    /// stream `rng.derive_index("tree", t)`.
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: &ForestParams, rng: &RandomStream) -> Forest {
        let width = x[0].len();
        let mtry = params.features_per_split.unwrap_or(width.div_ceil(3)).clamp(1, width);
        let min_leaf = params.min_leaf.max(1);
        let trees = (0..params.trees.max(1))
            .into_par_iter()
            .map(|t| {
                let mut stream = rng.derive_index("tree", t);
                let rows: Vec<usize> = if params.bootstrap {
                    (0..x.len()).map(|_| stream.index(x.len())).collect()
                } else {
                    (0..x.len()).collect()
                };
                let mut b = Builder { x, y, mtry, min_leaf, nodes: Vec::new() };
                b.grow(rows, &mut stream);
                Tree { nodes: b.nodes }
            })
            .collect();
        Forest { trees }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}
