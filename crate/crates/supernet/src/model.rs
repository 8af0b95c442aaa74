//! Weight layout and forward pass of a decoded supernet architecture.

use blmol_core::stats::auc;
use blmol_core::RandomStream;
use serde::{Deserialize, Serialize};

use crate::genome::{BlockSpec, Fusion, Topology};
use crate::graph::{GraphBatch, Task, TaskSet};
use crate::tape::{Tape, Var};
use crate::tensor::Matrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("weights have length {found}, layout needs {expected}")]
    Layout { expected: usize, found: usize },
    #[error("features have width {found}, model expects {expected}")]
    FeatureWidth { expected: usize, found: usize },
    #[error("batch has no link samples for the LP task")]
    NoLinkSamples,
    #[error("non-finite {what} for task {task}")]
    NonFinite { task: Task, what: &'static str },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub hidden: usize,
    pub feature_width: usize,
    pub node_classes: usize,
    pub graph_classes: usize,
    pub tasks: TaskSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamKind {
    Weight,
    Bias,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
    pub kind: ParamKind,
}

impl LayoutEntry {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Names and positions of every parameter block inside the flat weight
/// vector. Blocks are contiguous and cover the vector exactly once.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WeightLayout {
    pub entries: Vec<LayoutEntry>,
}

impl WeightLayout {
    fn add(&mut self, name: impl Into<String>, rows: usize, cols: usize, kind: ParamKind) -> usize {
        let offset = self.total();
        self.entries.push(LayoutEntry { name: name.into(), offset, rows, cols, kind });
        self.entries.len() - 1
    }

    pub fn total(&self) -> usize {
        self.entries.last().map_or(0, |e| e.offset + e.len())
    }

    pub fn find(&self, name: &str) -> Option<&LayoutEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Glorot-uniform weights and zero biases.
    pub fn initialize(&self, rng: &mut RandomStream) -> Vec<f64> {
        let mut w = vec![0.0; self.total()];
        for e in &self.entries {
            if e.kind == ParamKind::Weight {
                let bound = (6.0 / (e.rows + e.cols) as f64).sqrt();
                for v in &mut w[e.offset..e.offset + e.len()] {
                    *v = bound * (2.0 * rng.uniform() - 1.0);
                }
            }
        }
        w
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum FusionParams {
    None,
    Concat { proj: usize, bias: usize },
    Lstm { wx: usize, wh: usize, bias: usize },
    Att { w: usize, score: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct BlockParams {
    fusion: FusionParams,
    weight: usize,
    bias: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct HeadParams {
    gc: Option<[usize; 4]>,
    nc: Option<[usize; 2]>,
    lp: Option<[usize; 4]>,
}

/// A decoded architecture bound to a weight layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ComputationPlan {
    topology: Topology,
    config: ModelConfig,
    layout: WeightLayout,
    input: [usize; 2],
    blocks: Vec<BlockParams>,
    heads: HeadParams,
}

fn fusion_params(layout: &mut WeightLayout, prefix: &str, block: &BlockSpec, h: usize) -> FusionParams {
    use ParamKind::*;
    let k = block.inputs.len();
    match block.fusion {
        Fusion::Concat => FusionParams::Concat {
            proj: layout.add(format!("{prefix}.concat.w"), k * h, h, Weight),
            bias: layout.add(format!("{prefix}.concat.b"), 1, h, Bias),
        },
        Fusion::Lstm => FusionParams::Lstm {
            wx: layout.add(format!("{prefix}.lstm.wx"), h, 4 * h, Weight),
            wh: layout.add(format!("{prefix}.lstm.wh"), h, 4 * h, Weight),
            bias: layout.add(format!("{prefix}.lstm.b"), 1, 4 * h, Bias),
        },
        Fusion::Att => FusionParams::Att {
            w: layout.add(format!("{prefix}.att.w"), h, h, Weight),
            score: layout.add(format!("{prefix}.att.s"), h, 1, Weight),
        },
        Fusion::Mean | Fusion::Max | Fusion::Sum => FusionParams::None,
    }
}

/// Values of the task heads after a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    /// Class probabilities per graph.
    pub gc: Option<Matrix>,
    /// Class probabilities per node.
    pub nc: Option<Matrix>,
    /// Link probabilities per sampled pair.
    pub lp: Option<Vec<f64>>,
}

struct HeadVars {
    gc: Option<Var>,
    nc: Option<Var>,
    lp: Option<Var>,
}

impl ComputationPlan {
    pub fn new(topology: Topology, config: ModelConfig) -> Self {
        use ParamKind::*;
        let h = config.hidden;
        let mut layout = WeightLayout::default();
        let input = [layout.add("input.w", config.feature_width, h, Weight), layout.add("input.b", 1, h, Bias)];
        let depth = topology.depth;
        let mut blocks = Vec::with_capacity(depth + 1);
        for (b, spec) in topology.blocks.iter().enumerate() {
            let prefix = if b < depth { format!("block{}", b + 1) } else { "output".to_string() };
            let fusion = fusion_params(&mut layout, &prefix, spec, h);
            let (weight, bias) = if b < depth {
                (layout.add(format!("{prefix}.gcn.w"), h, h, Weight), None)
            } else {
                (layout.add("output.w", h, h, Weight), Some(layout.add("output.b", 1, h, Bias)))
            };
            blocks.push(BlockParams { fusion, weight, bias });
        }
        let tasks = &config.tasks;
        let gc = tasks.contains(Task::Graph).then(|| {
            [
                layout.add("gc.w1", h, h, Weight),
                layout.add("gc.b1", 1, h, Bias),
                layout.add("gc.w2", h, config.graph_classes, Weight),
                layout.add("gc.b2", 1, config.graph_classes, Bias),
            ]
        });
        let nc = tasks
            .contains(Task::Node)
            .then(|| [layout.add("nc.w", h, config.node_classes, Weight), layout.add("nc.b", 1, config.node_classes, Bias)]);
        let lp = tasks.contains(Task::Link).then(|| {
            [
                layout.add("lp.w1", h, h, Weight),
                layout.add("lp.b1", 1, h, Bias),
                layout.add("lp.w2", 2 * h, 1, Weight),
                layout.add("lp.b2", 1, 1, Bias),
            ]
        });
        Self { topology, config, layout, input, blocks, heads: HeadParams { gc, nc, lp } }
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &WeightLayout {
        &self.layout
    }

    pub fn num_weights(&self) -> usize {
        self.layout.total()
    }

    pub fn tasks(&self) -> &[Task] {
        self.config.tasks.tasks()
    }

    fn p(&self, tape: &mut Tape, w: &[f64], entry: usize) -> Var {
        let e = &self.layout.entries[entry];
        tape.param(w, e.offset, e.rows, e.cols)
    }

    fn fuse(&self, tape: &mut Tape, w: &[f64], params: &FusionParams, fusion: Fusion, xs: &[Var]) -> Var {
        let h = self.config.hidden;
        match (fusion, params) {
            (Fusion::Mean, _) => {
                let s = tape.sum(xs);
                tape.scale(s, 1.0 / xs.len() as f64)
            }
            (Fusion::Sum, _) => tape.sum(xs),
            (Fusion::Max, _) => tape.max(xs),
            (Fusion::Concat, FusionParams::Concat { proj, bias }) => {
                let c = tape.concat_cols(xs);
                let p = self.p(tape, w, *proj);
                let b = self.p(tape, w, *bias);
                let y = tape.matmul(c, p);
                tape.add_bias(y, b)
            }
            (Fusion::Lstm, FusionParams::Lstm { wx, wh, bias }) => {
                let wx = self.p(tape, w, *wx);
                let wh = self.p(tape, w, *wh);
                let b = self.p(tape, w, *bias);
                let mut state: Option<(Var, Var)> = None;
                for &x in xs {
                    let mut z = tape.matmul(x, wx);
                    if let Some((hidden, _)) = state {
                        let r = tape.matmul(hidden, wh);
                        z = tape.add(z, r);
                    }
                    let z = tape.add_bias(z, b);
                    let gate = |tape: &mut Tape, i: usize| tape.slice_cols(z, i * h, h);
                    let (zi, zf, zg, zo) = (gate(tape, 0), gate(tape, 1), gate(tape, 2), gate(tape, 3));
                    let i = tape.sigmoid(zi);
                    let g = tape.tanh(zg);
                    let o = tape.sigmoid(zo);
                    let mut c = tape.mul(i, g);
                    if let Some((_, prev)) = state {
                        let f = tape.sigmoid(zf);
                        let kept = tape.mul(f, prev);
                        c = tape.add(kept, c);
                    }
                    let tc = tape.tanh(c);
                    state = Some((tape.mul(o, tc), c));
                }
                state.expect("at least one input").0
            }
            (Fusion::Att, FusionParams::Att { w: wa, score }) => {
                let wa = self.p(tape, w, *wa);
                let s = self.p(tape, w, *score);
                let scores: Vec<Var> = xs
                    .iter()
                    .map(|&x| {
                        let t = tape.matmul(x, wa);
                        let t = tape.tanh(t);
                        tape.matmul(t, s)
                    })
                    .collect();
                let stacked = tape.concat_cols(&scores);
                let alpha = tape.softmax_rows(stacked);
                let parts: Vec<Var> = xs
                    .iter()
                    .enumerate()
                    .map(|(j, &x)| {
                        let a = tape.slice_cols(alpha, j, 1);
                        tape.scale_rows(x, a)
                    })
                    .collect();
                tape.sum(&parts)
            }
            (f, p) => unreachable!("fusion {f} with parameters {p:?}"),
        }
    }

    fn build(&self, tape: &mut Tape, w: &[f64], batch: &GraphBatch) -> Result<HeadVars, ModelError> {
        if w.len() != self.num_weights() {
            return Err(ModelError::Layout { expected: self.num_weights(), found: w.len() });
        }
        if batch.features.cols != self.config.feature_width {
            return Err(ModelError::FeatureWidth { expected: self.config.feature_width, found: batch.features.cols });
        }
        let x = tape.constant(batch.features.clone());
        let win = self.p(tape, w, self.input[0]);
        let bin = self.p(tape, w, self.input[1]);
        let h0 = tape.matmul(x, win);
        let h0 = tape.add_bias(h0, bin);
        let mut reps = vec![tape.relu(h0)];
        for (spec, params) in self.topology.blocks.iter().zip(&self.blocks) {
            let xs: Vec<Var> = spec.inputs.iter().map(|&i| reps[i]).collect();
            let fused = self.fuse(tape, w, &params.fusion, spec.fusion, &xs);
            let weight = self.p(tape, w, params.weight);
            let y = tape.matmul(fused, weight);
            let y = match params.bias {
                None => tape.sparse_matmul(batch.adjacency.clone(), y),
                Some(b) => {
                    let b = self.p(tape, w, b);
                    tape.add_bias(y, b)
                }
            };
            reps.push(tape.relu(y));
        }
        let emb = *reps.last().expect("output block");
        let dense = |tape: &mut Tape, input: Var, wi: usize, bi: usize| {
            let wv = self.p(tape, w, wi);
            let bv = self.p(tape, w, bi);
            let y = tape.matmul(input, wv);
            tape.add_bias(y, bv)
        };
        let gc = self.heads.gc.map(|[w1, b1, w2, b2]| {
            let z = dense(tape, emb, w1, b1);
            let z = tape.relu(z);
            let pooled = tape.segment_mean(z, batch.node_graph.clone(), batch.num_graphs);
            dense(tape, pooled, w2, b2)
        });
        let nc = self.heads.nc.map(|[wn, bn]| dense(tape, emb, wn, bn));
        let lp = match self.heads.lp {
            Some([w1, b1, w2, b2]) => {
                if batch.link_pairs.is_empty() {
                    return Err(ModelError::NoLinkSamples);
                }
                let z = dense(tape, emb, w1, b1);
                let z = tape.relu(z);
                let pairs = tape.pair_concat(z, batch.link_pairs.clone());
                Some(dense(tape, pairs, w2, b2))
            }
            None => None,
        };
        Ok(HeadVars { gc, nc, lp })
    }

    /// Task losses in task order, with one gradient row per loss.
    pub fn losses_and_grads(&self, w: &[f64], batch: &GraphBatch) -> Result<(Vec<f64>, Vec<Vec<f64>>), ModelError> {
        let mut tape = Tape::new();
        let heads = self.build(&mut tape, w, batch)?;
        let mut losses = Vec::new();
        let mut grads = Vec::new();
        for &task in self.tasks() {
            let loss = match task {
                Task::Graph => {
                    let p = tape.softmax_rows(heads.gc.expect("gc head"));
                    tape.mse_one_hot(p, batch.graph_labels.clone())
                }
                Task::Node => tape.nll_logits(heads.nc.expect("nc head"), batch.node_labels.clone()),
                Task::Link => tape.bce_logits(heads.lp.expect("lp head"), batch.link_labels.clone()),
            };
            let value = tape.value(loss).data[0];
            if !value.is_finite() {
                return Err(ModelError::NonFinite { task, what: "loss" });
            }
            let g = tape.backward(loss, self.num_weights());
            if g.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::NonFinite { task, what: "gradient" });
            }
            losses.push(value);
            grads.push(g);
        }
        Ok((losses, grads))
    }

    pub fn losses(&self, w: &[f64], batch: &GraphBatch) -> Result<Vec<f64>, ModelError> {
        let mut tape = Tape::new();
        let heads = self.build(&mut tape, w, batch)?;
        Ok(self
            .tasks()
            .iter()
            .map(|&task| {
                let loss = match task {
                    Task::Graph => {
                        let p = tape.softmax_rows(heads.gc.expect("gc head"));
                        tape.mse_one_hot(p, batch.graph_labels.clone())
                    }
                    Task::Node => tape.nll_logits(heads.nc.expect("nc head"), batch.node_labels.clone()),
                    Task::Link => tape.bce_logits(heads.lp.expect("lp head"), batch.link_labels.clone()),
                };
                tape.value(loss).data[0]
            })
            .collect())
    }

    pub fn predict(&self, w: &[f64], batch: &GraphBatch) -> Result<Predictions, ModelError> {
        let mut tape = Tape::new();
        let heads = self.build(&mut tape, w, batch)?;
        let gc = heads.gc.map(|v| {
            let p = tape.softmax_rows(v);
            tape.value(p).clone()
        });
        let nc = heads.nc.map(|v| {
            let p = tape.softmax_rows(v);
            tape.value(p).clone()
        });
        let lp = heads.lp.map(|v| {
            let s = tape.sigmoid(v);
            tape.value(s).data.clone()
        });
        Ok(Predictions { gc, nc, lp })
    }
}

fn accuracy(probs: &Matrix, labels: &[usize]) -> f64 {
    let hits = labels.iter().enumerate().filter(|&(r, &y)| probs.argmax_row(r) == y).count();
    hits as f64 / labels.len() as f64
}

/// Accuracy for GC and NC, AUC for LP, in task order.
pub fn metrics(pred: &Predictions, batch: &GraphBatch, tasks: &[Task]) -> Result<Vec<f64>, ModelError> {
    tasks
        .iter()
        .map(|&task| match task {
            Task::Graph => Ok(accuracy(pred.gc.as_ref().expect("gc predictions"), &batch.graph_labels)),
            Task::Node => Ok(accuracy(pred.nc.as_ref().expect("nc predictions"), &batch.node_labels)),
            Task::Link => {
                let scores = pred.lp.as_ref().expect("lp predictions");
                let (mut pos, mut neg) = (Vec::new(), Vec::new());
                for (&s, &y) in scores.iter().zip(batch.link_labels.iter()) {
                    if y > 0.5 {
                        pos.push(s);
                    } else {
                        neg.push(s);
                    }
                }
                auc(&pos, &neg).map_err(|_| ModelError::NoLinkSamples)
            }
        })
        .collect()
}
