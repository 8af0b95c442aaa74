//! Minimal reverse-mode automatic differentiation over dense matrices.
//!
//! Every operation appends a node holding its value and a record of its
//! inputs. [`Tape::backward`] walks the nodes in reverse creation order, which
//! is a reverse topological order because inputs always precede outputs.

use std::sync::Arc;

use crate::tensor::{Csr, Matrix};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param { offset: usize },
    MatMul(Var, Var),
    SparseMatMul(Arc<Csr>, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Sum(Vec<Var>),
    Max(Vec<Var>),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    ScaleRows(Var, Var),
    SegmentMean(Var, Arc<Vec<usize>>, Arc<Vec<usize>>),
    PairConcat(Var, Arc<Vec<(usize, usize)>>),
    SoftmaxRows(Var),
    MseOneHot(Var, Arc<Vec<usize>>),
    NllLogits(Var, Arc<Vec<usize>>),
    BceLogits(Var, Arc<Vec<f64>>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Matrix,
    op: Op,
}

#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn softmax_row(row: &[f64], out: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &v) in out.iter_mut().zip(row) {
        *o = (v - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Matrix, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(value, Op::Constant)
    }

    /// A `rows x cols` block of the flat weight vector starting at `offset`.
    pub fn param(&mut self, weights: &[f64], offset: usize, rows: usize, cols: usize) -> Var {
        let data = weights[offset..offset + rows * cols].to_vec();
        self.push(Matrix::from_vec(rows, cols, data), Op::Param { offset })
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul(self.value(b));
        self.push(value, Op::MatMul(a, b))
    }

    pub fn sparse_matmul(&mut self, adj: Arc<Csr>, x: Var) -> Var {
        let value = adj.matmul(self.value(x));
        self.push(value, Op::SparseMatMul(adj, x))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let mut value = self.value(a).clone();
        value.add_assign(self.value(b));
        self.push(value, Op::Add(a, b))
    }

    /// Adds the `1 x c` row `bias` to every row of `a`.
    pub fn add_bias(&mut self, a: Var, bias: Var) -> Var {
        let b = self.value(bias);
        assert_eq!((b.rows, b.cols), (1, self.value(a).cols), "bias shape");
        let mut value = self.value(a).clone();
        let b = self.value(bias).data.clone();
        for r in 0..value.rows {
            for (v, bv) in value.row_mut(r).iter_mut().zip(&b) {
                *v += bv;
            }
        }
        self.push(value, Op::AddBias(a, bias))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        assert!(x.same_shape(y), "mul shape");
        let data = x.data.iter().zip(&y.data).map(|(p, q)| p * q).collect();
        let value = Matrix::from_vec(x.rows, x.cols, data);
        self.push(value, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).map(|v| v * s);
        self.push(value, Op::Scale(a, s))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|v| v.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.push(value, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    pub fn sum(&mut self, xs: &[Var]) -> Var {
        let mut value = self.value(xs[0]).clone();
        for &x in &xs[1..] {
            value.add_assign(self.value(x));
        }
        self.push(value, Op::Sum(xs.to_vec()))
    }

    /// Elementwise maximum; ties go to the earliest input.
    pub fn max(&mut self, xs: &[Var]) -> Var {
        let mut value = self.value(xs[0]).clone();
        for &x in &xs[1..] {
            let other = self.value(x);
            assert!(value.same_shape(other), "max shape");
            for (v, &o) in value.data.iter_mut().zip(&other.data) {
                if o > *v {
                    *v = o;
                }
            }
        }
        self.push(value, Op::Max(xs.to_vec()))
    }

    pub fn concat_cols(&mut self, xs: &[Var]) -> Var {
        let rows = self.value(xs[0]).rows;
        let cols: usize = xs.iter().map(|&x| self.value(x).cols).sum();
        let mut value = Matrix::zeros(rows, cols);
        let mut start = 0;
        for &x in xs {
            let m = self.value(x);
            assert_eq!(m.rows, rows, "concat rows");
            for r in 0..rows {
                value.row_mut(r)[start..start + m.cols].copy_from_slice(m.row(r));
            }
            start += m.cols;
        }
        self.push(value, Op::ConcatCols(xs.to_vec()))
    }

    /// Columns `start..start + len` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let m = self.value(a);
        assert!(start + len <= m.cols, "slice out of range");
        let mut value = Matrix::zeros(m.rows, len);
        for r in 0..m.rows {
            value.row_mut(r).copy_from_slice(&m.row(r)[start..start + len]);
        }
        self.push(value, Op::SliceCols(a, start))
    }

    /// Multiplies row `i` of `a` by the scalar `w[i, 0]`.
    pub fn scale_rows(&mut self, a: Var, w: Var) -> Var {
        let (m, s) = (self.value(a), self.value(w));
        assert_eq!((s.rows, s.cols), (m.rows, 1), "row weights shape");
        let mut value = m.clone();
        for r in 0..value.rows {
            let f = s.data[r];
            value.row_mut(r).iter_mut().for_each(|v| *v *= f);
        }
        self.push(value, Op::ScaleRows(a, w))
    }

    /// Row means within each segment. `segment[i]` names the output row of
    /// input row `i`; every segment must be non-empty.
    pub fn segment_mean(&mut self, a: Var, segment: Arc<Vec<usize>>, segments: usize) -> Var {
        let m = self.value(a);
        assert_eq!(segment.len(), m.rows, "segment ids");
        let mut counts = vec![0usize; segments];
        let mut value = Matrix::zeros(segments, m.cols);
        for (r, &s) in segment.iter().enumerate() {
            counts[s] += 1;
            for (v, &x) in value.row_mut(s).iter_mut().zip(m.row(r)) {
                *v += x;
            }
        }
        for (s, &c) in counts.iter().enumerate() {
            assert!(c > 0, "empty segment {s}");
            value.row_mut(s).iter_mut().for_each(|v| *v /= c as f64);
        }
        self.push(value, Op::SegmentMean(a, segment, Arc::new(counts)))
    }

    /// Row `k` of the output is `[a[u_k], a[v_k]]`.
    pub fn pair_concat(&mut self, a: Var, pairs: Arc<Vec<(usize, usize)>>) -> Var {
        let m = self.value(a);
        let mut value = Matrix::zeros(pairs.len(), 2 * m.cols);
        for (k, &(u, v)) in pairs.iter().enumerate() {
            let row = value.row_mut(k);
            row[..m.cols].copy_from_slice(m.row(u));
            row[m.cols..].copy_from_slice(m.row(v));
        }
        self.push(value, Op::PairConcat(a, pairs))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let m = self.value(a);
        let mut value = Matrix::zeros(m.rows, m.cols);
        for r in 0..m.rows {
            softmax_row(m.row(r), value.row_mut(r));
        }
        self.push(value, Op::SoftmaxRows(a))
    }

    /// Mean over all entries of `(p - onehot(labels))^2`.
    pub fn mse_one_hot(&mut self, p: Var, labels: Arc<Vec<usize>>) -> Var {
        let m = self.value(p);
        assert_eq!(labels.len(), m.rows, "label count");
        let mut total = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            for (c, &v) in m.row(r).iter().enumerate() {
                let d = v - if c == y { 1.0 } else { 0.0 };
                total += d * d;
            }
        }
        let value = Matrix::scalar(total / (m.rows * m.cols) as f64);
        self.push(value, Op::MseOneHot(p, labels))
    }

    /// Mean negative log-likelihood of softmax(logits) at the labels.
    pub fn nll_logits(&mut self, logits: Var, labels: Arc<Vec<usize>>) -> Var {
        let m = self.value(logits);
        assert_eq!(labels.len(), m.rows, "label count");
        let mut total = 0.0;
        for (r, &y) in labels.iter().enumerate() {
            let row = m.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[y];
        }
        let value = Matrix::scalar(total / m.rows as f64);
        self.push(value, Op::NllLogits(logits, labels))
    }

    /// Mean binary cross-entropy of sigmoid(logits) (an `n x 1` column).
    pub fn bce_logits(&mut self, logits: Var, labels: Arc<Vec<f64>>) -> Var {
        let m = self.value(logits);
        assert_eq!((m.rows, m.cols), (labels.len(), 1), "bce shape");
        let total: f64 = m
            .data
            .iter()
            .zip(labels.iter())
            .map(|(&z, &y)| z.max(0.0) - z * y + (-z.abs()).exp().ln_1p())
            .sum();
        let value = Matrix::scalar(total / m.rows as f64);
        self.push(value, Op::BceLogits(logits, labels))
    }

    /// Gradient of the scalar node `loss` with respect to every parameter,
    /// scattered into a flat vector of length `num_weights`.
    pub fn backward(&self, loss: Var, num_weights: usize) -> Vec<f64> {
        assert_eq!((self.value(loss).rows, self.value(loss).cols), (1, 1), "loss must be scalar");
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::scalar(1.0));
        let mut out = vec![0.0; num_weights];
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let mut send = |v: Var, delta: Matrix| match &mut grads[v.0] {
                Some(acc) => acc.add_assign(&delta),
                slot @ None => *slot = Some(delta),
            };
            match &node.op {
                Op::Constant => {}
                Op::Param { offset } => {
                    for (o, d) in out[*offset..*offset + g.data.len()].iter_mut().zip(&g.data) {
                        *o += d;
                    }
                }
                Op::MatMul(a, b) => {
                    send(*a, g.matmul_bt(self.value(*b)));
                    send(*b, self.value(*a).matmul_at(&g));
                }
                Op::SparseMatMul(adj, x) => send(*x, adj.matmul_t(&g)),
                Op::Add(a, b) => {
                    send(*a, g.clone());
                    send(*b, g);
                }
                Op::AddBias(a, bias) => {
                    let mut gb = Matrix::zeros(1, g.cols);
                    for r in 0..g.rows {
                        for (s, v) in gb.data.iter_mut().zip(g.row(r)) {
                            *s += v;
                        }
                    }
                    send(*bias, gb);
                    send(*a, g);
                }
                Op::Mul(a, b) => {
                    let (x, y) = (self.value(*a), self.value(*b));
                    let ga = g.data.iter().zip(&y.data).map(|(p, q)| p * q).collect();
                    let gb = g.data.iter().zip(&x.data).map(|(p, q)| p * q).collect();
                    send(*a, Matrix::from_vec(g.rows, g.cols, ga));
                    send(*b, Matrix::from_vec(g.rows, g.cols, gb));
                }
                Op::Scale(a, s) => send(*a, g.map(|v| v * s)),
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let data = g.data.iter().zip(&x.data).map(|(d, &v)| if v > 0.0 { *d } else { 0.0 }).collect();
                    send(*a, Matrix::from_vec(g.rows, g.cols, data));
                }
                Op::Tanh(a) => {
                    let data = g.data.iter().zip(&node.value.data).map(|(d, t)| d * (1.0 - t * t)).collect();
                    send(*a, Matrix::from_vec(g.rows, g.cols, data));
                }
                Op::Sigmoid(a) => {
                    let data = g.data.iter().zip(&node.value.data).map(|(d, s)| d * s * (1.0 - s)).collect();
                    send(*a, Matrix::from_vec(g.rows, g.cols, data));
                }
                Op::Sum(xs) => {
                    for &x in xs {
                        send(x, g.clone());
                    }
                }
                Op::Max(xs) => {
                    let mut owner = vec![0usize; g.data.len()];
                    for (k, &x) in xs.iter().enumerate().skip(1) {
                        let v = self.value(x);
                        for (idx, o) in owner.iter_mut().enumerate() {
                            if v.data[idx] > self.value(xs[*o]).data[idx] {
                                *o = k;
                            }
                        }
                    }
                    for (k, &x) in xs.iter().enumerate() {
                        let data = g.data.iter().zip(&owner).map(|(d, &o)| if o == k { *d } else { 0.0 }).collect();
                        send(x, Matrix::from_vec(g.rows, g.cols, data));
                    }
                }
                Op::ConcatCols(xs) => {
                    let mut start = 0;
                    for &x in xs {
                        let cols = self.value(x).cols;
                        let mut part = Matrix::zeros(g.rows, cols);
                        for r in 0..g.rows {
                            part.row_mut(r).copy_from_slice(&g.row(r)[start..start + cols]);
                        }
                        send(x, part);
                        start += cols;
                    }
                }
                Op::SliceCols(a, start) => {
                    let src = self.value(*a);
                    let mut full = Matrix::zeros(src.rows, src.cols);
                    for r in 0..g.rows {
                        full.row_mut(r)[*start..*start + g.cols].copy_from_slice(g.row(r));
                    }
                    send(*a, full);
                }
                Op::ScaleRows(a, w) => {
                    let (x, s) = (self.value(*a), self.value(*w));
                    let mut ga = g.clone();
                    let mut gw = Matrix::zeros(s.rows, 1);
                    for r in 0..g.rows {
                        let f = s.data[r];
                        ga.row_mut(r).iter_mut().for_each(|v| *v *= f);
                        gw.data[r] = g.row(r).iter().zip(x.row(r)).map(|(p, q)| p * q).sum();
                    }
                    send(*a, ga);
                    send(*w, gw);
                }
                Op::SegmentMean(a, segment, counts) => {
                    let mut ga = Matrix::zeros(segment.len(), g.cols);
                    for (r, &s) in segment.iter().enumerate() {
                        let c = counts[s] as f64;
                        for (d, &v) in ga.row_mut(r).iter_mut().zip(g.row(s)) {
                            *d = v / c;
                        }
                    }
                    send(*a, ga);
                }
                Op::PairConcat(a, pairs) => {
                    let src = self.value(*a);
                    let mut ga = Matrix::zeros(src.rows, src.cols);
                    for (k, &(u, v)) in pairs.iter().enumerate() {
                        let row = g.row(k);
                        for (d, &x) in ga.row_mut(u).iter_mut().zip(&row[..src.cols]) {
                            *d += x;
                        }
                        for (d, &x) in ga.row_mut(v).iter_mut().zip(&row[src.cols..]) {
                            *d += x;
                        }
                    }
                    send(*a, ga);
                }
                Op::SoftmaxRows(a) => {
                    let p = &node.value;
                    let mut ga = Matrix::zeros(p.rows, p.cols);
                    for r in 0..p.rows {
                        let (pr, gr) = (p.row(r), g.row(r));
                        let inner: f64 = pr.iter().zip(gr).map(|(x, y)| x * y).sum();
                        for (c, d) in ga.row_mut(r).iter_mut().enumerate() {
                            *d = pr[c] * (gr[c] - inner);
                        }
                    }
                    send(*a, ga);
                }
                Op::MseOneHot(p, labels) => {
                    let m = self.value(*p);
                    let scale = 2.0 * g.data[0] / (m.rows * m.cols) as f64;
                    let mut gp = Matrix::zeros(m.rows, m.cols);
                    for (r, &y) in labels.iter().enumerate() {
                        for (c, d) in gp.row_mut(r).iter_mut().enumerate() {
                            *d = scale * (m.at(r, c) - if c == y { 1.0 } else { 0.0 });
                        }
                    }
                    send(*p, gp);
                }
                Op::NllLogits(logits, labels) => {
                    let m = self.value(*logits);
                    let scale = g.data[0] / m.rows as f64;
                    let mut gl = Matrix::zeros(m.rows, m.cols);
                    for (r, &y) in labels.iter().enumerate() {
                        softmax_row(m.row(r), gl.row_mut(r));
                        gl.row_mut(r)[y] -= 1.0;
                        gl.row_mut(r).iter_mut().for_each(|v| *v *= scale);
                    }
                    send(*logits, gl);
                }
                Op::BceLogits(logits, labels) => {
                    let m = self.value(*logits);
                    let scale = g.data[0] / m.rows as f64;
                    let data = m.data.iter().zip(labels.iter()).map(|(&z, &y)| scale * (sigmoid(z) - y)).collect();
                    send(*logits, Matrix::from_vec(m.rows, 1, data));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central differences of `build` over every weight.
    fn numeric(build: &dyn Fn(&[f64]) -> f64, w: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        (0..w.len())
            .map(|i| {
                let mut p = w.to_vec();
                p[i] += h;
                let up = build(&p);
                p[i] -= 2.0 * h;
                (up - build(&p)) / (2.0 * h)
            })
            .collect()
    }

    fn check(build: impl Fn(&mut Tape, &[f64]) -> Var, w: &[f64]) {
        let mut tape = Tape::new();
        let loss = build(&mut tape, w);
        let analytic = tape.backward(loss, w.len());
        let value = |p: &[f64]| {
            let mut t = Tape::new();
            let l = build(&mut t, p);
            t.value(l).data[0]
        };
        let fd = numeric(&value, w);
        for (i, (a, n)) in analytic.iter().zip(&fd).enumerate() {
            assert!((a - n).abs() <= 1e-6 * (1.0 + n.abs()), "coord {i}: {a} vs {n}");
        }
    }

    fn weights(n: usize) -> Vec<f64> {
        (0..n).map(|i| ((i * 7919) % 97) as f64 / 48.5 - 1.0 + 0.013 * i as f64).collect()
    }

    #[test]
    fn dense_chain_matches_differences() {
        check(
            |t, w| {
                let x = t.param(w, 0, 3, 2);
                let a = t.param(w, 6, 2, 2);
                let b = t.param(w, 10, 1, 2);
                let h = t.matmul(x, a);
                let h = t.add_bias(h, b);
                let h = t.tanh(h);
                let s = t.sigmoid(h);
                let m = t.mul(h, s);
                let p = t.softmax_rows(m);
                t.mse_one_hot(p, Arc::new(vec![0, 1, 1]))
            },
            &weights(12),
        );
    }

    #[test]
    fn structural_ops_match_differences() {
        let adj = Arc::new(Csr::from_triplets(3, vec![(0, 0, 0.5), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 0.5), (2, 2, 1.0)]));
        check(
            move |t, w| {
                let x = t.param(w, 0, 3, 2);
                let y = t.param(w, 6, 3, 2);
                let z = t.sparse_matmul(adj.clone(), x);
                let m = t.max(&[z, y]);
                let s = t.sum(&[m, x]);
                let s = t.scale(s, 0.7);
                let c = t.concat_cols(&[s, y]);
                let c0 = t.slice_cols(c, 1, 1);
                let r = t.scale_rows(c, c0);
                let r = t.relu(r);
                let seg = t.segment_mean(r, Arc::new(vec![0, 1, 0]), 2);
                let nll = t.nll_logits(seg, Arc::new(vec![3, 1]));
                let pc = t.pair_concat(s, Arc::new(vec![(0, 2), (1, 1)]));
                let a = t.param(w, 12, 4, 1);
                let logit = t.matmul(pc, a);
                let bce = t.bce_logits(logit, Arc::new(vec![1.0, 0.0]));
                t.add(nll, bce)
            },
            &weights(16),
        );
    }

    #[test]
    fn losses_at_reference_points() {
        let mut t = Tape::new();
        let z = t.constant(Matrix::zeros(4, 3));
        let nll = t.nll_logits(z, Arc::new(vec![0, 1, 2, 0]));
        assert!((t.value(nll).data[0] - 3f64.ln()).abs() < 1e-15);
        let col = t.constant(Matrix::zeros(2, 1));
        let bce = t.bce_logits(col, Arc::new(vec![1.0, 0.0]));
        assert!((t.value(bce).data[0] - 2f64.ln()).abs() < 1e-15);
        let onehot = t.constant(Matrix::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]));
        let mse = t.mse_one_hot(onehot, Arc::new(vec![0, 1]));
        assert_eq!(t.value(mse).data[0], 0.0);
    }
}
