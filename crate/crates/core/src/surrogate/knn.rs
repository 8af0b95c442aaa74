use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NearestNeighbors {
    k: usize,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
}

impl NearestNeighbors {
    pub fn fit(x: &[Vec<f64>], y: &[f64], k: usize) -> NearestNeighbors {
        NearestNeighbors { k: k.clamp(1, x.len()), inputs: x.to_vec(), targets: y.to_vec() }
    }

    /// Mean target of the `k` closest rows; equal distances resolve to the
    /// earlier row.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut d: Vec<(f64, usize)> = self
            .inputs
            .iter()
            .enumerate()
            .map(|(i, row)| (row.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        d[..self.k].iter().map(|&(_, i)| self.targets[i]).sum::<f64>() / self.k as f64
    }
}
