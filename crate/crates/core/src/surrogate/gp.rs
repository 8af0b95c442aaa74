use serde::{Deserialize, Serialize};

/// Diagonal jitter relative to the signal variance.
pub const BASE_JITTER: f64 = 1e-8;
/// Each failed factorization multiplies the jitter by ten, at most this often.
pub const JITTER_ESCALATIONS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianProcess {
    inputs: Vec<Vec<f64>>,
    weights: Vec<f64>,
    offset: f64,
    length_scale: f64,
    signal_variance: f64,
    pub jitter: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn cholesky(k: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = k[i * n + j];
            for p in 0..j {
                s -= l[i * n + p] * l[j * n + p];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut z = b.to_vec();
    for i in 0..n {
        for p in 0..i {
            z[i] -= l[i * n + p] * z[p];
        }
        z[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for p in i + 1..n {
            z[i] -= l[p * n + i] * z[p];
        }
        z[i] /= l[i * n + i];
    }
    z
}

impl GaussianProcess {
    fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        self.signal_variance * (-sq_dist(a, b) / (2.0 * self.length_scale * self.length_scale)).exp()
    }

    pub fn fit(x: &[Vec<f64>], y: &[f64]) -> Result<GaussianProcess, String> {
        let n = x.len();
        let offset = y.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = y.iter().map(|v| v - offset).collect();
        let var = centered.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let signal_variance = if var > 0.0 { var } else { 1.0 };

        let mut dists: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                let d = sq_dist(&x[i], &x[j]).sqrt();
                if d > 0.0 {
                    dists.push(d);
                }
            }
        }
        let length_scale = crate::stats::median(&dists).unwrap_or(1.0);

        let mut gp = GaussianProcess {
            inputs: x.to_vec(),
            weights: Vec::new(),
            offset,
            length_scale,
            signal_variance,
            jitter: BASE_JITTER * signal_variance,
        };
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                k[i * n + j] = gp.kernel(&x[i], &x[j]);
            }
        }
        for attempt in 0..=JITTER_ESCALATIONS {
            let mut kj = k.clone();
            for i in 0..n {
                kj[i * n + i] += gp.jitter;
            }
            if let Some(l) = cholesky(&kj, n) {
                gp.weights = cholesky_solve(&l, n, &centered);
                return Ok(gp);
            }
            if attempt < JITTER_ESCALATIONS {
                gp.jitter *= 10.0;
            }
        }
        Err(format!("kernel matrix not positive definite with jitter {:e}", gp.jitter))
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.offset + self.inputs.iter().zip(&self.weights).map(|(xi, w)| w * self.kernel(xi, x)).sum::<f64>()
    }
}
