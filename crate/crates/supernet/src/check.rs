//! Central finite-difference checks of the task gradients.

use crate::graph::GraphBatch;
use crate::model::{ComputationPlan, ModelError};

/// Worst per-task relative error between analytic and numerical gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    /// `‖fd − g‖ / max(‖(fd, g)‖, 1e-10)` per task, over the checked coordinates.
    pub relative_error: Vec<f64>,
    /// Coordinates where the first step straddled a kink and a smaller step
    /// was used.
    pub refined: Vec<usize>,
}

impl FdReport {
    pub fn max_error(&self) -> f64 {
        self.relative_error.iter().copied().fold(0.0, f64::max)
    }
}

/// Checks the gradients at `coords` with central differences of size `step`.
///
/// The network is piecewise smooth (ReLU, MAX), so a stencil can straddle a
/// kink. A coordinate whose central difference disagrees with the analytic
/// value by more than `1e-6 (1 + |g|)` is re-measured with steps 10 and 100
/// times smaller and the closest estimate is kept.
pub fn finite_difference_check(
    plan: &ComputationPlan,
    weights: &[f64],
    batch: &GraphBatch,
    coords: &[usize],
    step: f64,
) -> Result<FdReport, ModelError> {
    let (_, grads) = plan.losses_and_grads(weights, batch)?;
    let m = grads.len();
    let mut w = weights.to_vec();
    let mut central = |i: usize, h: f64| -> Result<Vec<f64>, ModelError> {
        let orig = w[i];
        w[i] = orig + h;
        let up = plan.losses(&w, batch)?;
        w[i] = orig - h;
        let down = plan.losses(&w, batch)?;
        w[i] = orig;
        Ok(up.iter().zip(&down).map(|(a, b)| (a - b) / (2.0 * h)).collect())
    };
    let mut diff = vec![0.0; m];
    let mut norm = vec![0.0; m];
    let mut refined = Vec::new();
    for &i in coords {
        let mut fd = central(i, step)?;
        let off = |fd: &[f64], t: usize| (fd[t] - grads[t][i]).abs() > 1e-6 * (1.0 + grads[t][i].abs());
        if (0..m).any(|t| off(&fd, t)) {
            refined.push(i);
            for h in [step / 10.0, step / 100.0] {
                let alt = central(i, h)?;
                for t in 0..m {
                    if (alt[t] - grads[t][i]).abs() < (fd[t] - grads[t][i]).abs() {
                        fd[t] = alt[t];
                    }
                }
            }
        }
        for t in 0..m {
            let g = grads[t][i];
            diff[t] += (fd[t] - g).powi(2);
            norm[t] += fd[t] * fd[t] + g * g;
        }
    }
    let relative_error = diff.iter().zip(&norm).map(|(d, n)| d.sqrt() / n.sqrt().max(1e-10)).collect();
    Ok(FdReport { relative_error, refined })
}
