//! Weight updates from a combined gradient.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Gradient step rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Plain,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam_default() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Number of rejected steps tolerated over one training run.
pub const MAX_REJECTIONS: usize = 10;

/// Mutable optimizer state carried across steps of one run.
#[derive(Debug, Clone)]
pub struct DescentState<T> {
    pub lr: T,
    pub rejections: usize,
    step: u64,
    first: Vec<T>,
    second: Vec<T>,
}

impl<T: Scalar> DescentState<T> {
    pub fn new(lr: T, dim: usize) -> Self {
        Self { lr, rejections: 0, step: 0, first: vec![T::zero(); dim], second: vec![T::zero(); dim] }
    }

    /// Accepted steps so far.
    pub fn steps(&self) -> u64 {
        self.step
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StepError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("update stayed non-finite after {0} rejected steps")]
    NonFinite(usize),
}

/// Combined gradient `mu^T G`.
pub fn combine<T: Scalar>(mu: &[T], grads: &[Vec<T>]) -> Vec<T> {
    let n = grads.first().map_or(0, Vec::len);
    let mut d = vec![T::zero(); n];
    for (&m, g) in mu.iter().zip(grads) {
        for (di, &gi) in d.iter_mut().zip(g) {
            *di += m * gi;
        }
    }
    d
}

/// Applies one update. A non-finite candidate is rejected and the learning
/// rate halved; after [`MAX_REJECTIONS`] rejections in total the run fails.
pub fn descent_step<T: Scalar>(
    w: &[T],
    mu: &[T],
    grads: &[Vec<T>],
    optimizer: &Optimizer,
    state: &mut DescentState<T>,
) -> Result<Vec<T>, StepError> {
    if mu.len() != grads.len() {
        return Err(StepError::Shape(format!("{} coefficients for {} gradients", mu.len(), grads.len())));
    }
    if let Some(bad) = grads.iter().find(|g| g.len() != w.len()) {
        return Err(StepError::Shape(format!("gradient of length {} for {} weights", bad.len(), w.len())));
    }
    if state.first.len() != w.len() {
        return Err(StepError::Shape(format!("optimizer state sized {} for {} weights", state.first.len(), w.len())));
    }
    let d = combine(mu, grads);
    loop {
        let (candidate, moments) = propose(w, &d, optimizer, state);
        if candidate.iter().all(|v| v.is_finite()) {
            if let Some((m, v)) = moments {
                state.first = m;
                state.second = v;
            }
            state.step += 1;
            return Ok(candidate);
        }
        state.rejections += 1;
        state.lr = state.lr / T::lit(2.0);
        if state.rejections >= MAX_REJECTIONS {
            return Err(StepError::NonFinite(state.rejections));
        }
    }
}

type Moments<T> = Option<(Vec<T>, Vec<T>)>;

fn propose<T: Scalar>(w: &[T], d: &[T], optimizer: &Optimizer, state: &DescentState<T>) -> (Vec<T>, Moments<T>) {
    match *optimizer {
        Optimizer::Plain => (w.iter().zip(d).map(|(&wi, &di)| wi - state.lr * di).collect(), None),
        Optimizer::Adam { beta1, beta2, eps } => {
            let (b1, b2, eps) = (T::lit(beta1), T::lit(beta2), T::lit(eps));
            let t = (state.step + 1) as i32;
            let c1 = T::one() - b1.powi(t);
            let c2 = T::one() - b2.powi(t);
            let mut m = state.first.clone();
            let mut v = state.second.clone();
            let mut out = Vec::with_capacity(w.len());
            for i in 0..w.len() {
                m[i] = b1 * m[i] + (T::one() - b1) * d[i];
                v[i] = b2 * v[i] + (T::one() - b2) * d[i] * d[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                out.push(w[i] - state.lr * mh / (vh.sqrt() + eps));
            }
            (out, Some((m, v)))
        }
    }
}
