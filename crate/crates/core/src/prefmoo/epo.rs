//! Combination coefficients for one lower-level gradient step.

use serde::{Deserialize, Serialize};

use super::lp::{maximize_on_simplex, min_norm_coefficients, HalfSpace};
use crate::scalar::{dot, Scalar};
use crate::vectors::PreferenceVector;

/// Losses below this value are raised to it before any log or ratio.
pub const LOSS_FLOOR: f64 = 1e-12;

/// Default on-ray tolerance for the nonuniformity measure.
pub const DEFAULT_EPS_TRACK: f64 = 1e-4;

/// Which regime produced a coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    /// Coefficients fixed by the preference (ls, ws).
    Fixed,
    /// Moving toward the preference ray.
    Balance,
    /// On the ray, descending all losses together.
    Descent,
    /// Zero gradients; nothing to combine.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients<T> {
    pub mu: Vec<T>,
    pub mode: StepMode,
    /// Set when the returned coefficients certify Pareto stationarity
    /// (min-norm point with zero norm) or the gradients vanish.
    pub stationary: bool,
}

/// Tunables for [`epo_coefficients`].
#[derive(Debug, Clone, Copy)]
pub struct EpoOptions<T> {
    pub eps_track: T,
    /// Step length of a plain gradient step. When present, balance steps
    /// take the largest move toward the ray whose linearized update does not
    /// carry the worst weighted loss past another one. Without it, each
    /// non-worst loss is held to its anchored rate of change.
    pub lookahead: Option<T>,
}

impl<T: Scalar> Default for EpoOptions<T> {
    fn default() -> Self {
        Self { eps_track: T::lit(DEFAULT_EPS_TRACK), lookahead: None }
    }
}

/// Linear scalarization: the coefficients are the preference itself.
pub fn ls_coefficients<T: Scalar>(r: &PreferenceVector<T>) -> Vec<T> {
    r.values().to_vec()
}

/// Uniform weights over `m` losses.
pub fn ws_coefficients<T: Scalar>(m: usize) -> Vec<T> {
    vec![T::one() / T::from_count(m); m]
}

fn weighted_losses<T: Scalar>(losses: &[T], r: &[T]) -> Vec<T> {
    let floor = T::lit(LOSS_FLOOR);
    losses.iter().zip(r).map(|(&f, &ri)| ri * f.max(floor)).collect()
}

/// KL divergence of the normalized weighted losses from uniform.
///
/// Zero exactly when every `r_j F_j` is equal. Losses are floored at
/// [`LOSS_FLOOR`] first.
pub fn nonuniformity<T: Scalar>(losses: &[T], r: &PreferenceVector<T>) -> T {
    assert_eq!(losses.len(), r.len(), "loss and preference lengths differ");
    let rl = weighted_losses(losses, r.values());
    let total: T = rl.iter().copied().sum();
    let m = T::from_count(rl.len());
    rl.iter()
        .map(|&v| {
            let p = v / total;
            p * (m * p).ln()
        })
        .sum::<T>()
        .max(T::zero())
}

/// Gradient of [`nonuniformity`] with respect to the losses (before flooring).
pub fn nonuniformity_loss_gradient<T: Scalar>(losses: &[T], r: &PreferenceVector<T>) -> Vec<T> {
    let rl = weighted_losses(losses, r.values());
    let total: T = rl.iter().copied().sum();
    let mu = nonuniformity(losses, r);
    let m = T::from_count(rl.len());
    rl.iter()
        .zip(r.values())
        .map(|(&v, &ri)| ri / total * ((m * v / total).ln() - mu))
        .collect()
}

fn gram<T: Scalar>(grads: &[Vec<T>]) -> Vec<T> {
    let m = grads.len();
    let mut c = vec![T::zero(); m * m];
    for i in 0..m {
        for j in i..m {
            let v = dot(&grads[i], &grads[j]);
            c[i * m + j] = v;
            c[j * m + i] = v;
        }
    }
    c
}

fn row<T: Scalar>(c: &[T], m: usize, j: usize) -> Vec<T> {
    c[j * m..(j + 1) * m].to_vec()
}

fn min_norm<T: Scalar>(c: &[T], m: usize, mode: StepMode) -> Coefficients<T> {
    let mu = min_norm_coefficients(c, m);
    let mut sq = T::zero();
    for i in 0..m {
        for j in 0..m {
            sq += mu[i] * c[i * m + j] * mu[j];
        }
    }
    let scale = (0..m).map(|i| c[i * m + i]).fold(T::zero(), T::max);
    Coefficients { mu, mode, stationary: sq <= T::lit(1e-20) * scale.max(T::lit(1e-300)) }
}

/// Exact-Pareto coefficients.
///
/// Off the preference ray (nonuniformity above `eps_track`) the step
/// direction `d = mu^T G` decreases nonuniformity to first order while
/// never increasing any worst weighted loss. On the ray, `d` is a common
/// descent direction if one exists, otherwise the min-norm coefficients are
/// returned with `stationary` set.
pub fn epo_coefficients<T: Scalar>(
    losses: &[T],
    grads: &[Vec<T>],
    r: &PreferenceVector<T>,
    options: EpoOptions<T>,
) -> Coefficients<T> {
    let m = losses.len();
    assert_eq!(grads.len(), m, "one gradient row per loss");
    assert_eq!(r.len(), m, "preference length must match loss count");
    if m == 1 {
        let stationary = grads[0].iter().all(|g| *g == T::zero());
        let mode = if stationary { StepMode::Degenerate } else { StepMode::Descent };
        return Coefficients { mu: vec![T::one()], mode, stationary };
    }
    if grads.iter().all(|g| g.iter().all(|v| *v == T::zero())) {
        return Coefficients { mu: r.values().to_vec(), mode: StepMode::Degenerate, stationary: true };
    }

    let c = gram(grads);
    let mu_r = nonuniformity(losses, r);
    if mu_r > options.eps_track {
        balance(losses, &c, r, mu_r, options.lookahead)
    } else {
        descent(&c, m)
    }
}

fn balance<T: Scalar>(
    losses: &[T],
    c: &[T],
    r: &PreferenceVector<T>,
    mu_r: T,
    lookahead: Option<T>,
) -> Coefficients<T> {
    let m = losses.len();
    let rv = r.values();
    let rl = weighted_losses(losses, rv);
    let total: T = rl.iter().copied().sum();
    let mt = T::from_count(m);
    let anchor: Vec<T> = rl.iter().zip(rv).map(|(&v, &ri)| ri * ((mt * v / total).ln() - mu_r)).collect();
    let ca: Vec<T> = (0..m).map(|j| dot(&row(c, m, j), &anchor)).collect();

    let top = rl.iter().copied().fold(T::neg_infinity(), T::max);
    let worst: Vec<usize> = (0..m).filter(|&j| rl[j] >= top * (T::one() - T::lit(1e-12))).collect();
    let lead = worst[0];

    // worst weighted losses must not ascend
    let mut core: Vec<HalfSpace<T>> =
        worst.iter().map(|&j| HalfSpace { coeffs: row(c, m, j), bound: T::zero() }).collect();
    // first-order decrease of nonuniformity
    core.push(HalfSpace { coeffs: ca.clone(), bound: T::zero() });

    let mut anchored = Vec::new();
    let any_positive = ca.iter().any(|&v| v > T::zero());
    for j in 0..m {
        if worst.contains(&j) {
            continue;
        }
        if !any_positive {
            anchored.push(HalfSpace { coeffs: row(c, m, j), bound: T::zero() });
        } else if ca[j] <= T::zero() {
            anchored.push(HalfSpace { coeffs: row(c, m, j), bound: ca[j] });
        }
    }

    let mut guard = Vec::new();
    if let Some(eta) = lookahead {
        // r_lead (F_lead - eta (C alpha)_lead) >= r_j (F_j - eta (C alpha)_j)
        let lead_row = row(c, m, lead);
        for j in 0..m {
            if worst.contains(&j) {
                continue;
            }
            let coeffs: Vec<T> =
                (0..m).map(|k| eta * (rv[j] * c[j * m + k] - rv[lead] * lead_row[k])).collect();
            guard.push(HalfSpace { coeffs, bound: rl[j] - rl[lead] });
        }
    }

    let mut attempts = Vec::with_capacity(3);
    if lookahead.is_some() {
        attempts.push([core.clone(), guard].concat());
    }
    attempts.push([core.clone(), anchored].concat());
    attempts.push(core);
    for constraints in attempts.iter() {
        if let Some(mu) = maximize_on_simplex(&ca, constraints) {
            return Coefficients { mu, mode: StepMode::Balance, stationary: false };
        }
    }
    // No step approaches the ray without raising a worst loss: improve all
    // losses instead, or certify stationarity.
    descent(c, m)
}

fn descent<T: Scalar>(c: &[T], m: usize) -> Coefficients<T> {
    let objective: Vec<T> = (0..m).map(|k| (0..m).map(|j| c[j * m + k]).sum()).collect();
    let constraints: Vec<HalfSpace<T>> =
        (0..m).map(|j| HalfSpace { coeffs: row(c, m, j), bound: T::zero() }).collect();
    let scale = (0..m).map(|i| c[i * m + i]).fold(T::zero(), T::max);
    if let Some(mu) = maximize_on_simplex(&objective, &constraints) {
        let value = dot(&objective, &mu);
        if value > T::lit(1e-12) * scale {
            return Coefficients { mu, mode: StepMode::Descent, stationary: false };
        }
    }
    min_norm(c, m, StepMode::Descent)
}
