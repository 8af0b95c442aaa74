//! Preference-conditioned lower-level training.
//!
//! A [`LossGradOracle`] exposes a vector of losses and their gradients. Each
//! training step turns them into combination coefficients (linear
//! scalarization, uniform weights, or exact-Pareto balancing) and applies a
//! gradient update.

mod epo;
mod lp;
mod optimizer;

pub use epo::{
    epo_coefficients, ls_coefficients, nonuniformity, nonuniformity_loss_gradient, ws_coefficients, Coefficients,
    EpoOptions, StepMode, DEFAULT_EPS_TRACK, LOSS_FLOOR,
};
pub use lp::{maximize_on_simplex, min_norm_coefficients, HalfSpace};
pub use optimizer::{combine, descent_step, DescentState, Optimizer, StepError, MAX_REJECTIONS};

use serde::{Deserialize, Serialize};

use crate::rng::RandomStream;
use crate::scalar::Scalar;
use crate::vectors::PreferenceVector;

/// Which data an oracle should evaluate on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSelector {
    /// Every training example.
    Full,
    /// Minibatch `batch` of `batches` in epoch `epoch`.
    Minibatch { epoch: usize, batch: usize, batches: usize },
}

/// Losses and per-loss gradients at one weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad<T> {
    pub losses: Vec<T>,
    /// One row per loss, each of the weight dimension.
    pub grads: Vec<Vec<T>>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("loss {index} is not finite")]
    NonFinite { index: usize },
    #[error("oracle shape error: {0}")]
    Shape(String),
    #[error("{0}")]
    Failed(String),
}

/// Source of lower-level losses and gradients.
pub trait LossGradOracle<T: Scalar> {
    fn num_weights(&self) -> usize;
    fn num_losses(&self) -> usize;
    fn initial_weights(&mut self, rng: &mut RandomStream) -> Vec<T>;
    fn eval(&mut self, weights: &[T], batch: BatchSelector) -> Result<LossGrad<T>, OracleError>;
}

/// Coefficient rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solver {
    Ls,
    Epo,
    Ws,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub optimizer: Optimizer,
    pub lr: f64,
    pub epochs: usize,
    pub batches_per_epoch: usize,
    pub solver: Solver,
    #[serde(default = "default_eps_track")]
    pub eps_track: f64,
}

fn default_eps_track() -> f64 {
    DEFAULT_EPS_TRACK
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: Optimizer::adam_default(),
            lr: 0.001,
            epochs: 100,
            batches_per_epoch: 1,
            solver: Solver::Epo,
            eps_track: DEFAULT_EPS_TRACK,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("step {step}: {source}")]
    Step { step: usize, source: StepError },
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs < 1 {
            return Err(TrainError::Config("epochs must be at least 1".into()));
        }
        if self.batches_per_epoch < 1 {
            return Err(TrainError::Config("batches_per_epoch must be at least 1".into()));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(TrainError::Config(format!("lr must be positive and finite, got {}", self.lr)));
        }
        if !(self.eps_track.is_finite() && self.eps_track >= 0.0) {
            return Err(TrainError::Config(format!("eps_track must be non-negative, got {}", self.eps_track)));
        }
        if let Optimizer::Adam { beta1, beta2, eps } = self.optimizer {
            let unit = 0.0..1.0;
            if !unit.contains(&beta1) || !unit.contains(&beta2) || !(eps > 0.0) {
                return Err(TrainError::Config("adam needs betas in [0, 1) and eps > 0".into()));
            }
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        self.epochs * self.batches_per_epoch
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<T> {
    pub losses: Vec<T>,
    pub mu: Vec<T>,
    pub nonuniformity: T,
    pub mode: StepMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTrace<T> {
    pub records: Vec<StepRecord<T>>,
    pub final_weights: Vec<T>,
    pub rejections: usize,
}

/// Coefficients for one step under `solver`.
pub fn coefficients<T: Scalar>(
    solver: Solver,
    losses: &[T],
    grads: &[Vec<T>],
    r: &PreferenceVector<T>,
    options: EpoOptions<T>,
) -> Coefficients<T> {
    match solver {
        Solver::Ls => Coefficients { mu: ls_coefficients(r), mode: StepMode::Fixed, stationary: false },
        Solver::Ws => Coefficients { mu: ws_coefficients(losses.len()), mode: StepMode::Fixed, stationary: false },
        Solver::Epo => epo_coefficients(losses, grads, r, options),
    }
}

fn check_shape<T: Scalar>(lg: &LossGrad<T>, m: usize, n: usize) -> Result<(), OracleError> {
    if lg.losses.len() != m || lg.grads.len() != m {
        return Err(OracleError::Shape(format!(
            "expected {m} losses, got {} losses and {} gradient rows",
            lg.losses.len(),
            lg.grads.len()
        )));
    }
    if let Some(row) = lg.grads.iter().find(|g| g.len() != n) {
        return Err(OracleError::Shape(format!("gradient row of length {} for {n} weights", row.len())));
    }
    if let Some(index) = lg.losses.iter().position(|v| !v.is_finite()) {
        return Err(OracleError::NonFinite { index });
    }
    Ok(())
}

/// Trains from the oracle's initial weights for `epochs x batches_per_epoch`
/// steps.
pub fn train_preference<T: Scalar, O: LossGradOracle<T> + ?Sized>(
    oracle: &mut O,
    r: &PreferenceVector<T>,
    config: &TrainConfig,
    rng: &mut RandomStream,
) -> Result<(Vec<T>, TrainTrace<T>), TrainError> {
    let w0 = oracle.initial_weights(rng);
    train_from(oracle, w0, r, config)
}

/// Same as [`train_preference`] starting from the given weights.
pub fn train_from<T: Scalar, O: LossGradOracle<T> + ?Sized>(
    oracle: &mut O,
    initial: Vec<T>,
    r: &PreferenceVector<T>,
    config: &TrainConfig,
) -> Result<(Vec<T>, TrainTrace<T>), TrainError> {
    config.validate()?;
    let (m, n) = (oracle.num_losses(), oracle.num_weights());
    if r.len() != m {
        return Err(TrainError::Config(format!("preference has {} entries for {m} losses", r.len())));
    }
    if initial.len() != n {
        return Err(TrainError::Config(format!("initial weights have length {} for {n}", initial.len())));
    }
    let mut state = DescentState::new(T::lit(config.lr), n);
    let mut w = initial;
    let mut records = Vec::with_capacity(config.steps());
    for epoch in 0..config.epochs {
        for batch in 0..config.batches_per_epoch {
            let step = records.len();
            let selector = BatchSelector::Minibatch { epoch, batch, batches: config.batches_per_epoch };
            let lg = oracle.eval(&w, selector)?;
            check_shape(&lg, m, n)?;
            let options = EpoOptions {
                eps_track: T::lit(config.eps_track),
                lookahead: matches!(config.optimizer, Optimizer::Plain).then_some(state.lr),
            };
            let coef = coefficients(config.solver, &lg.losses, &lg.grads, r, options);
            w = descent_step(&w, &coef.mu, &lg.grads, &config.optimizer, &mut state)
                .map_err(|source| TrainError::Step { step, source })?;
            records.push(StepRecord {
                nonuniformity: nonuniformity(&lg.losses, r),
                losses: lg.losses,
                mu: coef.mu,
                mode: coef.mode,
            });
        }
    }
    let trace = TrainTrace { records, final_weights: w.clone(), rejections: state.rejections };
    Ok((w, trace))
}

/// Result of a central finite-difference check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    /// Largest per-loss relative error `|fd - g| / max(|fd| + |g|, floor)`,
    /// with norms taken over the checked coordinates.
    pub max_relative_error: f64,
    pub worst_loss: usize,
}

/// Compares the oracle's full-batch gradients with central differences at
/// `w` over the listed coordinates (all when `coords` is `None`).
pub fn gradient_check<O: LossGradOracle<f64> + ?Sized>(
    oracle: &mut O,
    w: &[f64],
    step: f64,
    coords: Option<&[usize]>,
) -> Result<GradientCheck, OracleError> {
    let all: Vec<usize>;
    let coords = match coords {
        Some(c) => c,
        None => {
            all = (0..w.len()).collect();
            &all
        }
    };
    let base = oracle.eval(w, BatchSelector::Full)?;
    let m = base.losses.len();
    let mut diff = vec![0.0; m];
    let mut scale = vec![0.0; m];
    let mut probe = w.to_vec();
    for &k in coords {
        probe[k] = w[k] + step;
        let up = oracle.eval(&probe, BatchSelector::Full)?.losses;
        probe[k] = w[k] - step;
        let down = oracle.eval(&probe, BatchSelector::Full)?.losses;
        probe[k] = w[k];
        for j in 0..m {
            let fd = (up[j] - down[j]) / (2.0 * step);
            let g = base.grads[j][k];
            diff[j] += (fd - g) * (fd - g);
            scale[j] += fd * fd + g * g;
        }
    }
    let mut out = GradientCheck { max_relative_error: 0.0, worst_loss: 0 };
    for j in 0..m {
        let rel = diff[j].sqrt() / scale[j].sqrt().max(1e-10);
        if rel > out.max_relative_error {
            out = GradientCheck { max_relative_error: rel, worst_loss: j };
        }
    }
    Ok(out)
}
