//! Lower-level loss/gradient oracle over the training split.

use std::sync::Arc;

use blmol_core::prefmoo::{BatchSelector, LossGrad, LossGradOracle, OracleError};
use blmol_core::RandomStream;

use crate::graph::{GraphBatch, MultiTaskDataset, Split};
use crate::model::{ComputationPlan, ModelError};

/// Serves task losses and gradients of one architecture.
///
/// Full-batch requests, and minibatch requests with a single batch per epoch,
/// use the whole training split. Otherwise each epoch shuffles the training
/// graphs with a stream derived from the run's stream and cuts them into
/// contiguous batches.
#[derive(Debug, Clone)]
pub struct SupernetOracle {
    plan: Arc<ComputationPlan>,
    dataset: Arc<MultiTaskDataset>,
    full: Arc<GraphBatch>,
    stream: RandomStream,
    epoch_cache: Option<(usize, usize, Vec<GraphBatch>)>,
}

fn to_oracle_error(e: ModelError) -> OracleError {
    match e {
        ModelError::Layout { .. } | ModelError::FeatureWidth { .. } => OracleError::Shape(e.to_string()),
        other => OracleError::Failed(other.to_string()),
    }
}

pub fn make_oracle(plan: Arc<ComputationPlan>, dataset: Arc<MultiTaskDataset>, train: Arc<GraphBatch>) -> SupernetOracle {
    SupernetOracle { plan, dataset, full: train, stream: RandomStream::root(0).derive("batches"), epoch_cache: None }
}

impl SupernetOracle {
    pub fn plan(&self) -> &Arc<ComputationPlan> {
        &self.plan
    }

    pub fn dataset(&self) -> &Arc<MultiTaskDataset> {
        &self.dataset
    }

    fn batch(&mut self, selector: BatchSelector) -> &GraphBatch {
        let (epoch, index, batches) = match selector {
            BatchSelector::Minibatch { epoch, batch, batches } if batches > 1 => (epoch, batch, batches),
            _ => return &self.full,
        };
        let stale = !matches!(&self.epoch_cache, Some((e, b, _)) if *e == epoch && *b == batches);
        if stale {
            let mut order = self.dataset.split(Split::Train).to_vec();
            self.stream.derive_index("epoch", epoch).shuffle(&mut order);
            let chunks = batches.min(order.len());
            let list = (0..chunks)
                .map(|c| {
                    let lo = c * order.len() / chunks;
                    let hi = (c + 1) * order.len() / chunks;
                    self.dataset.batch(&order[lo..hi])
                })
                .collect();
            self.epoch_cache = Some((epoch, batches, list));
        }
        let list = &self.epoch_cache.as_ref().expect("filled above").2;
        &list[index % list.len()]
    }
}

impl LossGradOracle<f64> for SupernetOracle {
    fn num_weights(&self) -> usize {
        self.plan.num_weights()
    }

    fn num_losses(&self) -> usize {
        self.plan.tasks().len()
    }

    fn initial_weights(&mut self, rng: &mut RandomStream) -> Vec<f64> {
        self.stream = rng.derive("batches");
        self.epoch_cache = None;
        self.plan.layout().initialize(rng)
    }

    fn eval(&mut self, weights: &[f64], selector: BatchSelector) -> Result<LossGrad<f64>, OracleError> {
        let plan = self.plan.clone();
        let batch = self.batch(selector);
        let (losses, grads) = plan.losses_and_grads(weights, batch).map_err(to_oracle_error)?;
        Ok(LossGrad { losses, grads })
    }
}
