//! The multi-task topology search as a bi-level problem.

use std::sync::Arc;

use blmol_core::blmol::{BlProblem, Sense};
use blmol_core::lattice::binomial;
use blmol_core::prefmoo::{Optimizer, TrainConfig};
use blmol_core::vectors::PreferenceVector;
use blmol_core::{simplex_lattice, GenomeSpec, Genotype};
use serde::{Deserialize, Serialize};

use crate::genome::{genome_spec, Topology};
use crate::graph::{GraphBatch, MultiTaskDataset, Split, TaskSet};
use crate::model::{metrics, ComputationPlan, ModelConfig};
use crate::oracle::{make_oracle, SupernetOracle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SupernetConfig {
    pub depth: usize,
    pub hidden: usize,
    pub tasks: TaskSet,
    /// Size of the preference set; must be a simplex-lattice count for the
    /// number of tasks.
    pub rm: usize,
    pub train: TrainConfig,
}

impl Default for SupernetConfig {
    fn default() -> Self {
        Self {
            depth: 3,
            hidden: 16,
            tasks: TaskSet::all(),
            rm: 21,
            train: TrainConfig { optimizer: Optimizer::adam_default(), lr: 0.001, epochs: 100, ..TrainConfig::default() },
        }
    }
}

/// Evenly spread preferences over `m` tasks with exactly `rm` members.
pub fn preference_set(m: usize, rm: usize) -> Result<Vec<PreferenceVector<f64>>, String> {
    if m == 1 {
        return if rm == 1 { Ok(vec![PreferenceVector::uniform(1)]) } else { Err("a single task admits only rm = 1".into()) };
    }
    let mut valid = Vec::new();
    for h in 1.. {
        let count = binomial(h + m - 1, m - 1);
        if count == rm {
            return Ok(simplex_lattice(m, h));
        }
        valid.push(count);
        if count > rm {
            break;
        }
    }
    Err(format!("rm = {rm} is not a simplex-lattice size for {m} tasks; nearby sizes: {valid:?}"))
}

/// Bi-level problem over topology genomes; objectives are validation metrics
/// of the trained network, one per task.
#[derive(Debug)]
pub struct SupernetProblem {
    config: SupernetConfig,
    dataset: Arc<MultiTaskDataset>,
    spec: GenomeSpec,
    preferences: Vec<PreferenceVector<f64>>,
    train_batch: Arc<GraphBatch>,
    val_batch: Arc<GraphBatch>,
}

impl SupernetProblem {
    pub fn new(dataset: MultiTaskDataset, config: SupernetConfig) -> Result<Self, String> {
        dataset.validate().map_err(|e| e.to_string())?;
        if config.depth == 0 || config.hidden == 0 {
            return Err("depth and hidden width must be positive".into());
        }
        config.train.validate().map_err(|e| e.to_string())?;
        if dataset.split(Split::Train).is_empty() || dataset.split(Split::Val).is_empty() {
            return Err("training and validation splits must be non-empty".into());
        }
        let preferences = preference_set(config.tasks.len(), config.rm)?;
        let train_batch = Arc::new(dataset.batch(dataset.split(Split::Train)));
        let val_batch = Arc::new(dataset.batch(dataset.split(Split::Val)));
        if config.tasks.contains(crate::graph::Task::Link) && (train_batch.link_pairs.is_empty() || val_batch.link_pairs.is_empty()) {
            return Err("LP task needs link samples in the training and validation splits".into());
        }
        Ok(Self {
            spec: genome_spec(config.depth, config.rm),
            config,
            dataset: Arc::new(dataset),
            preferences,
            train_batch,
            val_batch,
        })
    }

    pub fn config(&self) -> &SupernetConfig {
        &self.config
    }

    pub fn dataset(&self) -> &Arc<MultiTaskDataset> {
        &self.dataset
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            hidden: self.config.hidden,
            feature_width: self.dataset.feature_width(),
            node_classes: self.dataset.node_classes,
            graph_classes: self.dataset.graph_classes,
            tasks: self.config.tasks.clone(),
        }
    }

    pub fn plan(&self, g: &Genotype) -> Result<ComputationPlan, String> {
        let topology = Topology::decode(self.config.depth, g).map_err(|e| e.to_string())?;
        Ok(ComputationPlan::new(topology, self.model_config()))
    }

    pub fn batch(&self, split: Split) -> Arc<GraphBatch> {
        match split {
            Split::Train => self.train_batch.clone(),
            Split::Val => self.val_batch.clone(),
            Split::Test => Arc::new(self.dataset.batch(self.dataset.split(Split::Test))),
        }
    }
}

impl BlProblem for SupernetProblem {
    type Oracle = SupernetOracle;

    fn genome_spec(&self) -> &GenomeSpec {
        &self.spec
    }

    fn preferences(&self) -> &[PreferenceVector<f64>] {
        &self.preferences
    }

    fn objective_names(&self) -> Vec<String> {
        self.config.tasks.tasks().iter().map(|t| t.metric_name().to_string()).collect()
    }

    fn senses(&self) -> Vec<Sense> {
        vec![Sense::Maximize; self.config.tasks.len()]
    }

    fn train_config(&self) -> &TrainConfig {
        &self.config.train
    }

    fn oracle(&self, g: &Genotype) -> Result<SupernetOracle, String> {
        let plan = Arc::new(self.plan(g)?);
        Ok(make_oracle(plan, self.dataset.clone(), self.train_batch.clone()))
    }

    fn evaluate(&self, _g: &Genotype, oracle: &mut SupernetOracle, weights: &[f64]) -> Result<Vec<f64>, String> {
        let plan = oracle.plan();
        let pred = plan.predict(weights, &self.val_batch).map_err(|e| e.to_string())?;
        metrics(&pred, &self.val_batch, plan.tasks()).map_err(|e| e.to_string())
    }
}
