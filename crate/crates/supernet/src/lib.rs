//! Multi-task graph supernet with a searchable skip topology and fusion
//! operations, trained by reverse-mode differentiation.
//!
//! A [`Topology`] decoded from a genome selects which earlier representations
//! each block reads and how they are fused. [`ComputationPlan`] binds it to a
//! flat weight vector and runs GCN aggregation followed by graph, node and
//! link heads. [`SupernetProblem`] exposes the whole search as a bi-level
//! problem for the pipeline in `blmol_core::blmol`.

pub mod check;
pub mod genome;
pub mod graph;
pub mod model;
pub mod oracle;
pub mod problem;
pub mod synth;
pub mod tape;
pub mod tensor;
pub mod tudataset;

pub use check::{finite_difference_check, FdReport};
pub use genome::{encoding_length, genome_spec, Fusion, Topology};
pub use graph::{DataError, GraphBatch, GraphData, MultiTaskDataset, Split, Task, TaskSet};
pub use model::{metrics, ComputationPlan, ModelConfig, Predictions, WeightLayout};
pub use oracle::{make_oracle, SupernetOracle};
pub use problem::{preference_set, SupernetConfig, SupernetProblem};
pub use synth::{synth_dataset, SbmConfig};
pub use tudataset::{parse_tudataset, DatasetSummary};
