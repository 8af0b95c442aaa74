//! Bi-level multi-objective learning.
//!
//! The upper level searches genotypes (architecture genes plus a preference
//! index) with NSGA-II against surrogate models; the lower level trains
//! weights for each `(genotype, preference)` pair to the exact Pareto point
//! selected by the preference.
//!
//! The numeric building blocks are generic over [`Scalar`] (`f32`/`f64`); the
//! aliases below fix them to `f64`, which is what the pipeline uses.

pub mod blmol;
pub mod evolve;
pub mod hypervolume;
pub mod lattice;
pub mod numfmt;
pub mod pareto;
pub mod prefmoo;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod surrogate;
pub mod testbed;
pub mod vectors;

pub use evolve::{EvolveConfig, GeneKind, GeneSpec, GenomeSpec, Genotype};
pub use hypervolume::hypervolume;
pub use lattice::simplex_lattice;
pub use pareto::{crowding_distance, dominates, non_dominated_sort};
pub use prefmoo::{train_preference, LossGradOracle, Solver, TrainConfig};
pub use rng::{derive_stream, RandomStream};
pub use scalar::Scalar;
pub use stats::{kendall_tau, mse, spearman};

pub type ObjectiveVector = vectors::ObjectiveVector<f64>;
pub type PreferenceVector = vectors::PreferenceVector<f64>;
pub type ParetoArchive = pareto::ParetoArchive<Genotype, f64>;
