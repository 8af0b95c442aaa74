use blmol_core::testbed::{synthetic_bl, SyntheticBl};
use blmol_core::RandomStream;
use blmol_supernet::{parse_tudataset, synth_dataset, MultiTaskDataset, SbmConfig, SupernetProblem};

use crate::config::{sha256_hex, ProblemConfig};
use crate::error::{CliError, CliResult};

/// A constructed problem of any supported kind.
pub enum Instance {
    Testbed(SyntheticBl),
    Supernet(Box<SupernetProblem>),
}

/// Evaluates `$body` with `$p` bound to the concrete problem.
macro_rules! with_problem {
    ($instance:expr, $p:ident => $body:expr) => {
        match $instance {
            $crate::problem::Instance::Testbed($p) => $body,
            $crate::problem::Instance::Supernet(boxed) => {
                let $p: &blmol_supernet::SupernetProblem = boxed;
                $body
            }
        }
    };
}
pub(crate) use with_problem;

/// Stream a synthetic dataset is generated from.
pub fn dataset_stream(seed: u64) -> RandomStream {
    RandomStream::root(seed).derive("data")
}

pub fn generate_dataset(sbm: &SbmConfig, seed: u64) -> CliResult<MultiTaskDataset> {
    synth_dataset(sbm, &dataset_stream(seed)).map_err(|e| CliError::config(format!("at `problem.sbm`: {e}")))
}

fn load_dataset(config: &ProblemConfig) -> CliResult<Option<MultiTaskDataset>> {
    Ok(match config {
        ProblemConfig::Testbed(_) => None,
        ProblemConfig::SupernetSynth(s) => Some(match &s.dataset {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::config(format!("at `problem.dataset`: {}: {e}", path.display())))?;
                MultiTaskDataset::from_json(&text)
                    .map_err(|e| CliError::config(format!("at `problem.dataset`: {}: {e}", path.display())))?
            }
            None => generate_dataset(&s.sbm, s.dataset_seed)?,
        }),
        ProblemConfig::SupernetTud(t) => {
            let dir = t.resolve_path()?;
            let ds = parse_tudataset(&dir, &dataset_stream(t.split_seed))
                .map_err(|e| CliError::config(format!("at `problem.path`: {}: {e}", dir.display())))?;
            Some(ds)
        }
    })
}

/// Builds the problem and its content hash. The hash covers the problem
/// section of the config and, for graph problems, the dataset itself.
pub fn instantiate(config: &ProblemConfig) -> CliResult<(Instance, String)> {
    let mut identity = serde_json::to_string(config).expect("problem config serializes");
    let instance = match (config, load_dataset(config)?) {
        (ProblemConfig::Testbed(c), _) => Instance::Testbed(
            synthetic_bl(c.clone()).map_err(|e| CliError::config(format!("at `problem`: {e}")))?,
        ),
        (ProblemConfig::SupernetSynth(s), Some(ds)) => {
            identity.push('\n');
            identity.push_str(&ds.to_json());
            supernet(ds, s.model.clone())?
        }
        (ProblemConfig::SupernetTud(t), Some(ds)) => {
            identity.push('\n');
            identity.push_str(&ds.to_json());
            supernet(ds, t.model.clone())?
        }
        _ => unreachable!("graph problems always load a dataset"),
    };
    Ok((instance, sha256_hex(identity.as_bytes())))
}

fn supernet(ds: MultiTaskDataset, model: blmol_supernet::SupernetConfig) -> CliResult<Instance> {
    SupernetProblem::new(ds, model)
        .map(|p| Instance::Supernet(Box::new(p)))
        .map_err(|e| CliError::config(format!("at `problem.model`: {e}")))
}
