//! Run configuration: one JSON document, validated before any work starts.

use std::path::{Path, PathBuf};

use blmol_core::blmol::{PsmConfig, Targets, Variant};
use blmol_core::testbed::SyntheticBlConfig;
use blmol_core::EvolveConfig;
use blmol_supernet::{SbmConfig, SupernetConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// Environment variable naming the root directory of downloaded datasets.
pub const DATA_DIR_ENV: &str = "BLMOL_DATA_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    /// Number of sampled `(genotype, preference)` pairs.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub psm: PsmConfig,
    #[serde(default)]
    pub evolve: EvolveConfig,
    #[serde(default = "default_targets")]
    pub targets: Targets,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Trainings granted to random search; defaults to the sample count plus
    /// the realize budget.
    #[serde(default)]
    pub baseline_budget: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Hypervolume reference point in raw objective units, used by `report`.
    #[serde(default)]
    pub reference: Option<Vec<f64>>,
}

fn default_variant() -> Variant {
    Variant::Blmol
}

fn default_samples() -> usize {
    50
}

fn default_targets() -> Targets {
    Targets::TopK(10)
}

fn default_repeats() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemConfig {
    Testbed(SyntheticBlConfig),
    SupernetSynth(SynthProblem),
    SupernetTud(TudProblem),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthProblem {
    #[serde(default)]
    pub sbm: SbmConfig,
    /// Seed of the generated dataset, independent of the run seed.
    #[serde(default)]
    pub dataset_seed: u64,
    /// A dataset written by `gen-data`; replaces generation when set.
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default)]
    pub model: SupernetConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TudProblem {
    #[serde(default = "default_tud_name")]
    pub name: String,
    /// Dataset directory; falls back to `$BLMOL_DATA_DIR/<name>`.
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default)]
    pub model: SupernetConfig,
}

fn default_tud_name() -> String {
    "ENZYMES".into()
}

impl TudProblem {
    pub fn resolve_path(&self) -> CliResult<PathBuf> {
        if let Some(p) = &self.path {
            return Ok(p.clone());
        }
        match std::env::var_os(DATA_DIR_ENV) {
            Some(root) => Ok(PathBuf::from(root).join(&self.name)),
            None => Err(CliError::config(format!("problem.path: not set and {DATA_DIR_ENV} is unset"))),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let value: serde_json::Value = serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::config(format!("at `{}`: {}", e.path(), e.inner())))?;
        check_problem_section(&value)?;
        let config: RunConfig = serde_path_to_error::deserialize(value)
            .map_err(|e| CliError::config(format!("at `{}`: {}", e.path(), e.inner())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |field: &str, msg: &str| Err(CliError::config(format!("at `{field}`: {msg}")));
        if self.samples < 2 {
            return bad("samples", "need at least 2 samples");
        }
        if self.repeats == 0 {
            return bad("repeats", "must be positive");
        }
        if self.psm.kinds.is_empty() {
            return bad("psm.kinds", "must name at least one surrogate kind");
        }
        if self.psm.folds < 2 {
            return bad("psm.folds", "need at least 2 folds");
        }
        if let Err(e) = self.evolve.validate() {
            return bad("evolve", &e.to_string());
        }
        match &self.targets {
            Targets::TopK(0) => return bad("targets.top_k", "must be positive"),
            Targets::Preferences(d) if d.is_empty() => return bad("targets.preferences", "must not be empty"),
            _ => {}
        }
        if self.baseline_budget == Some(0) {
            return bad("baseline_budget", "must be positive");
        }
        if let Some(r) = &self.reference {
            if r.is_empty() || r.iter().any(|v| !v.is_finite()) {
                return bad("reference", "must be a non-empty list of finite numbers");
            }
        }
        match &self.problem {
            ProblemConfig::Testbed(c) => {
                if let Err(e) = c.train.validate() {
                    return bad("problem.train", &e.to_string());
                }
            }
            ProblemConfig::SupernetSynth(s) => {
                if let Err(e) = s.sbm.validate() {
                    return bad("problem.sbm", &e.to_string());
                }
                if let Err(e) = s.model.train.validate() {
                    return bad("problem.model.train", &e.to_string());
                }
            }
            ProblemConfig::SupernetTud(t) => {
                if let Err(e) = t.model.train.validate() {
                    return bad("problem.model.train", &e.to_string());
                }
            }
        }
        Ok(())
    }

    /// Hash of everything that influences results: the config with the
    /// output directory removed.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        sha256_hex(serde_json::to_string(&c).expect("config serializes").as_bytes())
    }

    /// Training budget of the random-search baseline.
    pub fn random_budget(&self) -> usize {
        self.baseline_budget.unwrap_or_else(|| {
            self.samples
                + self.repeats
                    * match &self.targets {
                        Targets::Preferences(d) => d.len(),
                        Targets::TopK(k) => *k,
                    }
        })
    }
}

/// Deserializes the selected problem variant on its own so that errors
/// carry the full path below `problem`.
fn check_problem_section(value: &serde_json::Value) -> CliResult<()> {
    let Some(mut section) = value.get("problem").and_then(|p| p.as_object()).cloned() else {
        return Ok(());
    };
    let Some(kind) = section.remove("kind") else {
        return Ok(());
    };
    let body = serde_json::Value::Object(section);
    let located = |e: serde_path_to_error::Error<serde_json::Error>| {
        CliError::config(format!("at `problem.{}`: {}", e.path(), e.inner()))
    };
    match kind.as_str() {
        Some("testbed") => serde_path_to_error::deserialize::<_, SyntheticBlConfig>(body).map(drop).map_err(located),
        Some("supernet-synth") => serde_path_to_error::deserialize::<_, SynthProblem>(body).map(drop).map_err(located),
        Some("supernet-tud") => serde_path_to_error::deserialize::<_, TudProblem>(body).map(drop).map_err(located),
        _ => Err(CliError::config(format!(
            "at `problem.kind`: unknown problem kind {kind}, expected testbed, supernet-synth or supernet-tud"
        ))),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::parse(r#"{"problem": {"kind": "testbed"}}"#).unwrap();
        assert_eq!(c.samples, 50);
        assert_eq!(c.evolve.population, 100);
        assert_eq!(c.evolve.generations, 500);
        assert_eq!(c.variant, Variant::Blmol);
        assert_eq!(c.targets, Targets::TopK(10));
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_path() {
        let e = RunConfig::parse(r#"{"problem": {"kind": "testbed"}, "sampels": 3}"#).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = RunConfig::parse(r#"{"problem": {"kind": "supernet-synth", "sbm": {"graphs": 10, "colour": 1}}}"#)
            .unwrap_err()
            .to_string();
        assert!(e.contains("problem.sbm") && e.contains("colour"), "{e}");
        let e = RunConfig::parse(r#"{"problem": {"kind": "testbed", "extra": 1}}"#).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let e = RunConfig::parse(r#"{"problem": {"kind": "testbed"}, "evolve": {"population": 1}}"#).unwrap_err();
        assert!(e.to_string().contains("evolve"), "{e}");
        let e = RunConfig::parse(r#"{"problem": {"kind": "testbed"}, "repeats": 0}"#).unwrap_err();
        assert!(e.to_string().contains("repeats"));
        assert!(RunConfig::parse(r#"{"problem": {"kind": "graph"}}"#).is_err());
    }

    #[test]
    fn hash_ignores_output_directory_only() {
        let a = RunConfig::parse(r#"{"problem": {"kind": "testbed"}, "seed": 1}"#).unwrap();
        let mut b = a.clone();
        b.out = Some("elsewhere".into());
        assert_eq!(a.hash(), b.hash());
        b.seed = Some(2);
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn random_budget_matches_the_pipeline() {
        let c = RunConfig::parse(r#"{"problem": {"kind": "testbed"}, "targets": {"top_k": 4}, "repeats": 2}"#).unwrap();
        assert_eq!(c.random_budget(), 58);
    }
}
