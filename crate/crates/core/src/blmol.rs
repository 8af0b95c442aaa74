//! Surrogate-assisted bi-level search.
//!
//! A [`BlProblem`] pairs an upper-level genome (ending in a preference index
//! gene) with a lower-level training problem. The pipeline samples
//! `(genotype, preference)` pairs and trains each one, fits one surrogate per
//! upper-level objective, runs NSGA-II on the surrogates, and retrains
//! selected archive members to obtain their true objectives.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::evolve::{nsga2_run, EvolveConfig, EvolveError, GeneKind, GenomeSpec, Genotype};
use crate::pareto::non_dominated_sort;
use crate::prefmoo::{train_preference, LossGradOracle, Solver, TrainConfig, TrainError};
use crate::rng::RandomStream;
use crate::stats::{mean, std_dev};
use crate::surrogate::{select_best, InputEncoder, SampleTable, Selection, SurrogateError, SurrogateKind, SurrogateParams};
use crate::vectors::{ObjectiveVector, PreferenceVector, VectorError};

/// Direction of an upper-level objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Minimize,
    Maximize,
}

impl Sense {
    /// Value in minimization form.
    pub fn to_min(self, v: f64) -> f64 {
        match self {
            Sense::Minimize => v,
            Sense::Maximize => -v,
        }
    }
}

/// Converts raw objective values to minimization form.
pub fn minimized(senses: &[Sense], raw: &[f64]) -> Vec<f64> {
    senses.iter().zip(raw).map(|(s, &v)| s.to_min(v)).collect()
}

/// A bi-level problem: genome layout, preference set, lower-level oracle
/// factory and upper-level evaluation.
///
/// The last gene of the genome must be the preference index gene.
pub trait BlProblem: Sync {
    type Oracle: LossGradOracle<f64>;

    fn genome_spec(&self) -> &GenomeSpec;
    fn preferences(&self) -> &[PreferenceVector<f64>];
    fn objective_names(&self) -> Vec<String>;
    fn senses(&self) -> Vec<Sense>;
    fn train_config(&self) -> &TrainConfig;
    fn oracle(&self, genotype: &Genotype) -> Result<Self::Oracle, String>;
    /// Raw upper-level objective values of trained weights.
    fn evaluate(&self, genotype: &Genotype, oracle: &mut Self::Oracle, weights: &[f64]) -> Result<Vec<f64>, String>;

    fn num_objectives(&self) -> usize {
        self.senses().len()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BlmolError {
    #[error("problem definition: {0}")]
    Problem(String),
    #[error("genotype {genotype}: {message}")]
    Training { genotype: Genotype, message: String },
    #[error("{invalid} of {total} training runs failed, above the 20% limit; first failure: {first}")]
    TooManyInvalid { invalid: usize, total: usize, first: String },
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Evolve(#[from] EvolveError),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error("archive is empty")]
    EmptyArchive,
}

impl BlmolError {
    /// Whether the failure came from numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, BlmolError::Training { .. } | BlmolError::TooManyInvalid { .. })
            || matches!(self, BlmolError::Surrogate(SurrogateError::Fit(_)))
    }
}

/// Pipeline variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Blmol,
    /// Preference gene frozen to each individual's initial random draw.
    BlmolI,
    /// Lower level trained with fixed uniform weights; preference not encoded.
    BlmolWs,
    RandomSearch,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Blmol => "blmol",
            Variant::BlmolI => "blmol_i",
            Variant::BlmolWs => "blmol_ws",
            Variant::RandomSearch => "random_search",
        }
    }
}

/// Checks the structural requirements of a problem.
pub fn validate_problem<P: BlProblem + ?Sized>(problem: &P) -> Result<(), BlmolError> {
    let spec = problem.genome_spec();
    let last = spec.genes.last().ok_or_else(|| BlmolError::Problem("empty genome".into()))?;
    if last.kind != GeneKind::Index {
        return Err(BlmolError::Problem("last gene must be the preference index".into()));
    }
    if spec.genes[..spec.len() - 1].iter().any(|g| g.kind == GeneKind::Index) {
        return Err(BlmolError::Problem("only the last gene may be a preference index".into()));
    }
    if last.cardinality() as usize != problem.preferences().len() {
        return Err(BlmolError::Problem(format!(
            "preference gene spans {} values for {} preferences",
            last.cardinality(),
            problem.preferences().len()
        )));
    }
    if problem.num_objectives() < 2 {
        return Err(BlmolError::Problem("need at least two upper-level objectives".into()));
    }
    if problem.objective_names().len() != problem.num_objectives() {
        return Err(BlmolError::Problem("objective names and senses disagree".into()));
    }
    problem.train_config().validate().map_err(|e| BlmolError::Problem(e.to_string()))?;
    Ok(())
}

/// Preference selected by the genotype's index gene.
pub fn preference_of<'a, P: BlProblem + ?Sized>(problem: &'a P, g: &Genotype) -> &'a PreferenceVector<f64> {
    let gene = problem.genome_spec().genes.last().expect("validated genome");
    let v = *g.genes().last().expect("validated genotype");
    &problem.preferences()[(v - gene.low) as usize]
}

/// Lower-level config used by a variant.
pub fn variant_train_config<P: BlProblem + ?Sized>(problem: &P, variant: Variant) -> TrainConfig {
    let mut config = problem.train_config().clone();
    if variant == Variant::BlmolWs {
        config.solver = Solver::Ws;
    }
    config
}

/// Surrogate input encoder for a variant.
pub fn variant_encoder<P: BlProblem + ?Sized>(problem: &P, variant: Variant) -> InputEncoder {
    let spec = problem.genome_spec().clone();
    match variant {
        Variant::BlmolWs => InputEncoder::without_preference(spec),
        _ => InputEncoder::new(spec, problem.preferences().to_vec()),
    }
}

/// Trains one genotype at its preference and returns raw objective values.
/// This is one unit of the true-evaluation budget.
pub fn train_and_evaluate<P: BlProblem + ?Sized>(
    problem: &P,
    genotype: &Genotype,
    config: &TrainConfig,
    rng: &RandomStream,
) -> Result<Vec<f64>, BlmolError> {
    let fail = |message: String| BlmolError::Training { genotype: genotype.clone(), message };
    problem.genome_spec().validate(genotype).map_err(|e| fail(e.to_string()))?;
    let r = preference_of(problem, genotype);
    let mut oracle = problem.oracle(genotype).map_err(fail)?;
    let (w, _) =
        train_preference(&mut oracle, r, config, &mut rng.derive("train")).map_err(|e: TrainError| fail(e.to_string()))?;
    let values = problem.evaluate(genotype, &mut oracle, &w).map_err(fail)?;
    if values.len() != problem.num_objectives() {
        return Err(fail(format!("{} objective values for {} objectives", values.len(), problem.num_objectives())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(fail("non-finite objective value".into()));
    }
    Ok(values)
}

/// Draws `count` genotypes uniformly over the gene bounds. A duplicate is
/// redrawn up to ten times, then accepted.
pub fn sample_pairs<P: BlProblem + ?Sized>(problem: &P, count: usize, rng: &RandomStream) -> Vec<Genotype> {
    let spec = problem.genome_spec();
    let mut stream = rng.derive("pairs");
    let mut out: Vec<Genotype> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut g = spec.sample(&mut stream);
        for _ in 0..10 {
            if !out.contains(&g) {
                break;
            }
            g = spec.sample(&mut stream);
        }
        out.push(g);
    }
    out
}

/// Trained samples: the rows that trained successfully and the failures.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub genotypes: Vec<Genotype>,
    pub objectives: Vec<Vec<f64>>,
    pub invalid: Vec<(Genotype, String)>,
    /// Training runs consumed, including failed ones.
    pub trainings: usize,
}

/// Algorithm-1 sampling: draws pairs and trains each of them in parallel.
pub fn collect_samples<P: BlProblem + ?Sized>(
    problem: &P,
    count: usize,
    variant: Variant,
    rng: &RandomStream,
) -> Result<SampleSet, BlmolError> {
    validate_problem(problem)?;
    let genotypes = sample_pairs(problem, count, rng);
    let config = variant_train_config(problem, variant);
    let results: Vec<Result<Vec<f64>, BlmolError>> = genotypes
        .par_iter()
        .enumerate()
        .map(|(i, g)| train_and_evaluate(problem, g, &config, &rng.derive_index("sample", i)))
        .collect();
    let mut set = SampleSet { genotypes: Vec::new(), objectives: Vec::new(), invalid: Vec::new(), trainings: count };
    for (g, r) in genotypes.into_iter().zip(results) {
        match r {
            Ok(v) => {
                set.genotypes.push(g);
                set.objectives.push(v);
            }
            Err(e) => set.invalid.push((g, e.to_string())),
        }
    }
    if set.invalid.len() * 5 > count {
        return Err(BlmolError::TooManyInvalid {
            invalid: set.invalid.len(),
            total: count,
            first: set.invalid[0].1.clone(),
        });
    }
    Ok(set)
}

/// Encodes trained samples into a surrogate training table.
pub fn sample_table(encoder: &InputEncoder, samples: &SampleSet) -> Result<SampleTable, BlmolError> {
    let features = samples.genotypes.iter().map(|g| encoder.encode(g)).collect::<Result<Vec<_>, _>>()?;
    Ok(SampleTable::new(features, samples.objectives.clone())?.with_layout(encoder.layout())?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsmConfig {
    pub kinds: Vec<SurrogateKind>,
    pub folds: usize,
    pub params: SurrogateParams,
}

impl Default for PsmConfig {
    fn default() -> Self {
        Self { kinds: SurrogateKind::ALL.to_vec(), folds: 5, params: SurrogateParams::default() }
    }
}

/// Selects one surrogate per objective. The fold count is capped by the
/// number of rows.
pub fn fit_surrogates(table: &SampleTable, config: &PsmConfig, rng: &RandomStream) -> Result<Vec<Selection>, BlmolError> {
    let folds = config.folds.min(table.len());
    Ok(select_best(table, &config.kinds, folds, &config.params, &rng.derive("select"))?)
}

/// Output of surrogate construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PsmResult {
    pub samples: SampleSet,
    pub table: SampleTable,
    pub selections: Vec<Selection>,
}

/// Samples, trains, and fits surrogates.
pub fn build_psm<P: BlProblem + ?Sized>(
    problem: &P,
    count: usize,
    variant: Variant,
    config: &PsmConfig,
    rng: &RandomStream,
) -> Result<PsmResult, BlmolError> {
    let samples = collect_samples(problem, count, variant, &rng.derive("sample"))?;
    let table = sample_table(&variant_encoder(problem, variant), &samples)?;
    let selections = fit_surrogates(&table, config, &rng.derive("fit"))?;
    Ok(PsmResult { samples, table, selections })
}

/// One archive member with its predicted raw objective values.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveEntry {
    pub genotype: Genotype,
    pub predicted: Vec<f64>,
}

/// Genome searched by a variant.
pub fn variant_search_spec<P: BlProblem + ?Sized>(problem: &P, variant: Variant) -> GenomeSpec {
    let mut spec = problem.genome_spec().clone();
    if variant == Variant::BlmolI {
        let last = spec.genes.len() - 1;
        spec.genes[last] = spec.genes[last].frozen();
    }
    spec
}

/// Predicted raw objectives of a genotype.
pub fn predict_raw(encoder: &InputEncoder, selections: &[Selection], g: &Genotype) -> Result<Vec<f64>, BlmolError> {
    let x = encoder.encode(g)?;
    selections.iter().map(|s| Ok(s.surrogate.predict(&x)?)).collect()
}

/// NSGA-II over surrogate predictions. The archive is the non-dominated
/// subset of the final population, sorted by genotype.
pub fn search<P: BlProblem + ?Sized>(
    problem: &P,
    variant: Variant,
    selections: &[Selection],
    config: &EvolveConfig,
    rng: &RandomStream,
) -> Result<Vec<ArchiveEntry>, BlmolError> {
    validate_problem(problem)?;
    if selections.len() != problem.num_objectives() {
        return Err(BlmolError::Problem(format!(
            "{} surrogates for {} objectives",
            selections.len(),
            problem.num_objectives()
        )));
    }
    let encoder = variant_encoder(problem, variant);
    let senses = problem.senses();
    let evaluator = |g: &Genotype| -> Result<ObjectiveVector<f64>, BlmolError> {
        let raw = predict_raw(&encoder, selections, g)?;
        Ok(ObjectiveVector::new(minimized(&senses, &raw))?)
    };
    let spec = variant_search_spec(problem, variant);
    let outcome = nsga2_run(&evaluator, &spec, config, &rng.derive("nsga2"))?;
    let mut entries: Vec<ArchiveEntry> = outcome
        .archive
        .into_members()
        .into_iter()
        .map(|(genotype, obj)| {
            let predicted = senses.iter().zip(obj.values()).map(|(s, &v)| s.to_min(v)).collect();
            ArchiveEntry { genotype, predicted }
        })
        .collect();
    entries.sort_by(|a, b| a.genotype.cmp(&b.genotype));
    Ok(entries)
}

/// How archive members are chosen for retraining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Targets {
    /// For each direction, the member whose min-max normalized predicted
    /// objectives lie closest to the ray along it.
    Preferences(Vec<Vec<f64>>),
    /// `k` members spread evenly along the first objective (all when `k`
    /// reaches the archive size).
    TopK(usize),
}

/// Min-max normalization of minimized predicted objectives over the archive.
fn normalized_archive(archive: &[ArchiveEntry], senses: &[Sense]) -> Vec<Vec<f64>> {
    let mins: Vec<Vec<f64>> = archive.iter().map(|e| minimized(senses, &e.predicted)).collect();
    let m = senses.len();
    let lo: Vec<f64> = (0..m).map(|j| mins.iter().map(|v| v[j]).fold(f64::INFINITY, f64::min)).collect();
    let hi: Vec<f64> = (0..m).map(|j| mins.iter().map(|v| v[j]).fold(f64::NEG_INFINITY, f64::max)).collect();
    mins.iter()
        .map(|v| (0..m).map(|j| if hi[j] > lo[j] { (v[j] - lo[j]) / (hi[j] - lo[j]) } else { 0.0 }).collect())
        .collect()
}

fn ray_distance(point: &[f64], direction: &[f64]) -> f64 {
    let dd: f64 = direction.iter().map(|d| d * d).sum();
    let t = (point.iter().zip(direction).map(|(p, d)| p * d).sum::<f64>() / dd).max(0.0);
    point.iter().zip(direction).map(|(p, d)| (p - t * d) * (p - t * d)).sum::<f64>().sqrt()
}

/// Archive indices selected for each target, in target order.
pub fn choose_targets(archive: &[ArchiveEntry], senses: &[Sense], targets: &Targets) -> Result<Vec<usize>, BlmolError> {
    if archive.is_empty() {
        return Err(BlmolError::EmptyArchive);
    }
    let normalized = normalized_archive(archive, senses);
    match targets {
        Targets::Preferences(dirs) => dirs
            .iter()
            .map(|dir| {
                if dir.len() != senses.len() || dir.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || dir.iter().all(|v| *v == 0.0) {
                    return Err(BlmolError::Problem(format!("invalid target direction {dir:?}")));
                }
                let mut best = 0;
                for i in 1..normalized.len() {
                    if ray_distance(&normalized[i], dir) < ray_distance(&normalized[best], dir) {
                        best = i;
                    }
                }
                Ok(best)
            })
            .collect(),
        Targets::TopK(k) => {
            let mut order: Vec<usize> = (0..archive.len()).collect();
            order.sort_by(|&a, &b| normalized[a][0].total_cmp(&normalized[b][0]).then(a.cmp(&b)));
            let n = order.len();
            let k = (*k).min(n);
            Ok(match k {
                0 => Vec::new(),
                1 => vec![order[0]],
                _ => (0..k).map(|i| order[(i * (n - 1) + (k - 1) / 2) / (k - 1)]).collect(),
            })
        }
    }
}

/// Retraining results of one selected archive member.
#[derive(Debug, Clone, PartialEq)]
pub struct Realized {
    pub target: usize,
    pub genotype: Genotype,
    pub predicted: Vec<f64>,
    /// Per repeat: stream seed fingerprint and raw true objectives.
    pub runs: Vec<(u64, Vec<f64>)>,
}

impl Realized {
    pub fn mean(&self) -> Vec<f64> {
        self.column_stat(mean)
    }

    pub fn std(&self) -> Vec<f64> {
        self.column_stat(std_dev)
    }

    fn column_stat(&self, f: fn(&[f64]) -> f64) -> Vec<f64> {
        let m = self.predicted.len();
        (0..m).map(|j| f(&self.runs.iter().map(|(_, v)| v[j]).collect::<Vec<_>>())).collect()
    }
}

/// Retrains the chosen archive members `repeats` times each with
/// independent streams. Consumes `targets x repeats` trainings.
pub fn realize<P: BlProblem + ?Sized>(
    problem: &P,
    variant: Variant,
    archive: &[ArchiveEntry],
    targets: &Targets,
    repeats: usize,
    rng: &RandomStream,
) -> Result<Vec<Realized>, BlmolError> {
    validate_problem(problem)?;
    let chosen = choose_targets(archive, &problem.senses(), targets)?;
    let config = variant_train_config(problem, variant);
    let jobs: Vec<(usize, usize)> = (0..chosen.len()).flat_map(|t| (0..repeats).map(move |q| (t, q))).collect();
    let results: Vec<Result<(u64, Vec<f64>), BlmolError>> = jobs
        .par_iter()
        .map(|&(t, q)| {
            let stream = rng.derive_index("target", t).derive_index("repeat", q);
            let values = train_and_evaluate(problem, &archive[chosen[t]].genotype, &config, &stream)?;
            Ok((stream.fingerprint(), values))
        })
        .collect();
    let mut out: Vec<Realized> = chosen
        .iter()
        .enumerate()
        .map(|(t, &i)| Realized {
            target: t,
            genotype: archive[i].genotype.clone(),
            predicted: archive[i].predicted.clone(),
            runs: Vec::with_capacity(repeats),
        })
        .collect();
    for (&(t, _), r) in jobs.iter().zip(results) {
        out[t].runs.push(r?);
    }
    Ok(out)
}

/// Number of trainings a realize call consumes.
pub fn realize_budget(archive_len: usize, targets: &Targets, repeats: usize) -> usize {
    let count = match targets {
        Targets::Preferences(d) => d.len(),
        Targets::TopK(k) => (*k).min(archive_len),
    };
    count * repeats
}

/// Random search: `budget` sampled genotypes, each trained once.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomSearchResult {
    pub samples: SampleSet,
    /// Indices into `samples` of the non-dominated evaluated points.
    pub front: Vec<usize>,
}

pub fn random_search<P: BlProblem + ?Sized>(
    problem: &P,
    budget: usize,
    rng: &RandomStream,
) -> Result<RandomSearchResult, BlmolError> {
    let samples = collect_samples(problem, budget, Variant::RandomSearch, rng)?;
    let senses = problem.senses();
    let points: Vec<Vec<f64>> = samples.objectives.iter().map(|v| minimized(&senses, v)).collect();
    let front = if points.is_empty() { Vec::new() } else { non_dominated_sort(&points)?.swap_remove(0) };
    Ok(RandomSearchResult { samples, front })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub variant: Variant,
    pub samples: usize,
    pub psm: PsmConfig,
    pub evolve: EvolveConfig,
    pub targets: Targets,
    pub repeats: usize,
}

/// Result of a full in-memory pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub psm: Option<PsmResult>,
    pub archive: Vec<ArchiveEntry>,
    pub realized: Vec<Realized>,
    pub random: Option<RandomSearchResult>,
    pub trainings: usize,
}

impl PipelineRun {
    /// Raw true objective vectors this run produced: one mean vector per
    /// realized member, or every random-search evaluation.
    pub fn true_points(&self) -> Vec<Vec<f64>> {
        match &self.random {
            Some(r) => r.samples.objectives.clone(),
            None => self.realized.iter().map(Realized::mean).collect(),
        }
    }
}

/// Runs every stage in memory. Stage streams are `sample`, `fit`, `search`
/// and `realize` under the root stream of `seed`; random search uses
/// `random_search` with budget `samples + realize budget`.
pub fn run_pipeline<P: BlProblem + ?Sized>(problem: &P, config: &PipelineConfig, seed: u64) -> Result<PipelineRun, BlmolError> {
    let root = RandomStream::root(seed);
    if config.variant == Variant::RandomSearch {
        let budget = config.samples
            + match &config.targets {
                Targets::Preferences(d) => d.len() * config.repeats,
                Targets::TopK(k) => k * config.repeats,
            };
        let random = random_search(problem, budget, &root.derive("random_search"))?;
        return Ok(PipelineRun { psm: None, archive: Vec::new(), realized: Vec::new(), trainings: budget, random: Some(random) });
    }
    let samples = collect_samples(problem, config.samples, config.variant, &root.derive("sample"))?;
    let table = sample_table(&variant_encoder(problem, config.variant), &samples)?;
    let selections = fit_surrogates(&table, &config.psm, &root.derive("fit"))?;
    let archive = search(problem, config.variant, &selections, &config.evolve, &root.derive("search"))?;
    let realized = realize(problem, config.variant, &archive, &config.targets, config.repeats, &root.derive("realize"))?;
    let trainings = samples.trainings + realize_budget(archive.len(), &config.targets, config.repeats);
    Ok(PipelineRun { psm: Some(PsmResult { samples, table, selections }), archive, realized, random: None, trainings })
}
