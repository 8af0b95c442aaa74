//! NSGA-II over mixed integer genotypes.
//!
//! Variation happens in real space: simulated binary crossover (SBX) and
//! polynomial mutation (PM) with bounded distributions, followed by
//! round-and-clamp repair back onto the integer gene domain. A mutation whose
//! real perturbation rounds back onto the parent value moves one unit in the
//! perturbation's direction instead, so `pm` is the per-gene change rate
//! away from bounds rather than a no-op for narrow domains such as binary genes.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pareto::{crowding_distance, non_dominated_sort, ParetoArchive};
use crate::rng::RandomStream;
use crate::scalar::Scalar;
use crate::vectors::{ObjectiveVector, VectorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneKind {
    Binary,
    Categorical,
    Index,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneSpec {
    pub kind: GeneKind,
    pub low: i64,
    pub high: i64,
    /// Frozen genes keep their initial random value: variation skips them.
    #[serde(default)]
    pub frozen: bool,
}

impl GeneSpec {
    pub fn binary() -> Self {
        Self { kind: GeneKind::Binary, low: 0, high: 1, frozen: false }
    }

    /// Categorical gene with `choices` options encoded `0..choices`.
    pub fn categorical(choices: i64) -> Self {
        assert!(choices >= 1);
        Self { kind: GeneKind::Categorical, low: 0, high: choices - 1, frozen: false }
    }

    pub fn index(low: i64, high: i64) -> Self {
        assert!(low <= high);
        Self { kind: GeneKind::Index, low, high, frozen: false }
    }

    pub fn frozen(mut self) -> Self {
        self.frozen = true;
        self
    }

    pub fn cardinality(&self) -> u64 {
        (self.high - self.low + 1) as u64
    }

    pub fn contains(&self, v: i64) -> bool {
        (self.low..=self.high).contains(&v)
    }

    fn repair(&self, x: f64) -> i64 {
        (x.round() as i64).clamp(self.low, self.high)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Genotype(pub Vec<i64>);

impl Genotype {
    pub fn genes(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Genotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|g| g.to_string()).collect();
        write!(f, "[{}]", parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenomeSpec {
    pub genes: Vec<GeneSpec>,
}

impl GenomeSpec {
    pub fn new(genes: Vec<GeneSpec>) -> Self {
        for g in &genes {
            assert!(g.low <= g.high, "gene bounds inverted");
            if g.kind == GeneKind::Binary {
                assert!(g.low == 0 && g.high == 1, "binary genes span 0..=1");
            }
        }
        Self { genes }
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn validate(&self, g: &Genotype) -> Result<(), EvolveError> {
        if g.len() != self.len() {
            return Err(EvolveError::InvalidGenotype {
                genotype: g.clone(),
                reason: format!("expected {} genes, found {}", self.len(), g.len()),
            });
        }
        for (i, (spec, &v)) in self.genes.iter().zip(g.genes()).enumerate() {
            if !spec.contains(v) {
                return Err(EvolveError::InvalidGenotype {
                    genotype: g.clone(),
                    reason: format!("gene {i} = {v} outside [{}, {}]", spec.low, spec.high),
                });
            }
        }
        Ok(())
    }

    /// Uniform draw over the whole gene space.
    pub fn sample(&self, rng: &mut RandomStream) -> Genotype {
        Genotype(self.genes.iter().map(|s| rng.int_inclusive(s.low, s.high)).collect())
    }

    /// Number of distinct genotypes, as `f64` to survive large spaces.
    pub fn space_size(&self) -> f64 {
        self.genes.iter().map(|g| g.cardinality() as f64).product()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvolveConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    /// Per-gene mutation probability; `None` means `1 / D`.
    pub mutation_prob: Option<f64>,
    pub eta_c: f64,
    pub eta_m: f64,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            population: 100,
            generations: 500,
            crossover_prob: 1.0,
            mutation_prob: None,
            eta_c: 20.0,
            eta_m: 20.0,
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<(), EvolveError> {
        if self.population < 4 || self.population % 2 != 0 {
            return Err(EvolveError::Config(format!(
                "population must be even and >= 4, got {}",
                self.population
            )));
        }
        if !(0.0..=1.0).contains(&self.crossover_prob) {
            return Err(EvolveError::Config("crossover_prob outside [0, 1]".into()));
        }
        if let Some(pm) = self.mutation_prob {
            if !(0.0..=1.0).contains(&pm) {
                return Err(EvolveError::Config("mutation_prob outside [0, 1]".into()));
            }
        }
        if self.eta_c < 0.0 || self.eta_m < 0.0 {
            return Err(EvolveError::Config("distribution indices must be non-negative".into()));
        }
        Ok(())
    }

    pub fn mutation_prob_for(&self, genes: usize) -> f64 {
        self.mutation_prob.unwrap_or(1.0 / genes.max(1) as f64)
    }
}

#[derive(Debug, Error)]
pub enum EvolveError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid genotype {genotype}: {reason}")]
    InvalidGenotype { genotype: Genotype, reason: String },
    #[error("evaluation failed for genotype {genotype}: {message}")]
    Evaluation { genotype: Genotype, message: String },
    #[error(transparent)]
    Objectives(#[from] VectorError),
}

fn sbx_spread(u: f64, beta: f64, eta: f64) -> f64 {
    let alpha = 2.0 - beta.powf(-(eta + 1.0));
    if u <= 1.0 / alpha {
        (u * alpha).powf(1.0 / (eta + 1.0))
    } else {
        (1.0 / (2.0 - u * alpha)).powf(1.0 / (eta + 1.0))
    }
}

/// Bounded simulated binary crossover. The pair is recombined with
/// probability `pc`; within a recombined pair each gene takes part with
/// probability 1/2 and the two children's values are exchanged with
/// probability 1/2.
pub fn sbx_crossover(
    p1: &Genotype,
    p2: &Genotype,
    spec: &GenomeSpec,
    eta_c: f64,
    pc: f64,
    rng: &mut RandomStream,
) -> (Genotype, Genotype) {
    let mut c1 = p1.clone();
    let mut c2 = p2.clone();
    if rng.uniform() >= pc {
        return (c1, c2);
    }
    for (i, gs) in spec.genes.iter().enumerate() {
        if gs.frozen || gs.low == gs.high {
            continue;
        }
        if rng.uniform() > 0.5 {
            continue;
        }
        let (x1, x2) = (p1.0[i] as f64, p2.0[i] as f64);
        if (x1 - x2).abs() <= 1e-14 {
            continue;
        }
        let (y1, y2) = (x1.min(x2), x1.max(x2));
        let (yl, yu) = (gs.low as f64, gs.high as f64);
        let u = rng.uniform();
        let bq1 = sbx_spread(u, 1.0 + 2.0 * (y1 - yl) / (y2 - y1), eta_c);
        let bq2 = sbx_spread(u, 1.0 + 2.0 * (yu - y2) / (y2 - y1), eta_c);
        let lo = (0.5 * ((y1 + y2) - bq1 * (y2 - y1))).clamp(yl, yu);
        let hi = (0.5 * ((y1 + y2) + bq2 * (y2 - y1))).clamp(yl, yu);
        let (a, b) = if rng.uniform() <= 0.5 { (hi, lo) } else { (lo, hi) };
        c1.0[i] = gs.repair(a);
        c2.0[i] = gs.repair(b);
    }
    (c1, c2)
}

/// Bounded polynomial mutation applied to each non-frozen gene with
/// probability `pm`.
pub fn pm_mutation(g: &Genotype, spec: &GenomeSpec, eta_m: f64, pm: f64, rng: &mut RandomStream) -> Genotype {
    let mut out = g.clone();
    for (i, gs) in spec.genes.iter().enumerate() {
        if gs.frozen || gs.low == gs.high {
            continue;
        }
        if rng.uniform() >= pm {
            continue;
        }
        let (yl, yu) = (gs.low as f64, gs.high as f64);
        let y = g.0[i] as f64;
        let (d1, d2) = ((y - yl) / (yu - yl), (yu - y) / (yu - yl));
        let u = rng.uniform();
        let pow = 1.0 / (eta_m + 1.0);
        let deltaq = if u <= 0.5 {
            let val = 2.0 * u + (1.0 - 2.0 * u) * (1.0 - d1).powf(eta_m + 1.0);
            val.powf(pow) - 1.0
        } else {
            let val = 2.0 * (1.0 - u) + 2.0 * (u - 0.5) * (1.0 - d2).powf(eta_m + 1.0);
            1.0 - val.powf(pow)
        };
        let mut v = gs.repair(y + deltaq * (yu - yl));
        if v == g.0[i] && deltaq != 0.0 {
            v = (g.0[i] + deltaq.signum() as i64).clamp(gs.low, gs.high);
        }
        out.0[i] = v;
    }
    out
}

#[derive(Debug, Clone)]
pub struct Individual<T> {
    pub genotype: Genotype,
    pub objectives: ObjectiveVector<T>,
    pub rank: usize,
    pub crowding: T,
}

/// Binary tournament: lower rank wins, then larger crowding distance, then a
/// coin flip. Returns the winner's index.
pub fn binary_tournament<T: Scalar>(pop: &[Individual<T>], rng: &mut RandomStream) -> usize {
    let i = rng.index(pop.len());
    let j = if pop.len() > 1 {
        let k = rng.index(pop.len() - 1);
        if k >= i {
            k + 1
        } else {
            k
        }
    } else {
        i
    };
    let (a, b) = (&pop[i], &pop[j]);
    if a.rank != b.rank {
        return if a.rank < b.rank { i } else { j };
    }
    if a.crowding != b.crowding {
        return if a.crowding > b.crowding { i } else { j };
    }
    if rng.coin() {
        i
    } else {
        j
    }
}

/// Assigns rank and crowding distance to every individual in place.
pub fn assign_rank_and_crowding<T: Scalar>(pop: &mut [Individual<T>]) -> Result<Vec<Vec<usize>>, VectorError> {
    let points: Vec<&[T]> = pop.iter().map(|ind| ind.objectives.values()).collect();
    let fronts = non_dominated_sort(&points)?;
    let crowding: Vec<Vec<T>> = fronts
        .iter()
        .map(|front| {
            let members: Vec<&[T]> = front.iter().map(|&i| points[i]).collect();
            crowding_distance(&members)
        })
        .collect::<Result<_, _>>()?;
    for (r, (front, crowd)) in fronts.iter().zip(crowding).enumerate() {
        for (&i, c) in front.iter().zip(crowd) {
            pop[i].rank = r;
            pop[i].crowding = c;
        }
    }
    Ok(fronts)
}

/// Rank-then-crowding truncation of a merged population to `target` members.
///
/// Within the front that overflows, every distinct objective vector is kept
/// before any repeated copy, so duplicates cannot crowd out distinct points.
pub fn environmental_selection<T: Scalar>(
    mut merged: Vec<Individual<T>>,
    target: usize,
) -> Result<Vec<Individual<T>>, VectorError> {
    let fronts = assign_rank_and_crowding(&mut merged)?;
    let mut keep: Vec<usize> = Vec::with_capacity(target);
    for front in fronts {
        if keep.len() + front.len() <= target {
            keep.extend(front);
            if keep.len() == target {
                break;
            }
            continue;
        }
        let mut copy_index = vec![0usize; front.len()];
        for (a, &i) in front.iter().enumerate() {
            copy_index[a] = front[..a]
                .iter()
                .filter(|&&j| merged[j].objectives == merged[i].objectives)
                .count();
        }
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| {
            copy_index[a]
                .cmp(&copy_index[b])
                .then(
                    merged[front[b]]
                        .crowding
                        .partial_cmp(&merged[front[a]].crowding)
                        .expect("comparable crowding"),
                )
                .then(front[a].cmp(&front[b]))
        });
        let room = target - keep.len();
        keep.extend(order.into_iter().take(room).map(|a| front[a]));
        break;
    }
    keep.sort_unstable();
    let mut slots: Vec<Option<Individual<T>>> = merged.into_iter().map(Some).collect();
    let mut next: Vec<Individual<T>> = keep.into_iter().map(|i| slots[i].take().expect("unique index")).collect();
    assign_rank_and_crowding(&mut next)?;
    Ok(next)
}

/// Objective function driving a run. Implemented for closures.
pub trait Evaluator<T>: Sync {
    fn evaluate(&self, genotype: &Genotype) -> Result<ObjectiveVector<T>, String>;
}

impl<T, F, E> Evaluator<T> for F
where
    F: Fn(&Genotype) -> Result<ObjectiveVector<T>, E> + Sync,
    E: fmt::Display,
{
    fn evaluate(&self, genotype: &Genotype) -> Result<ObjectiveVector<T>, String> {
        self(genotype).map_err(|e| e.to_string())
    }
}

/// Evaluates a batch in parallel; results keep batch order, and the first
/// failure by index is reported.
pub fn evaluate_batch<T: Scalar, E: Evaluator<T> + ?Sized>(
    evaluator: &E,
    genotypes: Vec<Genotype>,
) -> Result<Vec<Individual<T>>, EvolveError> {
    let results: Vec<Result<ObjectiveVector<T>, String>> =
        genotypes.par_iter().map(|g| evaluator.evaluate(g)).collect();
    genotypes
        .into_iter()
        .zip(results)
        .map(|(genotype, r)| match r {
            Ok(objectives) => Ok(Individual { genotype, objectives, rank: 0, crowding: T::zero() }),
            Err(message) => Err(EvolveError::Evaluation { genotype, message }),
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Nsga2Outcome<T> {
    /// Non-dominated, genotype-deduplicated subset of the final population.
    pub archive: ParetoArchive<Genotype, T>,
    pub population: Vec<Individual<T>>,
    pub evaluations: usize,
}

pub fn nsga2_run<T: Scalar, E: Evaluator<T> + ?Sized>(
    evaluator: &E,
    spec: &GenomeSpec,
    config: &EvolveConfig,
    rng: &RandomStream,
) -> Result<Nsga2Outcome<T>, EvolveError> {
    nsga2_run_observed(evaluator, spec, config, rng, |_, _| {})
}

/// As [`nsga2_run`], calling `observer(generation, population)` after the
/// initial population (generation 0) and after every generation's selection.
pub fn nsga2_run_observed<T: Scalar, E: Evaluator<T> + ?Sized>(
    evaluator: &E,
    spec: &GenomeSpec,
    config: &EvolveConfig,
    rng: &RandomStream,
    mut observer: impl FnMut(usize, &[Individual<T>]),
) -> Result<Nsga2Outcome<T>, EvolveError> {
    config.validate()?;
    let n = config.population;
    let pm = config.mutation_prob_for(spec.len());

    let mut init_rng = rng.derive("init");
    let initial: Vec<Genotype> = (0..n).map(|_| spec.sample(&mut init_rng)).collect();
    let mut evaluations = initial.len();
    let mut population = evaluate_batch(evaluator, initial)?;
    assign_rank_and_crowding(&mut population)?;
    observer(0, &population);

    for generation in 0..config.generations {
        let mut gen_rng = rng.derive_index("generation", generation);
        let mut offspring = Vec::with_capacity(n);
        while offspring.len() < n {
            let a = binary_tournament(&population, &mut gen_rng);
            let b = binary_tournament(&population, &mut gen_rng);
            let (c1, c2) = sbx_crossover(
                &population[a].genotype,
                &population[b].genotype,
                spec,
                config.eta_c,
                config.crossover_prob,
                &mut gen_rng,
            );
            offspring.push(pm_mutation(&c1, spec, config.eta_m, pm, &mut gen_rng));
            offspring.push(pm_mutation(&c2, spec, config.eta_m, pm, &mut gen_rng));
        }
        evaluations += offspring.len();
        let mut merged = population;
        merged.extend(evaluate_batch(evaluator, offspring)?);
        population = environmental_selection(merged, n)?;
        observer(generation + 1, &population);
    }

    let mut archive = ParetoArchive::unbounded();
    for ind in population.iter().filter(|ind| ind.rank == 0) {
        archive.insert(ind.genotype.clone(), ind.objectives.clone())?;
    }
    Ok(Nsga2Outcome { archive, population, evaluations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypervolume::hypervolume;
    use crate::rng::derive_stream;

    fn ind(genes: Vec<i64>, obj: Vec<f64>) -> Individual<f64> {
        Individual {
            genotype: Genotype(genes),
            objectives: ObjectiveVector::new(obj).unwrap(),
            rank: 0,
            crowding: 0.0,
        }
    }

    #[test]
    fn crossover_disabled_returns_parents() {
        let spec = GenomeSpec::new(vec![GeneSpec::index(0, 5); 4]);
        let mut rng = derive_stream(1, "sbx");
        let (p1, p2) = (Genotype(vec![0, 1, 2, 3]), Genotype(vec![5, 4, 3, 2]));
        assert_eq!(sbx_crossover(&p1, &p2, &spec, 20.0, 0.0, &mut rng), (p1.clone(), p2.clone()));
        assert_eq!(sbx_crossover(&p1, &p1, &spec, 20.0, 1.0, &mut rng), (p1.clone(), p1.clone()));
    }

    #[test]
    fn crossover_children_are_bounded_and_centered() {
        let spec = GenomeSpec::new(vec![GeneSpec::index(0, 5)]);
        let mut rng = derive_stream(2, "sbx-stat");
        let (p1, p2) = (Genotype(vec![0]), Genotype(vec![5]));
        let mut total = 0.0;
        let trials = 10_000;
        for _ in 0..trials {
            let (a, b) = sbx_crossover(&p1, &p2, &spec, 20.0, 1.0, &mut rng);
            for v in [a.0[0], b.0[0]] {
                assert!((0..=5).contains(&v));
                total += v as f64;
            }
        }
        let mean = total / (2 * trials) as f64;
        assert!((mean - 2.5).abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn mutation_disabled_is_identity() {
        let spec = GenomeSpec::new(vec![GeneSpec::categorical(6); 5]);
        let g = Genotype(vec![0, 1, 2, 3, 4]);
        let mut rng = derive_stream(3, "pm");
        assert_eq!(pm_mutation(&g, &spec, 20.0, 0.0, &mut rng), g);
    }

    #[test]
    fn binary_mutation_flips_sometimes() {
        let spec = GenomeSpec::new(vec![GeneSpec::binary()]);
        let mut rng = derive_stream(4, "pm-bin");
        let trials = 10_000;
        let mut flips = 0;
        for t in 0..trials {
            let g = Genotype(vec![(t % 2) as i64]);
            let m = pm_mutation(&g, &spec, 20.0, 1.0, &mut rng);
            assert!(m.0[0] == 0 || m.0[0] == 1);
            flips += usize::from(m != g);
        }
        let rate = flips as f64 / trials as f64;
        assert!(rate > 0.0 && rate < 1.0, "flip rate {rate}");
    }

    #[test]
    fn mutation_rate_one_over_d() {
        let spec = GenomeSpec::new(vec![GeneSpec::index(0, 100); 15]);
        let g = Genotype(vec![50; 15]);
        let mut rng = derive_stream(5, "pm-rate");
        let trials = 10_000;
        let changed: usize = (0..trials)
            .map(|_| {
                let m = pm_mutation(&g, &spec, 20.0, 1.0 / 15.0, &mut rng);
                m.0.iter().zip(&g.0).filter(|(a, b)| a != b).count()
            })
            .sum();
        let mean = changed as f64 / trials as f64;
        assert!((mean - 1.0).abs() < 0.2, "mean {mean}");
    }

    #[test]
    fn frozen_genes_never_vary() {
        let spec = GenomeSpec::new(vec![GeneSpec::index(0, 9), GeneSpec::index(1, 20).frozen()]);
        let mut rng = derive_stream(6, "frozen");
        for _ in 0..500 {
            let (a, b) = sbx_crossover(&Genotype(vec![0, 3]), &Genotype(vec![9, 17]), &spec, 2.0, 1.0, &mut rng);
            assert_eq!((a.0[1], b.0[1]), (3, 17));
            assert_eq!(pm_mutation(&a, &spec, 2.0, 1.0, &mut rng).0[1], 3);
        }
    }

    #[test]
    fn tournament_prefers_rank_then_crowding() {
        let mut pop = vec![ind(vec![0], vec![1.0, 1.0]), ind(vec![1], vec![2.0, 2.0])];
        pop[1].rank = 1;
        let mut rng = derive_stream(7, "tour");
        for _ in 0..20 {
            assert_eq!(binary_tournament(&pop, &mut rng), 0);
        }
        pop[1].rank = 0;
        pop[0].crowding = 0.5;
        pop[1].crowding = 2.0;
        for _ in 0..20 {
            assert_eq!(binary_tournament(&pop, &mut rng), 1);
        }
    }

    #[test]
    fn selection_of_identical_points() {
        let merged: Vec<_> = (0..8).map(|i| ind(vec![i], vec![1.0, 1.0])).collect();
        assert_eq!(environmental_selection(merged, 4).unwrap().len(), 4);
    }

    #[test]
    fn selection_keeps_extremes_of_non_dominated_set() {
        let merged: Vec<_> = (0..8).map(|i| ind(vec![i], vec![i as f64, 7.0 - (i as f64).sqrt()])).collect();
        let kept = environmental_selection(merged, 4).unwrap();
        let genes: Vec<i64> = kept.iter().map(|k| k.genotype.0[0]).collect();
        assert!(genes.contains(&0) && genes.contains(&7));
    }

    #[test]
    fn selection_returns_exact_front_zero() {
        let mut merged: Vec<_> = (0..4).map(|i| ind(vec![i], vec![i as f64, 3.0 - i as f64])).collect();
        merged.extend((0..4).map(|i| ind(vec![10 + i], vec![i as f64 + 1.0, 4.0 - i as f64])));
        let kept = environmental_selection(merged, 4).unwrap();
        let mut genes: Vec<i64> = kept.iter().map(|k| k.genotype.0[0]).collect();
        genes.sort();
        assert_eq!(genes, vec![0, 1, 2, 3]);
    }

    #[test]
    fn sphere_reaches_integer_minimizer() {
        let target = [3i64, 7, 2, 5];
        let spec = GenomeSpec::new(vec![GeneSpec::index(0, 10); 4]);
        let eval = |g: &Genotype| -> Result<ObjectiveVector<f64>, String> {
            let s: i64 = g.0.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum();
            ObjectiveVector::new(vec![s as f64]).map_err(|e| e.to_string())
        };
        let config = EvolveConfig { population: 20, generations: 50, ..Default::default() };
        let out = nsga2_run(&eval, &spec, &config, &derive_stream(8, "sphere")).unwrap();
        assert_eq!(out.archive.members()[0].0, Genotype(target.to_vec()));
    }

    #[test]
    fn biobjective_line_recovers_whole_front() {
        let spec = GenomeSpec::new(vec![GeneSpec::index(0, 5)]);
        let eval = |g: &Genotype| ObjectiveVector::new(vec![g.0[0] as f64, 5.0 - g.0[0] as f64]);
        let config = EvolveConfig { population: 20, generations: 50, ..Default::default() };
        let out = nsga2_run(&eval, &spec, &config, &derive_stream(9, "line")).unwrap();
        let mut values: Vec<i64> = out.archive.members().iter().map(|(g, _)| g.0[0]).collect();
        values.sort();
        assert_eq!(values, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn zero_generations_returns_initial_front() {
        let spec = GenomeSpec::new(vec![GeneSpec::index(0, 20); 2]);
        let eval = |g: &Genotype| ObjectiveVector::new(vec![g.0[0] as f64, g.0[1] as f64]);
        let config = EvolveConfig { population: 10, generations: 0, ..Default::default() };
        let rng = derive_stream(10, "t0");
        let out = nsga2_run(&eval, &spec, &config, &rng).unwrap();
        let mut init = rng.derive("init");
        let initial: Vec<Genotype> = (0..10).map(|_| spec.sample(&mut init)).collect();
        for (g, _) in out.archive.members() {
            assert!(initial.contains(g));
        }
        assert_eq!(out.evaluations, 10);
    }

    #[test]
    fn without_variation_no_new_genotypes_and_no_hypervolume_loss() {
        let spec = GenomeSpec::new(vec![GeneSpec::index(0, 30); 3]);
        let eval = |g: &Genotype| {
            let x: Vec<f64> = g.0.iter().map(|&v| v as f64 / 30.0).collect();
            ObjectiveVector::new(vec![x[0] + x[2] * 0.1, 1.0 - x[0].sqrt() + x[1] * x[1]])
        };
        let config = EvolveConfig {
            population: 12,
            generations: 30,
            crossover_prob: 0.0,
            mutation_prob: Some(0.0),
            ..Default::default()
        };
        let mut previous = 0.0;
        let mut initial: Vec<Genotype> = Vec::new();
        nsga2_run_observed(&eval, &spec, &config, &derive_stream(11, "elitism"), |generation, pop| {
            if generation == 0 {
                initial = pop.iter().map(|i| i.genotype.clone()).collect();
            }
            assert!(pop.iter().all(|i| initial.contains(&i.genotype)));
            let front: Vec<&[f64]> =
                pop.iter().filter(|i| i.rank == 0).map(|i| i.objectives.values()).collect();
            let hv = hypervolume(&front, &[2.0, 3.0]).unwrap();
            assert!(hv >= previous - 1e-12);
            previous = hv;
        })
        .unwrap();
    }

    #[test]
    fn evaluator_failure_reports_genotype() {
        let spec = GenomeSpec::new(vec![GeneSpec::index(0, 3)]);
        let eval = |g: &Genotype| -> Result<ObjectiveVector<f64>, String> {
            if g.0[0] == 2 {
                Err("boom".into())
            } else {
                ObjectiveVector::new(vec![0.0, 0.0]).map_err(|e| e.to_string())
            }
        };
        let config = EvolveConfig { population: 20, generations: 2, ..Default::default() };
        match nsga2_run(&eval, &spec, &config, &derive_stream(12, "fail")) {
            Err(EvolveError::Evaluation { genotype, message }) => {
                assert_eq!(genotype, Genotype(vec![2]));
                assert_eq!(message, "boom");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn runs_are_reproducible_and_valid() {
        let spec = GenomeSpec::new(vec![GeneSpec::binary(), GeneSpec::categorical(6), GeneSpec::index(1, 20)]);
        let eval = |g: &Genotype| ObjectiveVector::new(vec![g.0[0] as f64 + g.0[1] as f64, (20 - g.0[2]) as f64]);
        let config = EvolveConfig { population: 16, generations: 20, ..Default::default() };
        let a = nsga2_run(&eval, &spec, &config, &derive_stream(13, "repro")).unwrap();
        let b = nsga2_run(&eval, &spec, &config, &derive_stream(13, "repro")).unwrap();
        let ga: Vec<_> = a.population.iter().map(|i| i.genotype.clone()).collect();
        let gb: Vec<_> = b.population.iter().map(|i| i.genotype.clone()).collect();
        assert_eq!(ga, gb);
        for g in &ga {
            spec.validate(g).unwrap();
        }
    }

    #[test]
    fn config_validation() {
        assert!(EvolveConfig { population: 5, ..Default::default() }.validate().is_err());
        assert!(EvolveConfig { population: 2, ..Default::default() }.validate().is_err());
        assert!(EvolveConfig::default().validate().is_ok());
    }
}
