use blmol_core::blmol::*;
use blmol_core::evolve::{EvolveConfig, GeneSpec, GenomeSpec, Genotype};
use blmol_core::prefmoo::TrainConfig;
use blmol_core::surrogate::{fit, SampleTable, Selection, SurrogateKind, SurrogateParams};
use blmol_core::testbed::{quad_oracle, synthetic_bl, QuadOracle, QuadraticProblem, SyntheticBl, SyntheticBlConfig};
use blmol_core::vectors::PreferenceVector;
use blmol_core::{dominates, kendall_tau, RandomStream};

fn problem() -> SyntheticBl {
    synthetic_bl(SyntheticBlConfig::default()).unwrap()
}

fn small_evolve() -> EvolveConfig {
    EvolveConfig { population: 40, generations: 60, ..EvolveConfig::default() }
}

#[test]
fn sample_pairs_are_in_bounds_and_reproducible() {
    let bl = problem();
    let rng = RandomStream::root(3);
    let pairs = sample_pairs(&bl, 50, &rng);
    assert_eq!(pairs.len(), 50);
    for g in &pairs {
        bl.genome_spec().validate(g).unwrap();
        let pref = *g.genes().last().unwrap();
        assert!((1..=20).contains(&pref));
    }
    assert_eq!(pairs, sample_pairs(&bl, 50, &rng));
    let distinct: std::collections::BTreeSet<_> = pairs.iter().collect();
    assert_eq!(distinct.len(), 50);
}

#[test]
fn psm_learns_the_testbed_and_is_reproducible() {
    let bl = problem();
    let rng = RandomStream::root(5);
    let psm = build_psm(&bl, 30, Variant::Blmol, &PsmConfig::default(), &rng).unwrap();
    assert_eq!(psm.selections.len(), 2);
    assert_eq!(psm.samples.trainings, 30);
    for sel in &psm.selections {
        assert!(sel.chosen_score().ktau >= 0.5, "{:?}", sel.scores);
    }
    let again = build_psm(&bl, 30, Variant::Blmol, &PsmConfig::default(), &rng).unwrap();
    assert_eq!(psm.table.to_csv(), again.table.to_csv());
}

#[test]
fn surrogates_rank_fresh_genomes_like_the_truth() {
    let bl = problem();
    let rng = RandomStream::root(8);
    let psm = build_psm(&bl, 50, Variant::Blmol, &PsmConfig::default(), &rng).unwrap();
    let encoder = variant_encoder(&bl, Variant::Blmol);
    let fresh = sample_pairs(&bl, 20, &RandomStream::root(999));
    let predicted: Vec<Vec<f64>> = fresh.iter().map(|g| predict_raw(&encoder, &psm.selections, g).unwrap()).collect();
    let truth: Vec<Vec<f64>> = fresh.iter().map(|g| bl.true_objectives(g).unwrap()).collect();
    for j in 0..2 {
        let p: Vec<f64> = predicted.iter().map(|v| v[j]).collect();
        let t: Vec<f64> = truth.iter().map(|v| v[j]).collect();
        assert!(kendall_tau(&p, &t).unwrap() > 0.0);
    }
}

#[test]
fn search_archive_is_bounded_and_mutually_non_dominated() {
    let bl = problem();
    let rng = RandomStream::root(9);
    let psm = build_psm(&bl, 30, Variant::Blmol, &PsmConfig::default(), &rng).unwrap();
    let config = small_evolve();
    let archive = search(&bl, Variant::Blmol, &psm.selections, &config, &rng.derive("search")).unwrap();
    assert!(!archive.is_empty() && archive.len() <= config.population);
    for a in &archive {
        for b in &archive {
            assert!(!dominates(&a.predicted, &b.predicted).unwrap());
        }
    }
    let again = search(&bl, Variant::Blmol, &psm.selections, &config, &rng.derive("search")).unwrap();
    assert_eq!(archive, again);
}

fn constant_selections(width: usize) -> Vec<Selection> {
    let table = SampleTable::new(vec![vec![0.0; width], vec![1.0; width]], vec![vec![2.0, 3.0], vec![2.0, 3.0]]).unwrap();
    (0..2)
        .map(|j| {
            let surrogate = fit(SurrogateKind::Knn, &table, j, &SurrogateParams::default(), &RandomStream::root(0)).unwrap();
            Selection { surrogate, scores: Vec::new() }
        })
        .collect()
}

#[test]
fn constant_surrogates_give_a_single_objective_point() {
    let bl = problem();
    let width = variant_encoder(&bl, Variant::Blmol).layout().width();
    let archive = search(&bl, Variant::Blmol, &constant_selections(width), &small_evolve(), &RandomStream::root(1)).unwrap();
    assert!(archive.len() > 1);
    assert!(archive.iter().all(|e| e.predicted == vec![2.0, 3.0]));
}

/// One categorical gene plus a two-entry preference set; objectives are the
/// gene value and a constant.
struct OneGene {
    spec: GenomeSpec,
    prefs: Vec<PreferenceVector<f64>>,
    train: TrainConfig,
}

impl OneGene {
    fn new() -> Self {
        Self {
            spec: GenomeSpec::new(vec![GeneSpec::categorical(7), GeneSpec::index(1, 2)]),
            prefs: vec![PreferenceVector::new(vec![0.5, 0.5]).unwrap(), PreferenceVector::new(vec![0.2, 0.8]).unwrap()],
            train: TrainConfig { epochs: 1, ..TrainConfig::default() },
        }
    }
}

impl BlProblem for OneGene {
    type Oracle = QuadOracle<f64>;
    fn genome_spec(&self) -> &GenomeSpec {
        &self.spec
    }
    fn preferences(&self) -> &[PreferenceVector<f64>] {
        &self.prefs
    }
    fn objective_names(&self) -> Vec<String> {
        vec!["gene".into(), "flat".into()]
    }
    fn senses(&self) -> Vec<Sense> {
        vec![Sense::Maximize, Sense::Minimize]
    }
    fn train_config(&self) -> &TrainConfig {
        &self.train
    }
    fn oracle(&self, _g: &Genotype) -> Result<QuadOracle<f64>, String> {
        Ok(quad_oracle(QuadraticProblem::new(vec![vec![0.0], vec![1.0]]).unwrap()))
    }
    fn evaluate(&self, g: &Genotype, _o: &mut QuadOracle<f64>, _w: &[f64]) -> Result<Vec<f64>, String> {
        Ok(vec![g.genes()[0] as f64, 1.0])
    }
}

#[test]
fn monotone_surrogate_drives_the_gene_to_its_extreme() {
    let p = OneGene::new();
    let encoder = variant_encoder(&p, Variant::Blmol);
    // exhaustive table over the whole space
    let mut features = Vec::new();
    let mut targets = Vec::new();
    for v in 0..7 {
        for r in 1..=2 {
            features.push(encoder.encode(&Genotype(vec![v, r])).unwrap());
            targets.push(vec![v as f64, 1.0]);
        }
    }
    let table = SampleTable::new(features, targets).unwrap();
    let params = SurrogateParams { knn_k: 1, ..SurrogateParams::default() };
    let selections: Vec<Selection> = (0..2)
        .map(|j| Selection { surrogate: fit(SurrogateKind::Knn, &table, j, &params, &RandomStream::root(0)).unwrap(), scores: vec![] })
        .collect();
    let archive = search(&p, Variant::Blmol, &selections, &small_evolve(), &RandomStream::root(2)).unwrap();
    assert!(archive.iter().all(|e| e.genotype.genes()[0] == 6), "{archive:?}");
}

#[test]
fn realize_counts_targets_and_repeats() {
    let bl = problem();
    let rng = RandomStream::root(12);
    let psm = build_psm(&bl, 20, Variant::Blmol, &PsmConfig::default(), &rng).unwrap();
    let archive = search(&bl, Variant::Blmol, &psm.selections, &small_evolve(), &rng.derive("search")).unwrap();
    let five = Targets::Preferences(vec![vec![0.9, 0.1], vec![0.75, 0.25], vec![0.5, 0.5], vec![0.25, 0.75], vec![0.1, 0.9]]);
    let realized = realize(&bl, Variant::Blmol, &archive, &five, 5, &rng.derive("realize")).unwrap();
    assert_eq!(realized.len(), 5);
    assert_eq!(realize_budget(archive.len(), &five, 5), 25);
    for r in &realized {
        assert_eq!(r.runs.len(), 5);
        let seeds: std::collections::BTreeSet<u64> = r.runs.iter().map(|(s, _)| *s).collect();
        assert_eq!(seeds.len(), 5);
        assert!(archive.iter().any(|e| e.genotype == r.genotype));
    }
    let all = realize(&bl, Variant::Blmol, &archive, &Targets::TopK(archive.len() + 3), 1, &rng).unwrap();
    let mut got: Vec<_> = all.iter().map(|r| r.genotype.clone()).collect();
    got.sort();
    let mut want: Vec<_> = archive.iter().map(|e| e.genotype.clone()).collect();
    want.sort();
    assert_eq!(got, want);
    assert!(matches!(realize(&bl, Variant::Blmol, &[], &five, 1, &rng), Err(BlmolError::EmptyArchive)));
}

#[test]
fn nearest_member_to_each_direction_is_chosen() {
    let archive: Vec<ArchiveEntry> = [[0.0, 4.0], [1.0, 1.0], [4.0, 0.0]]
        .iter()
        .enumerate()
        .map(|(i, p)| ArchiveEntry { genotype: Genotype(vec![i as i64]), predicted: p.to_vec() })
        .collect();
    let senses = [Sense::Minimize, Sense::Minimize];
    let chosen = choose_targets(&archive, &senses, &Targets::Preferences(vec![vec![0.0, 1.0], vec![1.0, 1.0], vec![1.0, 0.0]])).unwrap();
    assert_eq!(chosen, vec![0, 1, 2]);
    assert_eq!(choose_targets(&archive, &senses, &Targets::TopK(2)).unwrap(), vec![0, 2]);
}

#[test]
fn random_search_spends_exactly_its_budget() {
    let bl = problem();
    let out = random_search(&bl, 100, &RandomStream::root(4)).unwrap();
    assert_eq!(out.samples.trainings, 100);
    assert_eq!(out.samples.objectives.len(), 100);
    assert!(!out.front.is_empty());
    assert_eq!(out, random_search(&bl, 100, &RandomStream::root(4)).unwrap());
}

#[test]
fn ws_encoding_drops_the_preference() {
    let bl = problem();
    let full = variant_encoder(&bl, Variant::Blmol).layout().width();
    let ws = variant_encoder(&bl, Variant::BlmolWs).layout().width();
    assert_eq!(full - ws, 2);
    assert_eq!(variant_train_config(&bl, Variant::BlmolWs).solver, blmol_core::Solver::Ws);
}

#[test]
fn frozen_preference_gene_never_varies() {
    let bl = problem();
    let spec = variant_search_spec(&bl, Variant::BlmolI);
    assert!(spec.genes.last().unwrap().frozen);
    let config = PipelineConfig {
        variant: Variant::BlmolI,
        samples: 20,
        psm: PsmConfig::default(),
        evolve: small_evolve(),
        targets: Targets::TopK(3),
        repeats: 1,
    };
    let run = run_pipeline(&bl, &config, 6).unwrap();
    assert_eq!(run.trainings, 20 + 3);
    assert_eq!(run, run_pipeline(&bl, &config, 6).unwrap());
}

#[test]
fn invalid_training_rows_abort_above_twenty_percent() {
    struct Failing(OneGene);
    impl BlProblem for Failing {
        type Oracle = QuadOracle<f64>;
        fn genome_spec(&self) -> &GenomeSpec {
            self.0.genome_spec()
        }
        fn preferences(&self) -> &[PreferenceVector<f64>] {
            self.0.preferences()
        }
        fn objective_names(&self) -> Vec<String> {
            self.0.objective_names()
        }
        fn senses(&self) -> Vec<Sense> {
            self.0.senses()
        }
        fn train_config(&self) -> &TrainConfig {
            self.0.train_config()
        }
        fn oracle(&self, g: &Genotype) -> Result<QuadOracle<f64>, String> {
            if g.genes()[0] < 3 { Err("diverged".into()) } else { self.0.oracle(g) }
        }
        fn evaluate(&self, g: &Genotype, o: &mut QuadOracle<f64>, w: &[f64]) -> Result<Vec<f64>, String> {
            self.0.evaluate(g, o, w)
        }
    }
    let p = Failing(OneGene::new());
    let err = collect_samples(&p, 14, Variant::Blmol, &RandomStream::root(1)).unwrap_err();
    assert!(matches!(err, BlmolError::TooManyInvalid { .. }), "{err}");
}
