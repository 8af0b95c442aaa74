use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use blmol_core::blmol::{
    collect_samples, fit_surrogates, preference_of, random_search, realize, sample_table, search, variant_encoder,
    BlProblem, Variant,
};
use blmol_core::numfmt::format_g17;
use blmol_core::surrogate::{SampleTable, Selection};
use blmol_core::{Genotype, RandomStream};
use blmol_supernet::DatasetSummary;
use serde::Serialize;

use crate::artifacts::*;
use crate::config::{ProblemConfig, RunConfig};
use crate::error::{CliError, CliResult};
use crate::problem::{generate_dataset, instantiate, with_problem, Instance};

/// Flags shared by the stage commands.
#[derive(Debug, Clone, Default)]
pub struct StageOptions {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub resume: bool,
}

/// Files and counters a stage produced.
struct StageOutput {
    files: Vec<(&'static str, Vec<u8>)>,
    trainings: usize,
    invalid: usize,
}

impl StageOutput {
    fn files(files: Vec<(&'static str, Vec<u8>)>) -> Self {
        Self { files, trainings: 0, invalid: 0 }
    }
}

fn load_config(opts: &StageOptions) -> CliResult<(RunConfig, u64, PathBuf)> {
    let mut config = RunConfig::load(&opts.config)?;
    if opts.seed.is_some() {
        config.seed = opts.seed;
    }
    if opts.out.is_some() {
        config.out = opts.out.clone();
    }
    let seed = config.seed.ok_or_else(|| CliError::config("at `seed`: required (pass --seed)"))?;
    let dir = config.out.clone().unwrap_or_else(|| PathBuf::from("run"));
    Ok((config, seed, dir))
}

/// A configured run bound to its output directory.
pub struct Run {
    pub config: RunConfig,
    pub seed: u64,
    pub dir: PathBuf,
    pub instance: Instance,
    pub problem_hash: String,
    pub config_hash: String,
    resume: bool,
}

impl Run {
    pub fn open(opts: &StageOptions) -> CliResult<Run> {
        let (config, seed, dir) = load_config(opts)?;
        let (instance, problem_hash) = instantiate(&config.problem)?;
        fs::create_dir_all(&dir)?;
        let config_hash = config.hash();
        Ok(Run { config, seed, dir, instance, problem_hash, config_hash, resume: opts.resume })
    }

    fn root(&self) -> RandomStream {
        RandomStream::root(self.seed)
    }

    fn variant(&self) -> Variant {
        self.config.variant
    }

    fn meta(&self) -> CliResult<Meta> {
        let (objectives, senses) = with_problem!(&self.instance, p => (p.objective_names(), p.senses()));
        match Meta::read(&self.dir)? {
            Some(mut meta) => {
                if meta.problem_hash != self.problem_hash || meta.seed != self.seed || meta.variant != self.variant() {
                    return Err(CliError::config(format!(
                        "{} holds a run with a different problem, seed or variant",
                        self.dir.display()
                    )));
                }
                meta.config_hash = self.config_hash.clone();
                meta.config = self.config.clone();
                Ok(meta)
            }
            None => Ok(Meta {
                version: env!("CARGO_PKG_VERSION").to_string(),
                config_hash: self.config_hash.clone(),
                problem_hash: self.problem_hash.clone(),
                seed: self.seed,
                variant: self.variant(),
                objectives,
                senses,
                config: self.config.clone(),
                stages: BTreeMap::new(),
            }),
        }
    }

    /// Runs `compute` unless `--resume` finds its outputs current, then
    /// writes the outputs and records the stage in `meta.json`.
    fn execute(
        &self,
        stage: &'static str,
        inputs: &[(&'static str, &'static str)],
        outputs: &[&'static str],
        compute: impl FnOnce(&[String]) -> CliResult<StageOutput>,
    ) -> CliResult<()> {
        for &(file, producer) in upstream(stage) {
            if !self.dir.join(file).is_file() {
                return Err(CliError::MissingStage(producer));
            }
        }
        let mut texts = Vec::new();
        let mut input_hashes = BTreeMap::new();
        for &(file, producer) in inputs {
            let (path, text) = require(&self.dir, file, producer)?;
            input_hashes.insert(file.to_string(), file_hash(&path)?);
            texts.push(text);
        }
        let mut meta = self.meta()?;
        if self.resume {
            if let Some(rec) = meta.stages.get(stage) {
                let current = rec.config_hash == self.config_hash
                    && rec.inputs == input_hashes
                    && outputs.iter().all(|f| {
                        let path = self.dir.join(f);
                        path.is_file() && file_hash(&path).ok().as_ref() == rec.outputs.get(*f)
                    });
                if current {
                    println!("{stage}: up to date");
                    return Ok(());
                }
            }
        }
        let start = Instant::now();
        let out = compute(&texts)?;
        let mut output_hashes = BTreeMap::new();
        for (file, bytes) in &out.files {
            fs::write(self.dir.join(file), bytes)?;
            output_hashes.insert(file.to_string(), crate::config::sha256_hex(bytes));
        }
        meta.stages.insert(
            stage.to_string(),
            StageRecord {
                config_hash: self.config_hash.clone(),
                inputs: input_hashes,
                outputs: output_hashes,
                trainings: out.trainings,
                invalid: out.invalid,
                wall_clock_seconds: start.elapsed().as_secs_f64(),
            },
        );
        meta.write(&self.dir)?;
        let files: Vec<&str> = out.files.iter().map(|(f, _)| *f).collect();
        println!("{stage}: {} trainings, wrote {}", out.trainings, files.join(", "));
        Ok(())
    }

    fn staged_variant(&self) -> CliResult<()> {
        if self.variant() == Variant::RandomSearch {
            return Err(CliError::config("at `variant`: random_search has no staged pipeline; use `baseline`"));
        }
        Ok(())
    }

    pub fn sample(&self) -> CliResult<()> {
        self.staged_variant()?;
        with_problem!(&self.instance, p => self.execute("sample", &[], &[SAMPLES], |_| sample_stage(self, p)))
    }

    pub fn fit(&self) -> CliResult<()> {
        self.staged_variant()?;
        with_problem!(&self.instance, p => self.execute("fit", &[(SAMPLES, "sample")], &[SURROGATES, CV], |t| fit_stage(self, p, &t[0])))
    }

    pub fn search(&self) -> CliResult<()> {
        self.staged_variant()?;
        with_problem!(&self.instance, p => self.execute("search", &[(SURROGATES, "fit")], &[ARCHIVE], |t| search_stage(self, p, &t[0])))
    }

    pub fn realize(&self) -> CliResult<()> {
        self.staged_variant()?;
        with_problem!(&self.instance, p => self.execute("realize", &[(ARCHIVE, "search")], &[REALIZED], |t| realize_stage(self, p, &t[0])))
    }

    /// Random search, or the full staged pipeline for the BLMOL-I and
    /// BLMOL-WS variants.
    pub fn baseline(&self) -> CliResult<()> {
        match self.variant() {
            Variant::RandomSearch => {
                with_problem!(&self.instance, p => self.execute("baseline", &[], &[BASELINE], |_| baseline_stage(self, p)))
            }
            Variant::BlmolI | Variant::BlmolWs => {
                self.sample()?;
                self.fit()?;
                self.search()?;
                self.realize()
            }
            Variant::Blmol => {
                Err(CliError::config("at `variant`: baseline runs random_search, blmol_i or blmol_ws"))
            }
        }
    }
}

/// Files every earlier stage leaves behind, in pipeline order.
fn upstream(stage: &str) -> &'static [(&'static str, &'static str)] {
    const CHAIN: [(&str, &str); 3] = [(SAMPLES, "sample"), (SURROGATES, "fit"), (ARCHIVE, "search")];
    match stage {
        "fit" => &CHAIN[..1],
        "search" => &CHAIN[..2],
        "realize" => &CHAIN[..3],
        _ => &[],
    }
}

fn sample_stage<P: BlProblem>(run: &Run, p: &P) -> CliResult<StageOutput> {
    let samples = collect_samples(p, run.config.samples, run.variant(), &run.root().derive("sample"))?;
    for (g, message) in &samples.invalid {
        eprintln!("warning: training of {g} failed: {message}");
    }
    let table = sample_table(&variant_encoder(p, run.variant()), &samples)?;
    Ok(StageOutput {
        files: vec![(SAMPLES, table.to_csv().into_bytes())],
        trainings: samples.trainings,
        invalid: samples.invalid.len(),
    })
}

fn fit_stage<P: BlProblem>(run: &Run, p: &P, samples: &str) -> CliResult<StageOutput> {
    let table = SampleTable::from_csv(samples).map_err(|e| CliError::other(format!("{SAMPLES}: {e}")))?;
    let names = p.objective_names();
    if table.objectives() != names.len() {
        return Err(CliError::other(format!(
            "{SAMPLES}: {} objective columns, problem has {}",
            table.objectives(),
            names.len()
        )));
    }
    let selections = fit_surrogates(&table, &run.config.psm, &run.root().derive("fit"))?;
    let mut cv = Table::new(&["objective", "kind", "ktau", "mse", "selected"]);
    println!("{:<14} {:<8} {:>10} {:>12}  selected", "objective", "kind", "ktau", "mse");
    for (name, sel) in names.iter().zip(&selections) {
        for ks in &sel.scores {
            let chosen = ks.kind == sel.surrogate.kind;
            cv.row(&[
                name.clone(),
                ks.kind.name().to_string(),
                format_g17(ks.score.ktau),
                format_g17(ks.score.mse),
                u8::from(chosen).to_string(),
            ]);
            println!(
                "{:<14} {:<8} {:>10.4} {:>12.4e}  {}",
                name,
                ks.kind.name(),
                ks.score.ktau,
                ks.score.mse,
                if chosen { "*" } else { "" }
            );
        }
    }
    let mut json = serde_json::to_string(&selections).expect("surrogates serialize");
    json.push('\n');
    Ok(StageOutput::files(vec![(SURROGATES, json.into_bytes()), (CV, cv.into_bytes())]))
}

fn search_stage<P: BlProblem>(run: &Run, p: &P, surrogates: &str) -> CliResult<StageOutput> {
    let selections: Vec<Selection> =
        serde_json::from_str(surrogates).map_err(|e| CliError::other(format!("{SURROGATES}: {e}")))?;
    let archive = search(p, run.variant(), &selections, &run.config.evolve, &run.root().derive("search"))?;
    println!("search: archive holds {} members", archive.len());
    let bytes = archive_csv(&archive, p.genome_spec().len(), &p.objective_names());
    Ok(StageOutput::files(vec![(ARCHIVE, bytes)]))
}

/// Preference the lower level actually trains with.
fn effective_preference<P: BlProblem>(p: &P, variant: Variant, g: &Genotype) -> Vec<f64> {
    let r = preference_of(p, g).values().to_vec();
    if variant == Variant::BlmolWs {
        vec![1.0 / r.len() as f64; r.len()]
    } else {
        r
    }
}

fn preference_header(m: usize) -> impl Iterator<Item = String> {
    (0..m).map(|j| format!("r{j}"))
}

fn realize_stage<P: BlProblem>(run: &Run, p: &P, archive_text: &str) -> CliResult<StageOutput> {
    let names = p.objective_names();
    let archive = parse_archive(archive_text, &names)?;
    for (i, e) in archive.iter().enumerate() {
        p.genome_spec()
            .validate(&e.genotype)
            .map_err(|err| CliError::other(format!("{ARCHIVE}: line {}: {err}", i + 2)))?;
    }
    let realized = realize(p, run.variant(), &archive, &run.config.targets, run.config.repeats, &run.root().derive("realize"))?;
    let width = p.genome_spec().len();
    let m = p.preferences()[0].len();
    let header: Vec<String> = ["target".to_string()]
        .into_iter()
        .chain(gene_header(width))
        .chain(preference_header(m))
        .chain(["repeat".to_string(), "stream".to_string()])
        .chain(names.iter().cloned())
        .collect();
    let mut t = Table::new(&header);
    let mut trainings = 0;
    for r in &realized {
        let pref = effective_preference(p, run.variant(), &r.genotype);
        for (q, (stream, values)) in r.runs.iter().enumerate() {
            trainings += 1;
            let row: Vec<String> = [r.target.to_string()]
                .into_iter()
                .chain(genes(&r.genotype))
                .chain(reals(&pref))
                .chain([q.to_string(), stream.to_string()])
                .chain(reals(values))
                .collect();
            t.row(&row);
        }
    }
    Ok(StageOutput { files: vec![(REALIZED, t.into_bytes())], trainings, invalid: 0 })
}

fn baseline_stage<P: BlProblem>(run: &Run, p: &P) -> CliResult<StageOutput> {
    let budget = run.config.random_budget();
    let result = random_search(p, budget, &run.root().derive("random_search"))?;
    let names = p.objective_names();
    let width = p.genome_spec().len();
    let m = p.preferences()[0].len();
    let header: Vec<String> = gene_header(width)
        .chain(preference_header(m))
        .chain(names.iter().cloned())
        .chain(["front".to_string()])
        .collect();
    let mut t = Table::new(&header);
    for (i, (g, values)) in result.samples.genotypes.iter().zip(&result.samples.objectives).enumerate() {
        let row: Vec<String> = genes(g)
            .chain(reals(preference_of(p, g).values()))
            .chain(reals(values))
            .chain([u8::from(result.front.contains(&i)).to_string()])
            .collect();
        t.row(&row);
    }
    println!("baseline: {} evaluated, {} on the front", result.samples.genotypes.len(), result.front.len());
    Ok(StageOutput {
        files: vec![(BASELINE, t.into_bytes())],
        trainings: result.samples.trainings,
        invalid: result.samples.invalid.len(),
    })
}

#[derive(Serialize)]
struct Manifest<'a> {
    seed: u64,
    summary: DatasetSummary,
    nodes_per_graph: Vec<usize>,
    config: &'a blmol_supernet::SbmConfig,
}

/// Writes `dataset.json` and `dataset.manifest.json` for a synthetic graph
/// problem.
pub fn gen_data(opts: &StageOptions) -> CliResult<()> {
    let (config, seed, dir) = load_config(opts)?;
    let ProblemConfig::SupernetSynth(synth) = &config.problem else {
        return Err(CliError::config("at `problem.kind`: gen-data needs a supernet-synth problem"));
    };
    let ds = generate_dataset(&synth.sbm, seed)?;
    let manifest = Manifest {
        seed,
        summary: DatasetSummary::of(&ds),
        nodes_per_graph: ds.graphs.iter().map(|g| g.num_nodes()).collect(),
        config: &synth.sbm,
    };
    fs::create_dir_all(&dir)?;
    let mut json = ds.to_json();
    json.push('\n');
    fs::write(dir.join("dataset.json"), json)?;
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(dir.join("dataset.manifest.json"), text)?;
    println!(
        "gen-data: {} graphs, {} nodes, feature width {} -> {}",
        manifest.summary.graphs,
        manifest.summary.nodes,
        manifest.summary.attribute_width,
        dir.join("dataset.json").display()
    );
    Ok(())
}
