//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so every line reaches the terminal.

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use blmol_cli::artifacts::{Meta, ReadTable};
use blmol_core::blmol::{
    predict_raw, run_pipeline, sample_pairs, variant_encoder, BlProblem, PipelineConfig, PsmConfig, Targets, Variant,
};
use blmol_core::prefmoo::{train_preference, Optimizer, Solver, TrainConfig};
use blmol_core::stats::median;
use blmol_core::surrogate::{fit, select_best, SampleTable, SurrogateKind, SurrogateParams};
use blmol_core::testbed::{quad_oracle, synthetic_bl, QuadraticProblem, SyntheticBlConfig, TESTBED_EPS_TRACK};
use blmol_core::{
    dominates, hypervolume, kendall_tau, non_dominated_sort, simplex_lattice, EvolveConfig, Genotype,
    PreferenceVector, RandomStream,
};
use blmol_supernet::genome::{chain_skip_genes, fusion_gene_count, genome_spec, skip_gene_count};
use blmol_supernet::*;

type Outcome = Result<String, String>;

fn ensure(cond: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(message())
    }
}

fn plain(solver: Solver) -> TrainConfig {
    TrainConfig {
        optimizer: Optimizer::Plain,
        lr: 0.05,
        epochs: 2000,
        batches_per_epoch: 1,
        solver,
        eps_track: TESTBED_EPS_TRACK,
    }
}

fn pref(v: &[f64]) -> PreferenceVector {
    PreferenceVector::new(v.to_vec()).unwrap()
}

/// Root of `r1 F1 = r2 F2` on [0, 2] for losses `w^2/2` and `(w-2)^2/2`.
fn balance_point(r: &[f64]) -> f64 {
    let g = |w: f64| r[0] * w * w / 2.0 - r[1] * (w - 2.0) * (w - 2.0) / 2.0;
    let (mut lo, mut hi) = (0.0, 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn epo_exactness() -> Outcome {
    let mut worst_w: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for raw in [[1.0, 3.0], [0.5, 0.5]] {
        let expected = balance_point(&raw);
        let r = pref(&raw);
        for seed in 0..5 {
            let mut oracle = quad_oracle(QuadraticProblem::new(vec![vec![0.0], vec![2.0]]).unwrap());
            let (w, _) = train_preference(&mut oracle, &r, &plain(Solver::Epo), &mut RandomStream::root(seed))
                .map_err(|e| e.to_string())?;
            let f = [w[0] * w[0] / 2.0, (w[0] - 2.0) * (w[0] - 2.0) / 2.0];
            worst_w = worst_w.max((w[0] - expected).abs());
            worst_ratio = worst_ratio.max((r[0] * f[0] / (r[1] * f[1]) - 1.0).abs());
        }
    }
    ensure((balance_point(&[1.0, 3.0]) - (3.0 - 3f64.sqrt())).abs() < 1e-12, || "oracle disagrees with 3 - sqrt 3".into())?;
    ensure(worst_w <= 1e-3 && worst_ratio <= 1e-3, || format!("|w - w*| = {worst_w:.2e}, |ratio - 1| = {worst_ratio:.2e}"))?;
    Ok(format!("max |w - w*| = {worst_w:.1e}, max |r1F1/r2F2 - 1| = {worst_ratio:.1e}"))
}

fn ls_correctness() -> Outcome {
    let raw = [0.25, 0.75];
    let expected = (raw[0] * 0.0 + raw[1] * 2.0) / (raw[0] + raw[1]);
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let mut oracle = quad_oracle(QuadraticProblem::new(vec![vec![0.0], vec![2.0]]).unwrap());
        let (w, _) = train_preference(&mut oracle, &pref(&raw), &plain(Solver::Ls), &mut RandomStream::root(seed))
            .map_err(|e| e.to_string())?;
        worst = worst.max((w[0] - expected).abs());
    }
    ensure(expected == 1.5 && worst <= 1e-4, || format!("|w - 1.5| = {worst:.2e}"))?;
    Ok(format!("max |w - 1.5| = {worst:.1e}"))
}

fn angle_to_ray(f: &[f64], r: &[f64]) -> f64 {
    let r: Vec<f64> = r.iter().map(|v| 1.0 / v).collect();
    let dot: f64 = f.iter().zip(&r).map(|(a, b)| a * b).sum();
    let nf = f.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nr = r.iter().map(|a| a * a).sum::<f64>().sqrt();
    (dot / (nf * nr)).clamp(-1.0, 1.0).acos()
}

fn disjoint_ray() -> Outcome {
    let losses = |w: f64| [w * w / 2.0, (w - 2.0) * (w - 2.0) / 2.0 + 1.0];
    let r = pref(&[0.1, 0.9]);
    let front: Vec<[f64; 2]> = (0..=1000).map(|i| losses(2.0 * i as f64 / 1000.0)).collect();
    ensure(front.iter().all(|f| r[0] * f[0] < r[1] * f[1]), || "ray meets the front".into())?;
    let best = front.iter().map(|f| angle_to_ray(f, r.values())).fold(f64::INFINITY, f64::min);
    let problem = QuadraticProblem::with_terms(vec![vec![0.0], vec![2.0]], vec![1.0, 1.0], vec![0.0, 1.0]).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let mut oracle = quad_oracle(problem.clone());
        let (w, _) = train_preference(&mut oracle, &r, &plain(Solver::Epo), &mut RandomStream::root(seed))
            .map_err(|e| e.to_string())?;
        worst = worst.max(angle_to_ray(&losses(w[0]), r.values()) - best);
    }
    ensure(worst <= 1e-2, || format!("angular gap {worst:.3e} rad"))?;
    Ok(format!("angular gap to the best of 1001 front points = {worst:.1e} rad"))
}

fn brute_force_fronts(points: &[Vec<f64>]) -> Vec<BTreeSet<usize>> {
    let dom = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y);
    let mut left: BTreeSet<usize> = (0..points.len()).collect();
    let mut fronts = Vec::new();
    while !left.is_empty() {
        let front: BTreeSet<usize> =
            left.iter().copied().filter(|&i| !left.iter().any(|&j| dom(&points[j], &points[i]))).collect();
        left = left.difference(&front).copied().collect();
        fronts.push(front);
    }
    fronts
}

fn monte_carlo_hv(front: &[Vec<f64>], reference: &[f64], samples: usize, rng: &mut RandomStream) -> f64 {
    let m = reference.len();
    let lo: Vec<f64> = (0..m).map(|j| front.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min)).collect();
    let volume: f64 = (0..m).map(|j| reference[j] - lo[j]).product();
    let mut hits = 0usize;
    let mut x = vec![0.0; m];
    for _ in 0..samples {
        for j in 0..m {
            x[j] = lo[j] + rng.uniform() * (reference[j] - lo[j]);
        }
        if front.iter().any(|p| p.iter().zip(&x).all(|(a, b)| a <= b)) {
            hits += 1;
        }
    }
    volume * hits as f64 / samples as f64
}

fn pareto_machinery() -> Outcome {
    let mut rng = RandomStream::root(4).derive("pareto");
    for instance in 0..100 {
        let n = 1 + rng.index(200);
        let m = 1 + rng.index(3);
        let grid = instance % 2 == 0;
        let points: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| if grid { rng.index(6) as f64 } else { rng.uniform() }).collect())
            .collect();
        let fast: Vec<BTreeSet<usize>> =
            non_dominated_sort(&points).map_err(|e| e.to_string())?.into_iter().map(|f| f.into_iter().collect()).collect();
        ensure(fast == brute_force_fronts(&points), || format!("instance {instance} (n={n}, m={m}) differs"))?;
    }
    let example = hypervolume(&[[1.0, 2.0], [2.0, 1.0]], &[3.0, 3.0]).map_err(|e| e.to_string())?;
    ensure(example == 3.0, || format!("example HV {example}"))?;
    let mut worst: f64 = 0.0;
    for m in [2usize, 3] {
        let reference = vec![1.0; m];
        let front: Vec<Vec<f64>> = (0..12)
            .map(|_| {
                let v: Vec<f64> = (0..m).map(|_| 0.05 + rng.uniform()).collect();
                let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                v.iter().map(|a| a / norm * 0.8).collect()
            })
            .collect();
        let exact = hypervolume(&front, &reference).map_err(|e| e.to_string())?;
        let mc = monte_carlo_hv(&front, &reference, 1_000_000, &mut rng);
        worst = worst.max((exact - mc).abs() / exact);
    }
    ensure(worst < 0.01, || format!("Monte Carlo relative gap {worst:.3e}"))?;
    Ok(format!("100 sorts exact, example HV = 3, Monte Carlo gap {:.2}%", worst * 100.0))
}

fn lattice() -> Outcome {
    let n = simplex_lattice::<f64>(2, 19).len();
    ensure(n == 20, || format!("(2,19) has {n} members"))?;
    for h in 1..=10usize {
        let count = simplex_lattice::<f64>(3, h).len();
        let expected = (h + 2) * (h + 1) / 2;
        ensure(count == expected, || format!("(3,{h}) has {count}, expected {expected}"))?;
    }
    Ok("(2,19) = 20; (3,H) = C(H+2,2) for H = 1..10".into())
}

fn encoding_fidelity() -> Outcome {
    ensure(encoding_length(3) == 15, || format!("D(3) = {}", encoding_length(3)))?;
    ensure(skip_gene_count(3) == 10 && fusion_gene_count(3) == 4, || "gene counts differ".into())?;
    let mut chain = chain_skip_genes(3);
    chain.extend([Fusion::Mean.code(); 4]);
    chain.push(1);
    let t = Topology::decode(3, &Genotype(chain.clone())).map_err(|e| e.to_string())?;
    ensure(!t.repaired && t.blocks.iter().enumerate().all(|(b, block)| block.inputs == vec![b]), || format!("{t:?}"))?;
    ensure(t.encode().0 == chain, || "chain does not round-trip".into())?;
    let spec = genome_spec(3, 21);
    let mut rng = RandomStream::root(6).derive("genomes");
    let mut repaired = 0;
    for _ in 0..1000 {
        let g = spec.sample(&mut rng);
        let t = Topology::decode(3, &g).map_err(|e| e.to_string())?;
        let back = t.encode();
        if t.repaired {
            repaired += 1;
            ensure(Topology::decode(3, &back).map_err(|e| e.to_string())? == Topology { repaired: false, ..t.clone() }, || {
                format!("repaired genome {g} does not stabilize")
            })?;
        } else {
            ensure(back == g, || format!("{g} round-trips to {back}"))?;
        }
    }
    Ok(format!("D = 15, 10 skip + 4 fusion genes, chain decodes to the plain stack, 1000 round trips ({repaired} repaired)"))
}

fn autodiff() -> Outcome {
    let ds = synth_dataset(&SbmConfig { graphs: 5, nodes: 8, ..SbmConfig::default() }, &RandomStream::root(11))
        .map_err(|e| e.to_string())?;
    let batch = ds.batch(&[0, 1, 2, 3, 4]);
    let mut worst: f64 = 0.0;
    for fusion in Fusion::ALL {
        for skips in [vec![1i64; 10], vec![1, 1, 0, 1, 0, 1, 1, 0, 1, 1]] {
            let mut genes = skips.clone();
            genes.extend([fusion.code(); 4]);
            genes.push(1);
            let config = ModelConfig {
                hidden: 16,
                feature_width: ds.feature_width(),
                node_classes: ds.node_classes,
                graph_classes: ds.graph_classes,
                tasks: TaskSet::all(),
            };
            let plan = ComputationPlan::new(Topology::decode(3, &Genotype(genes)).map_err(|e| e.to_string())?, config);
            let mut rng = RandomStream::root(5).derive(fusion.name());
            let w = plan.layout().initialize(&mut rng);
            let mut coords: Vec<usize> = (0..w.len()).collect();
            rng.shuffle(&mut coords);
            coords.truncate(20);
            for e in &plan.layout().entries {
                if e.name.contains(".concat.") || e.name.contains(".lstm.") || e.name.contains(".att.") {
                    coords.extend((0..3.min(e.len())).map(|i| e.offset + (i * 7919) % e.len()));
                }
            }
            let report = finite_difference_check(&plan, &w, &batch, &coords, 1e-4).map_err(|e| e.to_string())?;
            ensure(report.relative_error.len() == 3, || "not every task loss was checked".into())?;
            worst = worst.max(report.max_error());
        }
    }
    ensure(worst < 1e-4, || format!("relative error {worst:.3e}"))?;
    Ok(format!("6 fusions x 3 task losses, max relative error {worst:.1e}"))
}

fn surrogate_mechanism() -> Outcome {
    let mut rng = RandomStream::root(8).derive("table");
    let features: Vec<Vec<f64>> = (0..10).map(|_| (0..3).map(|_| rng.uniform()).collect()).collect();
    let targets: Vec<Vec<f64>> = features.iter().map(|x| vec![(3.0 * x[0]).sin() + x[1] * x[2]]).collect();
    let table = SampleTable::new(features.clone(), targets.clone()).map_err(|e| e.to_string())?;
    let stream = RandomStream::root(9);
    let gp = fit(SurrogateKind::GpRbf, &table, 0, &SurrogateParams::default(), &stream).map_err(|e| e.to_string())?;
    let gp_err = features
        .iter()
        .zip(&targets)
        .map(|(x, y)| (gp.predict(x).unwrap() - y[0]).abs())
        .fold(0.0, f64::max);
    ensure(gp_err <= 1e-6, || format!("GP interpolation error {gp_err:.2e}"))?;
    let params = SurrogateParams { knn_k: 1, ..SurrogateParams::default() };
    let knn = fit(SurrogateKind::Knn, &table, 0, &params, &stream).map_err(|e| e.to_string())?;
    ensure(features.iter().zip(&targets).all(|(x, y)| knn.predict(x).unwrap() == y[0]), || "knn k=1 misses a target".into())?;
    let a = select_best(&table, &SurrogateKind::ALL, 5, &SurrogateParams::default(), &stream).map_err(|e| e.to_string())?;
    let b = select_best(&table, &SurrogateKind::ALL, 5, &SurrogateParams::default(), &stream).map_err(|e| e.to_string())?;
    ensure(a == b, || "selection is not deterministic".into())?;
    let best = a[0].scores.iter().map(|s| s.score.ktau).fold(f64::NEG_INFINITY, f64::max);
    ensure(a[0].chosen_score().ktau == best, || "selected kind is not the KTau argmax".into())?;
    Ok(format!("GP error {gp_err:.1e}, knn exact, selected {} (KTau {best:.3})", a[0].surrogate.kind))
}

fn end_to_end_testbed() -> Outcome {
    let problem = synthetic_bl(SyntheticBlConfig::default()).map_err(|e| e.to_string())?;
    let config = |variant| PipelineConfig {
        variant,
        samples: 50,
        psm: PsmConfig::default(),
        evolve: EvolveConfig::default(),
        targets: Targets::TopK(10),
        repeats: 1,
    };
    let mut blmol_points = Vec::new();
    let mut random_points = Vec::new();
    let mut worst_tau = f64::INFINITY;
    for seed in 0..11u64 {
        let run = run_pipeline(&problem, &config(Variant::Blmol), seed).map_err(|e| e.to_string())?;
        let rs = run_pipeline(&problem, &config(Variant::RandomSearch), seed).map_err(|e| e.to_string())?;
        ensure(rs.trainings == run.trainings, || format!("budgets differ: {} vs {}", run.trainings, rs.trainings))?;
        let psm = run.psm.as_ref().expect("staged run has surrogates");
        let encoder = variant_encoder(&problem, Variant::Blmol);
        let held_out = sample_pairs(&problem, 20, &RandomStream::root(seed).derive("held_out"));
        let predicted: Vec<Vec<f64>> =
            held_out.iter().map(|g| predict_raw(&encoder, &psm.selections, g)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        let truth: Vec<Vec<f64>> =
            held_out.iter().map(|g| problem.true_objectives(g)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        for j in 0..problem.num_objectives() {
            let p: Vec<f64> = predicted.iter().map(|v| v[j]).collect();
            let t: Vec<f64> = truth.iter().map(|v| v[j]).collect();
            worst_tau = worst_tau.min(kendall_tau(&p, &t).map_err(|e| e.to_string())?);
        }
        blmol_points.push(run.true_points());
        random_points.push(rs.true_points());
    }
    let nadir: Vec<f64> = (0..2)
        .map(|j| blmol_points.iter().chain(&random_points).flatten().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let reference: Vec<f64> = nadir.iter().map(|v| 1.1 * v).collect();
    let hv = |runs: &[Vec<Vec<f64>>]| -> Result<f64, String> {
        let values = runs.iter().map(|f| hypervolume(f, &reference)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
        Ok(median(&values).expect("eleven runs"))
    };
    let (ours, theirs) = (hv(&blmol_points)?, hv(&random_points)?);
    ensure(ours >= theirs, || format!("median HV {ours:.4} < random search {theirs:.4}"))?;
    ensure(worst_tau > 0.0, || format!("held-out KTau {worst_tau:.3}"))?;
    Ok(format!(
        "median HV {ours:.4} vs random search {theirs:.4} (reference {:.3}, {:.3}); min held-out KTau {worst_tau:.3}",
        reference[0], reference[1]
    ))
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_blmol"))
}

fn run_stage(dir: &Path, stage: &str, config: &str, seed: &str, out: &str, jobs: &str) -> Result<(), String> {
    let output = binary()
        .current_dir(dir)
        .args([stage, "--config", config, "--seed", seed, "--out", out, "--jobs", jobs])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(output.status.success(), || {
        format!("`{stage}` failed: {}", String::from_utf8_lossy(&output.stderr).trim())
    })
}

const SUPERNET_SMOKE: &str = r#"{
  "problem": {
    "kind": "supernet-synth",
    "sbm": {"graphs": 60},
    "dataset_seed": 21,
    "model": {"depth": 3, "hidden": 16, "tasks": ["GC", "NC", "LP"],
              "train": {"lr": 0.01, "epochs": 20}}
  },
  "samples": 20,
  "evolve": {"population": 40, "generations": 100},
  "targets": {"preferences": [[1, 1, 1], [0.6, 0.2, 0.2], [0.2, 0.2, 0.6]]},
  "repeats": 2
}"#;

fn supernet_smoke(work: &Path) -> Outcome {
    fs::write(work.join("supernet.json"), SUPERNET_SMOKE).map_err(|e| e.to_string())?;
    for stage in ["sample", "fit", "search", "realize"] {
        run_stage(work, stage, "supernet.json", "3", "supernet", "8")?;
    }
    let dir = work.join("supernet");
    let meta = Meta::read(&dir).map_err(|e| e.to_string())?.ok_or("no meta.json")?;
    let names = vec!["gc_acc".to_string(), "nc_acc".to_string(), "lp_auc".to_string()];
    ensure(meta.objectives == names, || format!("objectives {:?}", meta.objectives))?;
    let read = |f: &str| -> Result<ReadTable, String> {
        ReadTable::parse(f, &fs::read_to_string(dir.join(f)).map_err(|e| e.to_string())?).map_err(|e| e.to_string())
    };
    let archive = read("archive.csv")?;
    let preds: Vec<Vec<f64>> = (0..archive.rows.len())
        .map(|r| names.iter().map(|n| -archive.real(r, archive.column(&format!("pred_{n}")).unwrap()).unwrap()).collect())
        .collect();
    for a in &preds {
        for b in &preds {
            ensure(!dominates(a, b).unwrap(), || "archive members dominate each other".into())?;
        }
    }
    let realized = read("realized.csv")?;
    ensure(realized.rows.len() == 6, || format!("{} realized rows", realized.rows.len()))?;
    for n in &names {
        let c = realized.column(n).map_err(|e| e.to_string())?;
        for r in 0..realized.rows.len() {
            let v = realized.real(r, c).map_err(|e| e.to_string())?;
            ensure((0.0..=1.0).contains(&v), || format!("{n} = {v}"))?;
        }
    }
    let (sampled, realize) = (meta.stages["sample"].trainings, meta.stages["realize"].trainings);
    ensure(sampled == 20 && realize == 6 && meta.trainings() == 26, || format!("trainings {sampled} + {realize}"))?;
    Ok(format!("archive of {} non-dominated members, 3 metrics on 3 targets x 2 repeats, 20 + 6 trainings", preds.len()))
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../supernet/tests/fixtures")
}

fn tudataset() -> Outcome {
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fixture_dir().join("TINY.manifest.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let ds = parse_tudataset(&fixture_dir().join("TINY"), &RandomStream::root(0)).map_err(|e| e.to_string())?;
    let s = DatasetSummary::of(&ds);
    let got = [s.graphs, s.nodes, s.edges, s.graph_classes, s.node_classes, s.attribute_width];
    let keys = ["graphs", "nodes", "edges", "graph_classes", "node_classes", "attribute_width"];
    for (k, v) in keys.iter().zip(got) {
        ensure(manifest[k].as_u64() == Some(v as u64), || format!("fixture {k} = {v}, manifest {}", manifest[k]))?;
    }
    let enzymes = std::env::var_os("BLMOL_DATA_DIR").map(|root| PathBuf::from(root).join("ENZYMES"));
    match enzymes.filter(|d| d.is_dir()) {
        Some(dir) => {
            let s = DatasetSummary::of(&parse_tudataset(&dir, &RandomStream::root(0)).map_err(|e| e.to_string())?);
            let got = (s.graphs, s.graph_classes, s.node_classes, s.attribute_width);
            ensure(got == (600, 6, 3, 18), || format!("ENZYMES summary {got:?}"))?;
            Ok("fixture manifest-exact; ENZYMES 600 graphs, 6 classes, 3 node classes, width 18".into())
        }
        None => Ok("fixture manifest-exact; ENZYMES not present (BLMOL_DATA_DIR unset), its counts unverified".into()),
    }
}

const DETERMINISM_SUPERNET: &str = r#"{
  "problem": {"kind": "supernet-synth", "sbm": {"graphs": 20, "nodes": 10},
              "model": {"hidden": 8, "train": {"lr": 0.01, "epochs": 5}}},
  "samples": 10,
  "psm": {"folds": 3},
  "evolve": {"population": 20, "generations": 20},
  "targets": {"top_k": 2},
  "repeats": 2
}"#;

fn determinism(work: &Path) -> Outcome {
    fs::write(work.join("tb.json"), r#"{"problem": {"kind": "testbed"}, "evolve": {"generations": 100}}"#)
        .map_err(|e| e.to_string())?;
    fs::write(work.join("rs.json"), r#"{"problem": {"kind": "testbed"}, "variant": "random_search"}"#)
        .map_err(|e| e.to_string())?;
    fs::write(work.join("sn.json"), DETERMINISM_SUPERNET).map_err(|e| e.to_string())?;
    let mut compared = 0;
    for (config, stages, files) in [
        ("tb.json", &["sample", "fit", "search", "realize"][..], &["samples.csv", "cv.csv", "archive.csv", "realized.csv"][..]),
        ("rs.json", &["baseline"][..], &["baseline.csv"][..]),
        ("sn.json", &["sample", "fit", "search", "realize"][..], &["samples.csv", "cv.csv", "archive.csv", "realized.csv"][..]),
    ] {
        let runs = [("1", "a"), ("1", "b"), ("8", "c")];
        for (jobs, tag) in runs {
            for stage in stages {
                run_stage(work, stage, config, "5", &format!("{config}.{tag}"), jobs)?;
            }
        }
        for file in files {
            let read = |tag: &str| fs::read(work.join(format!("{config}.{tag}")).join(file)).map_err(|e| e.to_string());
            let a = read("a")?;
            ensure(a == read("b")? && a == read("c")?, || format!("{config}: {file} differs between runs"))?;
            compared += 1;
        }
    }
    Ok(format!("{compared} CSV artifacts byte-identical across reruns and --jobs 1 / --jobs 8"))
}

fn main() {
    let work = tempfile::tempdir().expect("temporary directory");
    let w = work.path().to_path_buf();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("EPO exactness", Box::new(epo_exactness)),
        ("LS correctness", Box::new(ls_correctness)),
        ("disjoint-ray fallback", Box::new(disjoint_ray)),
        ("Pareto machinery", Box::new(pareto_machinery)),
        ("preference lattice", Box::new(lattice)),
        ("encoding fidelity", Box::new(encoding_fidelity)),
        ("autodiff", Box::new(autodiff)),
        ("surrogate mechanism", Box::new(surrogate_mechanism)),
        ("end-to-end testbed", Box::new(end_to_end_testbed)),
        ("supernet pipeline smoke", Box::new({
            let w = w.clone();
            move || supernet_smoke(&w)
        })),
        ("TUDataset parser", Box::new(tudataset)),
        ("determinism", Box::new(move || determinism(&w))),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            Err(panic.downcast_ref::<String>().cloned().or(panic.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1} s): {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name} ({secs:.1} s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
