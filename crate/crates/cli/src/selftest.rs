use blmol_core::prefmoo::{train_preference, Optimizer, Solver, TrainConfig};
use blmol_core::testbed::{quad_oracle, QuadraticProblem, TESTBED_EPS_TRACK};
use blmol_core::{hypervolume, simplex_lattice, Genotype, PreferenceVector, RandomStream};
use blmol_supernet::{
    encoding_length, finite_difference_check, synth_dataset, ComputationPlan, Fusion, ModelConfig, SbmConfig,
    TaskSet, Topology,
};

use crate::error::{CliError, CliResult};

type Check = (&'static str, fn() -> Result<(), String>);

fn lattice() -> Result<(), String> {
    let n = simplex_lattice::<f64>(2, 19).len();
    (n == 20).then_some(()).ok_or(format!("{n} members"))
}

fn hypervolume_example() -> Result<(), String> {
    let hv = hypervolume(&[[1.0, 2.0], [2.0, 1.0]], &[3.0, 3.0]).map_err(|e| e.to_string())?;
    (hv == 3.0).then_some(()).ok_or(format!("got {hv}"))
}

fn epo_exactness() -> Result<(), String> {
    let problem = QuadraticProblem::new(vec![vec![0.0], vec![2.0]]).map_err(|e| e.to_string())?;
    let r = PreferenceVector::new(vec![1.0, 3.0]).map_err(|e| e.to_string())?;
    let config = TrainConfig {
        optimizer: Optimizer::Plain,
        lr: 0.05,
        epochs: 2000,
        batches_per_epoch: 1,
        solver: Solver::Epo,
        eps_track: TESTBED_EPS_TRACK,
    };
    let mut oracle = quad_oracle(problem);
    let (w, _) = train_preference(&mut oracle, &r, &config, &mut RandomStream::root(1)).map_err(|e| e.to_string())?;
    let expected = 3.0 - 3f64.sqrt();
    ((w[0] - expected).abs() < 1e-3).then_some(()).ok_or(format!("w = {}, expected {expected}", w[0]))
}

fn encoding() -> Result<(), String> {
    let d = encoding_length(3);
    (d == 15).then_some(()).ok_or(format!("D(3) = {d}"))
}

fn gradients() -> Result<(), String> {
    let ds = synth_dataset(&SbmConfig { graphs: 4, nodes: 6, ..SbmConfig::default() }, &RandomStream::root(2))
        .map_err(|e| e.to_string())?;
    let mut genes = vec![1i64; 10];
    genes.extend([Fusion::Att.code(); 4]);
    genes.push(1);
    let topology = Topology::decode(3, &Genotype(genes)).map_err(|e| e.to_string())?;
    let config = ModelConfig {
        hidden: 8,
        feature_width: ds.feature_width(),
        node_classes: ds.node_classes,
        graph_classes: ds.graph_classes,
        tasks: TaskSet::all(),
    };
    let plan = ComputationPlan::new(topology, config);
    let w = plan.layout().initialize(&mut RandomStream::root(3));
    let coords: Vec<usize> = (0..w.len()).step_by(11).collect();
    let report = finite_difference_check(&plan, &w, &ds.batch(&[0, 1, 2, 3]), &coords, 1e-4).map_err(|e| e.to_string())?;
    let err = report.max_error();
    (err < 1e-4).then_some(()).ok_or(format!("relative error {err:e}"))
}

const CHECKS: [Check; 5] = [
    ("preference lattice size", lattice),
    ("hypervolume example", hypervolume_example),
    ("exact Pareto training", epo_exactness),
    ("encoding length", encoding),
    ("supernet gradients", gradients),
];

/// Runs quick built-in checks and reports one line per check.
pub fn selftest() -> CliResult<()> {
    let mut failed = 0;
    for (name, check) in CHECKS {
        match check() {
            Ok(()) => println!("PASS {name}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        return Err(CliError::Numerical(format!("{failed} self-test check(s) failed")));
    }
    Ok(())
}
