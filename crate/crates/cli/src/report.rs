//! Aggregation of finished runs into plot-ready tables.

use std::fs;
use std::path::{Path, PathBuf};

use blmol_core::blmol::{minimized, Variant};
use blmol_core::hypervolume;
use blmol_core::numfmt::format_g17;
use blmol_core::stats::{mean, median, std_dev};
use serde::{Deserialize, Serialize};

use crate::artifacts::{Meta, ReadTable, Table, BASELINE, REALIZED};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportConfig {
    /// Hypervolume reference point in raw objective units.
    pub reference: Vec<f64>,
    #[serde(default)]
    pub runs: Vec<PathBuf>,
}

impl ReportConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de)
            .map_err(|e| CliError::config(format!("at `{}`: {}", e.path(), e.inner())))
    }
}

/// One solution of a run with per-objective mean and spread.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub target: usize,
    pub genes: Vec<String>,
    pub preference: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub meta: Meta,
    pub solutions: Vec<Solution>,
}

impl RunSummary {
    pub fn load(dir: &Path) -> CliResult<Self> {
        let meta = Meta::read(dir)?.ok_or(CliError::MissingStage("sample"))?;
        let solutions = if dir.join(REALIZED).is_file() {
            realized_solutions(&fs::read_to_string(dir.join(REALIZED))?, &meta.objectives)?
        } else if dir.join(BASELINE).is_file() {
            baseline_solutions(&fs::read_to_string(dir.join(BASELINE))?, &meta.objectives)?
        } else {
            return Err(CliError::MissingStage("realize"));
        };
        Ok(Self { dir: dir.to_path_buf(), meta, solutions })
    }

    /// Mean objective vectors in minimization form.
    pub fn front(&self) -> Vec<Vec<f64>> {
        self.solutions.iter().map(|s| minimized(&self.meta.senses, &s.mean)).collect()
    }

    pub fn hypervolume(&self, reference: &[f64]) -> CliResult<f64> {
        let r = minimized(&self.meta.senses, reference);
        hypervolume(&self.front(), &r).map_err(|e| CliError::config(format!("at `reference`: {e}")))
    }
}

fn split_columns(t: &ReadTable) -> (Vec<usize>, Vec<usize>) {
    let genes = t.gene_columns();
    let prefs = (0..).map_while(|j| t.header.iter().position(|h| *h == format!("r{j}"))).collect();
    (genes, prefs)
}

fn realized_solutions(text: &str, names: &[String]) -> CliResult<Vec<Solution>> {
    let t = ReadTable::parse(REALIZED, text)?;
    let (gene_cols, pref_cols) = split_columns(&t);
    let target_col = t.column("target")?;
    let value_cols = names.iter().map(|n| t.column(n)).collect::<CliResult<Vec<_>>>()?;
    let mut out: Vec<(Solution, Vec<Vec<f64>>)> = Vec::new();
    for row in 0..t.rows.len() {
        let target = t.int(row, target_col)? as usize;
        let values = value_cols.iter().map(|&c| t.real(row, c)).collect::<CliResult<Vec<_>>>()?;
        match out.iter_mut().find(|(s, _)| s.target == target) {
            Some((_, runs)) => runs.push(values),
            None => out.push((
                Solution {
                    target,
                    genes: gene_cols.iter().map(|&c| t.rows[row][c].clone()).collect(),
                    preference: pref_cols.iter().map(|&c| t.rows[row][c].clone()).collect(),
                    mean: Vec::new(),
                    std: Vec::new(),
                },
                vec![values],
            )),
        }
    }
    Ok(out
        .into_iter()
        .map(|(mut s, runs)| {
            let column = |j: usize| runs.iter().map(|v| v[j]).collect::<Vec<_>>();
            s.mean = (0..names.len()).map(|j| mean(&column(j))).collect();
            s.std = (0..names.len()).map(|j| std_dev(&column(j))).collect();
            s
        })
        .collect())
}

fn baseline_solutions(text: &str, names: &[String]) -> CliResult<Vec<Solution>> {
    let t = ReadTable::parse(BASELINE, text)?;
    let (gene_cols, pref_cols) = split_columns(&t);
    let front_col = t.column("front")?;
    let value_cols = names.iter().map(|n| t.column(n)).collect::<CliResult<Vec<_>>>()?;
    let mut out = Vec::new();
    for row in 0..t.rows.len() {
        if t.int(row, front_col)? != 1 {
            continue;
        }
        out.push(Solution {
            target: out.len(),
            genes: gene_cols.iter().map(|&c| t.rows[row][c].clone()).collect(),
            preference: pref_cols.iter().map(|&c| t.rows[row][c].clone()).collect(),
            mean: value_cols.iter().map(|&c| t.real(row, c)).collect::<CliResult<_>>()?,
            std: vec![0.0; names.len()],
        });
    }
    Ok(out)
}

/// Output of [`report`].
pub struct Report {
    pub solutions_csv: Vec<u8>,
    pub hv_csv: Vec<u8>,
    pub median_csv: Vec<u8>,
    pub hv: Vec<f64>,
    pub medians: Vec<(Variant, f64)>,
}

pub fn report(runs: &[RunSummary], reference: &[f64]) -> CliResult<Report> {
    let first = runs.first().ok_or_else(|| CliError::config("at `runs`: no run directories given"))?;
    for r in &runs[1..] {
        if r.meta.problem_hash != first.meta.problem_hash {
            return Err(CliError::config(format!(
                "problem hash mismatch: {} and {} ran different problems",
                first.dir.display(),
                r.dir.display()
            )));
        }
    }
    let names = &first.meta.objectives;
    if reference.len() != names.len() {
        return Err(CliError::config(format!(
            "at `reference`: {} values for {} objectives",
            reference.len(),
            names.len()
        )));
    }
    let gene_width = first.solutions.first().map_or(0, |s| s.genes.len());
    let pref_width = first.solutions.first().map_or(0, |s| s.preference.len());
    let header: Vec<String> = ["run", "variant", "seed", "target"]
        .iter()
        .map(|s| s.to_string())
        .chain((0..gene_width).map(|i| format!("g{i}")))
        .chain((0..pref_width).map(|j| format!("r{j}")))
        .chain(names.iter().flat_map(|n| [format!("{n}_mean"), format!("{n}_std")]))
        .collect();
    let mut solutions = Table::new(&header);
    let mut hv_table = Table::new(&["run", "variant", "seed", "points", "hv"]);
    let mut hv = Vec::with_capacity(runs.len());
    for run in runs {
        let label = run.dir.display().to_string();
        for s in &run.solutions {
            let row: Vec<String> = [label.clone(), run.meta.variant.name().into(), run.meta.seed.to_string(), s.target.to_string()]
                .into_iter()
                .chain(s.genes.iter().cloned())
                .chain(s.preference.iter().cloned())
                .chain(s.mean.iter().zip(&s.std).flat_map(|(m, d)| [format_g17(*m), format_g17(*d)]))
                .collect();
            solutions.row(&row);
        }
        let v = run.hypervolume(reference)?;
        hv_table.row(&[
            label,
            run.meta.variant.name().into(),
            run.meta.seed.to_string(),
            run.solutions.len().to_string(),
            format_g17(v),
        ]);
        hv.push(v);
    }
    let mut variants: Vec<Variant> = Vec::new();
    for r in runs {
        if !variants.contains(&r.meta.variant) {
            variants.push(r.meta.variant);
        }
    }
    let mut median_table = Table::new(&["variant", "runs", "median_hv"]);
    let mut medians = Vec::new();
    for v in variants {
        let values: Vec<f64> = runs.iter().zip(&hv).filter(|(r, _)| r.meta.variant == v).map(|(_, h)| *h).collect();
        let m = median(&values).expect("variant has runs");
        median_table.row(&[v.name().to_string(), values.len().to_string(), format_g17(m)]);
        medians.push((v, m));
    }
    Ok(Report {
        solutions_csv: solutions.into_bytes(),
        hv_csv: hv_table.into_bytes(),
        median_csv: median_table.into_bytes(),
        hv,
        medians,
    })
}

pub fn cmd_report(config: &Path, extra_runs: &[PathBuf], out: Option<&Path>) -> CliResult<()> {
    let cfg = ReportConfig::load(config)?;
    let dirs: Vec<PathBuf> = cfg.runs.iter().chain(extra_runs).cloned().collect();
    let runs = dirs.iter().map(|d| RunSummary::load(d)).collect::<CliResult<Vec<_>>>()?;
    let rep = report(&runs, &cfg.reference)?;
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("report"));
    fs::create_dir_all(&out)?;
    fs::write(out.join("report.csv"), &rep.solutions_csv)?;
    fs::write(out.join("hv.csv"), &rep.hv_csv)?;
    fs::write(out.join("hv_median.csv"), &rep.median_csv)?;
    println!("{:<40} {:<14} {:>14}", "run", "variant", "hv");
    for (r, h) in runs.iter().zip(&rep.hv) {
        println!("{:<40} {:<14} {:>14.6}", r.dir.display(), r.meta.variant.name(), h);
    }
    for (v, m) in &rep.medians {
        println!("{:<40} {:<14} {:>14.6}", "median", v.name(), m);
    }
    Ok(())
}
