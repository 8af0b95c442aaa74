//! Run-directory files: CSV tables and the `meta.json` ledger of stages.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use blmol_core::blmol::{ArchiveEntry, Sense, Variant};
use blmol_core::numfmt::format_g17;
use blmol_core::Genotype;
use serde::{Deserialize, Serialize};

use crate::config::{sha256_hex, RunConfig};
use crate::error::{CliError, CliResult};

pub const META: &str = "meta.json";
pub const SAMPLES: &str = "samples.csv";
pub const CV: &str = "cv.csv";
pub const SURROGATES: &str = "surrogates.json";
pub const ARCHIVE: &str = "archive.csv";
pub const REALIZED: &str = "realized.csv";
pub const BASELINE: &str = "baseline.csv";

/// What a stage read and wrote, keyed by file name to SHA-256.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_hash: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub trainings: usize,
    pub invalid: usize,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub version: String,
    pub config_hash: String,
    pub problem_hash: String,
    pub seed: u64,
    pub variant: Variant,
    pub objectives: Vec<String>,
    pub senses: Vec<Sense>,
    pub config: RunConfig,
    pub stages: BTreeMap<String, StageRecord>,
}

impl Meta {
    pub fn read(dir: &Path) -> CliResult<Option<Meta>> {
        let path = dir.join(META);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path)?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| CliError::other(format!("{}: {e}", path.display())))
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self).expect("meta serializes");
        text.push('\n');
        fs::write(dir.join(META), text)?;
        Ok(())
    }

    pub fn trainings(&self) -> usize {
        self.stages.values().map(|s| s.trainings).sum()
    }
}

pub fn file_hash(path: &Path) -> CliResult<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Reads an artifact a previous stage must have produced.
pub fn require(dir: &Path, file: &str, stage: &'static str) -> CliResult<(PathBuf, String)> {
    let path = dir.join(file);
    if !path.is_file() {
        return Err(CliError::MissingStage(stage));
    }
    let text = fs::read_to_string(&path)?;
    Ok((path, text))
}

/// A CSV table held in memory and written with LF line endings.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(header.iter().map(|h| h.as_ref())).expect("in-memory write");
        Self { writer }
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) {
        self.writer.write_record(fields.iter().map(|f| f.as_ref())).expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }
}

pub fn reals(values: &[f64]) -> impl Iterator<Item = String> + '_ {
    values.iter().map(|&v| format_g17(v))
}

pub fn genes(g: &Genotype) -> impl Iterator<Item = String> + '_ {
    g.0.iter().map(|v| v.to_string())
}

pub fn gene_header(width: usize) -> impl Iterator<Item = String> {
    (0..width).map(|i| format!("g{i}"))
}

/// Parsed CSV: header plus string records.
pub struct ReadTable {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ReadTable {
    pub fn parse(file: &str, text: &str) -> CliResult<Self> {
        let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let bad = |e: csv::Error| CliError::other(format!("{file}: {e}"));
        let header = reader.headers().map_err(bad)?.iter().map(String::from).collect();
        let rows = reader
            .records()
            .map(|r| r.map(|rec| rec.iter().map(String::from).collect()))
            .collect::<Result<Vec<Vec<String>>, _>>()
            .map_err(bad)?;
        Ok(Self { file: file.to_string(), header, rows })
    }

    pub fn column(&self, name: &str) -> CliResult<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::other(format!("{}: no column `{name}`", self.file)))
    }

    pub fn gene_columns(&self) -> Vec<usize> {
        (0..).map_while(|i| self.header.iter().position(|h| *h == format!("g{i}"))).collect()
    }

    pub fn int(&self, row: usize, col: usize) -> CliResult<i64> {
        self.rows[row][col].parse().map_err(|_| self.cell_error(row, col))
    }

    pub fn real(&self, row: usize, col: usize) -> CliResult<f64> {
        self.rows[row][col].parse().map_err(|_| self.cell_error(row, col))
    }

    fn cell_error(&self, row: usize, col: usize) -> CliError {
        CliError::other(format!(
            "{}: line {}: bad value `{}` in column `{}`",
            self.file,
            row + 2,
            self.rows[row][col],
            self.header[col]
        ))
    }

    pub fn genotype(&self, row: usize, cols: &[usize]) -> CliResult<Genotype> {
        Ok(Genotype(cols.iter().map(|&c| self.int(row, c)).collect::<CliResult<_>>()?))
    }
}

pub fn archive_csv(archive: &[ArchiveEntry], width: usize, names: &[String]) -> Vec<u8> {
    let header: Vec<String> = gene_header(width).chain(names.iter().map(|n| format!("pred_{n}"))).collect();
    let mut t = Table::new(&header);
    for e in archive {
        t.row(&genes(&e.genotype).chain(reals(&e.predicted)).collect::<Vec<_>>());
    }
    t.into_bytes()
}

pub fn parse_archive(text: &str, names: &[String]) -> CliResult<Vec<ArchiveEntry>> {
    let t = ReadTable::parse(ARCHIVE, text)?;
    let gene_cols = t.gene_columns();
    let pred_cols = names.iter().map(|n| t.column(&format!("pred_{n}"))).collect::<CliResult<Vec<_>>>()?;
    (0..t.rows.len())
        .map(|r| {
            Ok(ArchiveEntry {
                genotype: t.genotype(r, &gene_cols)?,
                predicted: pred_cols.iter().map(|&c| t.real(r, c)).collect::<CliResult<_>>()?,
            })
        })
        .collect()
}
