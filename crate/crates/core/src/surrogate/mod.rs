//! Preference surrogate models.
//!
//! Each upper-level objective gets its own regressor over encoded
//! `(genotype, preference)` inputs. Three model families are available and
//! the one with the best cross-validated rank agreement is kept.

mod forest;
mod gp;
mod knn;

pub use forest::{Forest, ForestParams};
pub use gp::{GaussianProcess, BASE_JITTER, JITTER_ESCALATIONS};
pub use knn::NearestNeighbors;

use std::cmp::Ordering;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::evolve::{GeneKind, GenomeSpec, Genotype};
use crate::numfmt::format_g17;
use crate::rng::RandomStream;
use crate::stats::{kendall_tau, mse};
use crate::vectors::PreferenceVector;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SurrogateError {
    #[error("table is empty")]
    Empty,
    #[error("feature width mismatch: expected {expected}, found {found}")]
    Width { expected: usize, found: usize },
    #[error("target count mismatch: expected {expected}, found {found}")]
    Targets { expected: usize, found: usize },
    #[error("row {row}: non-finite value")]
    NonFinite { row: usize },
    #[error("objective index {objective} out of range for {count} objectives")]
    Objective { objective: usize, count: usize },
    #[error("line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("invalid genotype: {0}")]
    Genotype(String),
    #[error("need at least 2 folds and no more folds than rows (folds {folds}, rows {rows})")]
    Folds { folds: usize, rows: usize },
    #[error("no surrogate kinds given")]
    NoKinds,
    #[error("fit failed: {0}")]
    Fit(String),
}

/// Column groups of an encoded input, in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    /// Binary genes copied as 0/1.
    pub binary: usize,
    /// Slot count of each one-hot group.
    pub one_hot: Vec<usize>,
    /// Entries of the preference vector.
    pub preference: usize,
}

impl FeatureLayout {
    pub fn width(&self) -> usize {
        self.binary + self.one_hot.iter().sum::<usize>() + self.preference
    }
}

/// Maps genotypes to surrogate inputs: binary genes first, then each
/// categorical gene as a one-hot group, then the preference vector selected
/// by the index gene.
#[derive(Debug, Clone, PartialEq)]
pub struct InputEncoder {
    spec: GenomeSpec,
    preferences: Vec<PreferenceVector<f64>>,
    include_preference: bool,
}

impl InputEncoder {
    pub fn new(spec: GenomeSpec, preferences: Vec<PreferenceVector<f64>>) -> Self {
        Self { spec, preferences, include_preference: true }
    }

    /// Encoder that leaves the preference out of the input.
    pub fn without_preference(spec: GenomeSpec) -> Self {
        Self { spec, preferences: Vec::new(), include_preference: false }
    }

    pub fn spec(&self) -> &GenomeSpec {
        &self.spec
    }

    pub fn layout(&self) -> FeatureLayout {
        let mut layout = FeatureLayout { binary: 0, one_hot: Vec::new(), preference: 0 };
        for gene in &self.spec.genes {
            match gene.kind {
                GeneKind::Binary => layout.binary += 1,
                GeneKind::Categorical => layout.one_hot.push(gene.cardinality() as usize),
                GeneKind::Index if self.include_preference => {
                    layout.preference += self.preferences.first().map_or(0, PreferenceVector::len)
                }
                GeneKind::Index => {}
            }
        }
        layout
    }

    pub fn encode(&self, g: &Genotype) -> Result<Vec<f64>, SurrogateError> {
        self.spec.validate(g).map_err(|e| SurrogateError::Genotype(e.to_string()))?;
        let mut binary = Vec::new();
        let mut one_hot = Vec::new();
        let mut preference = Vec::new();
        for (gene, &v) in self.spec.genes.iter().zip(g.genes()) {
            match gene.kind {
                GeneKind::Binary => binary.push(v as f64),
                GeneKind::Categorical => {
                    let mut group = vec![0.0; gene.cardinality() as usize];
                    group[(v - gene.low) as usize] = 1.0;
                    one_hot.extend(group);
                }
                GeneKind::Index if self.include_preference => {
                    let r = self.preferences.get((v - gene.low) as usize).ok_or_else(|| {
                        SurrogateError::Genotype(format!("preference index {v} outside the preference set"))
                    })?;
                    preference.extend_from_slice(r.values());
                }
                GeneKind::Index => {}
            }
        }
        binary.extend(one_hot);
        binary.extend(preference);
        Ok(binary)
    }
}

/// Encodes one genotype whose index gene selects from `preferences`.
pub fn encode_input(
    spec: &GenomeSpec,
    g: &Genotype,
    preferences: &[PreferenceVector<f64>],
) -> Result<Vec<f64>, SurrogateError> {
    InputEncoder::new(spec.clone(), preferences.to_vec()).encode(g)
}

/// Training data: encoded inputs and true upper-level objective values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleTable {
    pub features: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
    pub layout: Option<FeatureLayout>,
}

impl SampleTable {
    pub fn new(features: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self, SurrogateError> {
        let table = Self { features, targets, layout: None };
        table.check()?;
        Ok(table)
    }

    pub fn with_layout(mut self, layout: FeatureLayout) -> Result<Self, SurrogateError> {
        if !self.is_empty() && layout.width() != self.width() {
            return Err(SurrogateError::Width { expected: layout.width(), found: self.width() });
        }
        self.layout = Some(layout);
        Ok(self)
    }

    fn check(&self) -> Result<(), SurrogateError> {
        if self.features.len() != self.targets.len() {
            return Err(SurrogateError::Targets { expected: self.features.len(), found: self.targets.len() });
        }
        let (w, m) = (self.width(), self.objectives());
        for (row, (x, y)) in self.features.iter().zip(&self.targets).enumerate() {
            if x.len() != w {
                return Err(SurrogateError::Width { expected: w, found: x.len() });
            }
            if y.len() != m {
                return Err(SurrogateError::Targets { expected: m, found: y.len() });
            }
            if x.iter().chain(y).any(|v| !v.is_finite()) {
                return Err(SurrogateError::NonFinite { row });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn width(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn objectives(&self) -> usize {
        self.targets.first().map_or(0, Vec::len)
    }

    pub fn column(&self, objective: usize) -> Vec<f64> {
        self.targets.iter().map(|t| t[objective]).collect()
    }

    /// CSV with header `f0..f{W-1},y0..y{m-1}` and `%.17g` reals.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (0..self.width())
            .map(|i| format!("f{i}"))
            .chain((0..self.objectives()).map(|j| format!("y{j}")))
            .collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for (x, y) in self.features.iter().zip(&self.targets) {
            let cells: Vec<String> = x.iter().chain(y).map(|&v| format_g17(v)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, SurrogateError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(SurrogateError::Csv { line: 1, message: "missing header".into() })?;
        let names: Vec<&str> = header.split(',').collect();
        let width = names.iter().take_while(|n| n.starts_with('f')).count();
        for (i, name) in names.iter().enumerate() {
            let expected = if i < width { format!("f{i}") } else { format!("y{}", i - width) };
            if *name != expected {
                return Err(SurrogateError::Csv { line: 1, message: format!("expected column {expected}, found {name}") });
            }
        }
        let mut features = Vec::new();
        let mut targets = Vec::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let values = line
                .split(',')
                .map(|c| c.parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
                .map_err(|e| SurrogateError::Csv { line: i + 1, message: e.to_string() })?;
            if values.len() != names.len() {
                return Err(SurrogateError::Csv {
                    line: i + 1,
                    message: format!("{} cells for {} columns", values.len(), names.len()),
                });
            }
            features.push(values[..width].to_vec());
            targets.push(values[width..].to_vec());
        }
        Self::new(features, targets)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurrogateKind {
    Forest,
    GpRbf,
    Knn,
}

impl SurrogateKind {
    pub const ALL: [SurrogateKind; 3] = [SurrogateKind::Forest, SurrogateKind::GpRbf, SurrogateKind::Knn];

    pub fn name(self) -> &'static str {
        match self {
            SurrogateKind::Forest => "forest",
            SurrogateKind::GpRbf => "gp_rbf",
            SurrogateKind::Knn => "knn",
        }
    }
}

impl fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SurrogateKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        SurrogateKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown surrogate kind {s}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateParams {
    pub forest: ForestParams,
    pub knn_k: usize,
}

impl Default for SurrogateParams {
    fn default() -> Self {
        Self { forest: ForestParams::default(), knn_k: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Model {
    Forest(Forest),
    GpRbf(GaussianProcess),
    Knn(NearestNeighbors),
}

/// A regressor for one objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSurrogate {
    pub kind: SurrogateKind,
    pub objective: usize,
    pub width: usize,
    model: Model,
}

impl FittedSurrogate {
    pub fn predict(&self, features: &[f64]) -> Result<f64, SurrogateError> {
        if features.len() != self.width {
            return Err(SurrogateError::Width { expected: self.width, found: features.len() });
        }
        Ok(match &self.model {
            Model::Forest(m) => m.predict(features),
            Model::GpRbf(m) => m.predict(features),
            Model::Knn(m) => m.predict(features),
        })
    }
}

/// Free-function form of [`FittedSurrogate::predict`].
pub fn predict(model: &FittedSurrogate, features: &[f64]) -> Result<f64, SurrogateError> {
    model.predict(features)
}

fn canonical_order(x: &[Vec<f64>], y: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| {
        x[a].iter()
            .zip(&x[b])
            .map(|(p, q)| p.total_cmp(q))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
            .then(y[a].total_cmp(&y[b]))
    });
    order
}

fn fit_rows(
    kind: SurrogateKind,
    x: &[Vec<f64>],
    y: &[f64],
    objective: usize,
    params: &SurrogateParams,
    rng: &RandomStream,
) -> Result<FittedSurrogate, SurrogateError> {
    if x.is_empty() {
        return Err(SurrogateError::Empty);
    }
    // rows are put in a content order so the fit ignores table row order
    let order = canonical_order(x, y);
    let xs: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let model = match kind {
        SurrogateKind::Forest => Model::Forest(Forest::fit(&xs, &ys, &params.forest, &rng.derive("forest"))),
        SurrogateKind::GpRbf => Model::GpRbf(GaussianProcess::fit(&xs, &ys).map_err(SurrogateError::Fit)?),
        SurrogateKind::Knn => Model::Knn(NearestNeighbors::fit(&xs, &ys, params.knn_k)),
    };
    Ok(FittedSurrogate { kind, objective, width: xs[0].len(), model })
}

fn check_objective(table: &SampleTable, objective: usize) -> Result<(), SurrogateError> {
    if table.is_empty() {
        return Err(SurrogateError::Empty);
    }
    if objective >= table.objectives() {
        return Err(SurrogateError::Objective { objective, count: table.objectives() });
    }
    Ok(())
}

/// Fits one model of `kind` to objective `objective`.
pub fn fit(
    kind: SurrogateKind,
    table: &SampleTable,
    objective: usize,
    params: &SurrogateParams,
    rng: &RandomStream,
) -> Result<FittedSurrogate, SurrogateError> {
    check_objective(table, objective)?;
    fit_rows(kind, &table.features, &table.column(objective), objective, params, rng)
}

/// Pooled out-of-fold scores.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub ktau: f64,
    pub mse: f64,
}

/// Shuffled round-robin fold ids for `rows` rows.
pub fn fold_assignment(rows: usize, folds: usize, rng: &RandomStream) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..rows).collect();
    rng.derive("folds").shuffle(&mut perm);
    let mut fold = vec![0; rows];
    for (i, &row) in perm.iter().enumerate() {
        fold[row] = i % folds;
    }
    fold
}

/// K-fold cross-validation of one model kind on one objective.
pub fn cross_validate(
    kind: SurrogateKind,
    table: &SampleTable,
    objective: usize,
    folds: usize,
    params: &SurrogateParams,
    rng: &RandomStream,
) -> Result<CvScore, SurrogateError> {
    check_objective(table, objective)?;
    let n = table.len();
    if folds < 2 || folds > n {
        return Err(SurrogateError::Folds { folds, rows: n });
    }
    let y = table.column(objective);
    let assignment = fold_assignment(n, folds, rng);
    let per_fold: Vec<Vec<(usize, f64)>> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| assignment[i] != f).collect();
            let xs: Vec<Vec<f64>> = train.iter().map(|&i| table.features[i].clone()).collect();
            let ys: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let model = fit_rows(kind, &xs, &ys, objective, params, &rng.derive_index("fold", f))?;
            (0..n)
                .filter(|&i| assignment[i] == f)
                .map(|i| Ok((i, model.predict(&table.features[i])?)))
                .collect()
        })
        .collect::<Result<_, SurrogateError>>()?;
    let mut predicted = vec![0.0; n];
    for (i, p) in per_fold.into_iter().flatten() {
        predicted[i] = p;
    }
    let ktau = kendall_tau(&predicted, &y).map_err(|e| SurrogateError::Fit(e.to_string()))?;
    let mse = mse(&predicted, &y).map_err(|e| SurrogateError::Fit(e.to_string()))?;
    Ok(CvScore { ktau, mse })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindScore {
    pub kind: SurrogateKind,
    pub score: CvScore,
}

/// The chosen model for one objective plus the scores of every candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub surrogate: FittedSurrogate,
    pub scores: Vec<KindScore>,
}

impl Selection {
    pub fn chosen_score(&self) -> CvScore {
        self.scores.iter().find(|s| s.kind == self.surrogate.kind).expect("winner was scored").score
    }
}

/// Orders candidates best first: higher KTau, then lower MSE, then kind order.
fn compare_candidates(a: &KindScore, b: &KindScore) -> Ordering {
    let key = |v: f64| if v.is_nan() { f64::NEG_INFINITY } else { v };
    key(b.score.ktau)
        .total_cmp(&key(a.score.ktau))
        .then_with(|| {
            let m = |v: f64| if v.is_nan() { f64::INFINITY } else { v };
            m(a.score.mse).total_cmp(&m(b.score.mse))
        })
        .then(a.kind.cmp(&b.kind))
}

/// Cross-validates every kind on every objective and refits each winner on
/// the full table. All kinds of one objective share the same folds.
pub fn select_best(
    table: &SampleTable,
    kinds: &[SurrogateKind],
    folds: usize,
    params: &SurrogateParams,
    rng: &RandomStream,
) -> Result<Vec<Selection>, SurrogateError> {
    if kinds.is_empty() {
        return Err(SurrogateError::NoKinds);
    }
    if table.is_empty() {
        return Err(SurrogateError::Empty);
    }
    let mut kinds = kinds.to_vec();
    kinds.sort();
    kinds.dedup();
    (0..table.objectives())
        .map(|objective| {
            let stream = rng.derive_index("objective", objective);
            let cv_stream = stream.derive("cv");
            let scores = kinds
                .iter()
                .map(|&kind| {
                    Ok(KindScore { kind, score: cross_validate(kind, table, objective, folds, params, &cv_stream)? })
                })
                .collect::<Result<Vec<_>, SurrogateError>>()?;
            let best = scores.iter().min_by(|a, b| compare_candidates(a, b)).expect("non-empty").kind;
            let surrogate = fit(best, table, objective, params, &stream.derive("refit"))?;
            Ok(Selection { surrogate, scores })
        })
        .collect()
}

#[cfg(test)]
mod tests;
