//! Analytic problems with known Pareto structure.
//!
//! [`QuadraticProblem`] has losses `F_i(w) = s_i/2 |w - c_i|^2 + b_i`; its
//! Pareto set is the convex hull of the centers, and for two losses the
//! exact Pareto weight of any preference has a closed form.

use crate::blmol::{BlProblem, Sense};
use crate::evolve::{GeneSpec, GenomeSpec, Genotype};
use crate::lattice::simplex_lattice;
use crate::prefmoo::{BatchSelector, LossGrad, LossGradOracle, OracleError, Optimizer, Solver, TrainConfig};
use crate::rng::RandomStream;
use crate::scalar::Scalar;
use crate::vectors::{PreferenceVector, VectorError};

/// On-ray tolerance used by testbed training runs.
///
/// Inside the tolerance band a Pareto-stationary iterate stops moving, so the
/// band width bounds the final nonuniformity.
pub const TESTBED_EPS_TRACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProblem<T> {
    centers: Vec<Vec<T>>,
    scales: Vec<T>,
    offsets: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TestbedError {
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error("centers {0} and {1} coincide")]
    DuplicateCenter(usize, usize),
    #[error("{0}")]
    Invalid(String),
}

impl<T: Scalar> QuadraticProblem<T> {
    /// Unit scales and zero offsets.
    pub fn new(centers: Vec<Vec<T>>) -> Result<Self, TestbedError> {
        let m = centers.len();
        Self::with_terms(centers, vec![T::one(); m], vec![T::zero(); m])
    }

    pub fn with_terms(centers: Vec<Vec<T>>, scales: Vec<T>, offsets: Vec<T>) -> Result<Self, TestbedError> {
        if centers.is_empty() {
            return Err(VectorError::Empty.into());
        }
        let n = centers[0].len();
        if n == 0 {
            return Err(TestbedError::Invalid("centers must have positive dimension".into()));
        }
        for c in &centers {
            crate::vectors::check_len(n, c.len())?;
            if let Some(index) = c.iter().position(|v| !v.is_finite()) {
                return Err(VectorError::NonFinite { index }.into());
            }
        }
        crate::vectors::check_len(centers.len(), scales.len())?;
        crate::vectors::check_len(centers.len(), offsets.len())?;
        if let Some(index) = scales.iter().position(|s| !(s.is_finite() && *s > T::zero())) {
            return Err(VectorError::NonPositive { index }.into());
        }
        if let Some(index) = offsets.iter().position(|b| !(b.is_finite() && *b >= T::zero())) {
            return Err(TestbedError::Invalid(format!("offset {index} must be finite and non-negative")));
        }
        for i in 0..centers.len() {
            for j in i + 1..centers.len() {
                if centers[i] == centers[j] {
                    return Err(TestbedError::DuplicateCenter(i, j));
                }
            }
        }
        Ok(Self { centers, scales, offsets })
    }

    pub fn centers(&self) -> &[Vec<T>] {
        &self.centers
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    pub fn num_losses(&self) -> usize {
        self.centers.len()
    }

    pub fn losses(&self, w: &[T]) -> Vec<T> {
        let half = T::lit(0.5);
        self.centers
            .iter()
            .zip(&self.scales)
            .zip(&self.offsets)
            .map(|((c, &s), &b)| half * s * w.iter().zip(c).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>() + b)
            .collect()
    }

    pub fn gradients(&self, w: &[T]) -> Vec<Vec<T>> {
        self.centers
            .iter()
            .zip(&self.scales)
            .map(|(c, &s)| w.iter().zip(c).map(|(&x, &y)| s * (x - y)).collect())
            .collect()
    }

    /// Point `c_1 + t (c_2 - c_1)` on the segment between the first two
    /// centers.
    pub fn segment_point(&self, t: T) -> Vec<T> {
        self.centers[0].iter().zip(&self.centers[1]).map(|(&a, &b)| a + t * (b - a)).collect()
    }

    /// Exact Pareto weight for two losses: the point on the center segment
    /// where `r_1 F_1 = r_2 F_2`. `None` when the preference ray misses the
    /// front (possible only with offsets).
    pub fn exact_pareto_weight(&self, r: &PreferenceVector<T>) -> Result<Option<Vec<T>>, TestbedError> {
        if self.num_losses() != 2 || r.len() != 2 {
            return Err(TestbedError::Invalid("closed form needs exactly two losses".into()));
        }
        let d2: T = self.centers[0].iter().zip(&self.centers[1]).map(|(&a, &b)| (a - b) * (a - b)).sum();
        let half = T::lit(0.5);
        let (r1, r2) = (r[0], r[1]);
        let p = r1 * self.scales[0] * half * d2;
        let q = r2 * self.scales[1] * half * d2;
        let (b1, b2) = (r1 * self.offsets[0], r2 * self.offsets[1]);
        // p t^2 + b1 = q (1 - t)^2 + b2
        let t = if b1 == b2 {
            let (sp, sq) = (p.sqrt(), q.sqrt());
            sq / (sp + sq)
        } else {
            let a = p - q;
            let b = T::lit(2.0) * q;
            let c = b1 - b2 - q;
            let roots: Vec<T> = if a.abs() <= T::epsilon() * (p + q) {
                vec![-c / b]
            } else {
                let disc = b * b - T::lit(4.0) * a * c;
                if disc < T::zero() {
                    return Ok(None);
                }
                let s = disc.sqrt();
                // numerically stable pair
                let k = -half * (b + b.signum() * s);
                vec![k / a, c / k]
            };
            let tol = T::lit(1e-12);
            match roots.into_iter().find(|t| *t >= -tol && *t <= T::one() + tol) {
                Some(t) => t.max(T::zero()).min(T::one()),
                None => return Ok(None),
            }
        };
        Ok(Some(self.segment_point(t)))
    }

    /// Linear-scalarization minimizer `sum r_i s_i c_i / sum r_i s_i`.
    pub fn ls_minimizer(&self, r: &PreferenceVector<T>) -> Vec<T> {
        let weights: Vec<T> = r.values().iter().zip(&self.scales).map(|(&a, &s)| a * s).collect();
        let total: T = weights.iter().copied().sum();
        (0..self.dim())
            .map(|k| weights.iter().zip(&self.centers).map(|(&wt, c)| wt * c[k]).sum::<T>() / total)
            .collect()
    }
}

/// Gradient oracle over a [`QuadraticProblem`].
#[derive(Debug, Clone)]
pub struct QuadOracle<T> {
    problem: QuadraticProblem<T>,
    start: Option<Vec<T>>,
}

/// Oracle for `problem`. Initial weights are the mean of the centers plus
/// standard normal noise unless a fixed start is set.
pub fn quad_oracle<T: Scalar>(problem: QuadraticProblem<T>) -> QuadOracle<T> {
    QuadOracle { problem, start: None }
}

impl<T: Scalar> QuadOracle<T> {
    pub fn starting_at(mut self, w: Vec<T>) -> Self {
        self.start = Some(w);
        self
    }

    pub fn problem(&self) -> &QuadraticProblem<T> {
        &self.problem
    }
}

impl<T: Scalar> LossGradOracle<T> for QuadOracle<T> {
    fn num_weights(&self) -> usize {
        self.problem.dim()
    }

    fn num_losses(&self) -> usize {
        self.problem.num_losses()
    }

    fn initial_weights(&mut self, rng: &mut RandomStream) -> Vec<T> {
        if let Some(w) = &self.start {
            return w.clone();
        }
        let m = T::from_count(self.problem.num_losses());
        (0..self.problem.dim())
            .map(|k| {
                let mean = self.problem.centers.iter().map(|c| c[k]).sum::<T>() / m;
                mean + T::lit(rng.normal())
            })
            .collect()
    }

    fn eval(&mut self, weights: &[T], _batch: BatchSelector) -> Result<LossGrad<T>, OracleError> {
        if weights.len() != self.problem.dim() {
            return Err(OracleError::Shape(format!("{} weights for dimension {}", weights.len(), self.problem.dim())));
        }
        Ok(LossGrad { losses: self.problem.losses(weights), grads: self.problem.gradients(weights) })
    }
}

/// Angle between a loss vector and the preference ray direction `1/r`.
pub fn ray_angle<T: Scalar>(losses: &[T], r: &PreferenceVector<T>) -> T {
    let dir: Vec<T> = r.values().iter().map(|&v| T::one() / v).collect();
    let cos = crate::scalar::dot(losses, &dir) / (crate::scalar::norm(losses) * crate::scalar::norm(&dir));
    cos.max(-T::one()).min(T::one()).acos()
}

/// Lower-level center moved by each gene, and by how much.
const GENE_EFFECTS: [(usize, [f64; 2]); 8] = [
    (0, [0.0, 0.8]),
    (0, [0.0, 0.4]),
    (0, [0.0, 0.2]),
    (0, [0.0, 0.1]),
    (1, [0.0, 0.8]),
    (1, [0.0, 0.4]),
    (1, [0.0, 0.2]),
    (1, [0.0, 0.1]),
];
const BASE_CENTERS: [[f64; 2]; 2] = [[0.0, 0.0], [2.0, 0.0]];
const VALIDATION_SHIFT: [f64; 2] = [0.0, 1.5];

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticBlConfig {
    /// Size of the preference set.
    pub preferences: usize,
    pub train: TrainConfig,
}

impl Default for SyntheticBlConfig {
    fn default() -> Self {
        Self {
            preferences: 20,
            train: TrainConfig {
                optimizer: Optimizer::Plain,
                lr: 0.05,
                epochs: 1000,
                batches_per_epoch: 1,
                solver: Solver::Epo,
                eps_track: TESTBED_EPS_TRACK,
            },
        }
    }
}

/// Bi-level testbed with eight binary genes and a preference index.
///
/// Each gene shifts one of the two lower-level centers. The lower level is a
/// two-loss [`QuadraticProblem`] in the plane; the two upper-level
/// objectives are `|w - v_i|^2 / 2` at validation centers `v_i` (the base
/// centers shifted by a fixed offset). The exact Pareto weight is known in
/// closed form, so [`SyntheticBl::true_objectives`] gives the objectives of
/// perfectly trained weights.
#[derive(Debug, Clone)]
pub struct SyntheticBl {
    spec: GenomeSpec,
    preferences: Vec<PreferenceVector<f64>>,
    validation: Vec<Vec<f64>>,
    train: TrainConfig,
}

pub fn synthetic_bl(config: SyntheticBlConfig) -> Result<SyntheticBl, TestbedError> {
    if config.preferences < 2 {
        return Err(TestbedError::Invalid("need at least two preferences".into()));
    }
    config.train.validate().map_err(|e| TestbedError::Invalid(e.to_string()))?;
    let mut genes = vec![GeneSpec::binary(); GENE_EFFECTS.len()];
    genes.push(GeneSpec::index(1, config.preferences as i64));
    let validation = BASE_CENTERS
        .iter()
        .map(|c| c.iter().zip(VALIDATION_SHIFT).map(|(a, b)| a + b).collect())
        .collect();
    Ok(SyntheticBl {
        spec: GenomeSpec::new(genes),
        preferences: simplex_lattice(2, config.preferences - 1),
        validation,
        train: config.train,
    })
}

impl SyntheticBl {
    /// Lower-level centers selected by the genes.
    pub fn centers(&self, g: &Genotype) -> Vec<Vec<f64>> {
        let mut centers: Vec<Vec<f64>> = BASE_CENTERS.iter().map(|c| c.to_vec()).collect();
        for (&(center, offset), &bit) in GENE_EFFECTS.iter().zip(g.genes()) {
            if bit == 1 {
                for (c, o) in centers[center].iter_mut().zip(offset) {
                    *c += o;
                }
            }
        }
        centers
    }

    pub fn lower_level(&self, g: &Genotype) -> QuadraticProblem<f64> {
        QuadraticProblem::new(self.centers(g)).expect("gene offsets keep the centers apart")
    }

    pub fn upper_objectives(&self, w: &[f64]) -> Vec<f64> {
        self.validation.iter().map(|v| 0.5 * w.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()).collect()
    }

    /// Objectives at the exact Pareto weight of the genotype's preference.
    pub fn true_objectives(&self, g: &Genotype) -> Result<Vec<f64>, TestbedError> {
        self.spec.validate(g).map_err(|e| TestbedError::Invalid(e.to_string()))?;
        let r = crate::blmol::preference_of(self, g);
        let w = self
            .lower_level(g)
            .exact_pareto_weight(r)?
            .ok_or_else(|| TestbedError::Invalid("preference ray misses the front".into()))?;
        Ok(self.upper_objectives(&w))
    }
}

impl BlProblem for SyntheticBl {
    type Oracle = QuadOracle<f64>;

    fn genome_spec(&self) -> &GenomeSpec {
        &self.spec
    }

    fn preferences(&self) -> &[PreferenceVector<f64>] {
        &self.preferences
    }

    fn objective_names(&self) -> Vec<String> {
        vec!["ul0".into(), "ul1".into()]
    }

    fn senses(&self) -> Vec<Sense> {
        vec![Sense::Minimize, Sense::Minimize]
    }

    fn train_config(&self) -> &TrainConfig {
        &self.train
    }

    fn oracle(&self, g: &Genotype) -> Result<QuadOracle<f64>, String> {
        Ok(quad_oracle(self.lower_level(g)))
    }

    fn evaluate(&self, _g: &Genotype, _oracle: &mut QuadOracle<f64>, weights: &[f64]) -> Result<Vec<f64>, String> {
        Ok(self.upper_objectives(weights))
    }
}
