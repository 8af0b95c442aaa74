//! Objective and preference vectors.

use std::ops::Index;

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VectorError {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("entry {index} is not finite")]
    NonFinite { index: usize },
    #[error("preference entry {index} must be strictly positive")]
    NonPositive { index: usize },
    #[error("vector must not be empty")]
    Empty,
    #[error("hypervolume supports 1 to 3 objectives, got {0}")]
    UnsupportedDimension(usize),
    #[error("need at least {needed} values, got {found}")]
    TooShort { needed: usize, found: usize },
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<(), VectorError> {
    if expected == found {
        Ok(())
    } else {
        Err(VectorError::LengthMismatch { expected, found })
    }
}

/// Objective values in minimization orientation.
///
/// Metrics that are maximized (accuracy, AUC) must be negated before they
/// enter any Pareto operation; [`ObjectiveVector::from_maximized`] does that.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveVector<T>(Vec<T>);

impl<T: Scalar> ObjectiveVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self, VectorError> {
        if values.is_empty() {
            return Err(VectorError::Empty);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(VectorError::NonFinite { index });
        }
        Ok(Self(values))
    }

    /// Builds a minimization vector from metrics where larger is better.
    pub fn from_maximized(values: Vec<T>) -> Result<Self, VectorError> {
        Self::new(values.into_iter().map(|v| -v).collect())
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T> AsRef<[T]> for ObjectiveVector<T> {
    fn as_ref(&self) -> &[T] {
        &self.0
    }
}

impl<T> Index<usize> for ObjectiveVector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

/// Strictly positive weights over the lower-level losses, normalized to sum
/// to one at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceVector<T>(Vec<T>);

impl<T: Scalar> PreferenceVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self, VectorError> {
        if values.is_empty() {
            return Err(VectorError::Empty);
        }
        for (index, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(VectorError::NonFinite { index });
            }
            if *v <= T::zero() {
                return Err(VectorError::NonPositive { index });
            }
        }
        let total: T = values.iter().copied().sum();
        Ok(Self(values.into_iter().map(|v| v / total).collect()))
    }

    /// Uniform preference over `m` losses.
    pub fn uniform(m: usize) -> Self {
        assert!(m > 0, "uniform preference needs at least one entry");
        Self(vec![T::one() / T::from_count(m); m])
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<T> AsRef<[T]> for PreferenceVector<T> {
    fn as_ref(&self) -> &[T] {
        &self.0
    }
}

impl<T> Index<usize> for PreferenceVector<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}
