//! Scalar abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar usable by every numeric routine in this crate.
///
/// Implemented for `f32` and `f64`. Routines that need a literal go through
/// [`Scalar::lit`] so the same code runs at either precision.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Converts a count into this scalar type.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Dot product of two equal-length slices.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Solves the dense system `a x = b` by Gaussian elimination with partial
/// pivoting. `a` is row-major `n x n`. Returns `None` when a pivot falls below
/// `tol` in magnitude.
pub fn solve_dense<T: Scalar>(a: &[T], b: &[T], n: usize, tol: T) -> Option<Vec<T>> {
    let mut m: Vec<T> = a.to_vec();
    let mut rhs: Vec<T> = b.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            m[i * n + col]
                .abs()
                .partial_cmp(&m[j * n + col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[pivot * n + col].abs() <= tol {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
            }
            rhs.swap(col, pivot);
        }
        let p = m[col * n + col];
        for row in (col + 1)..n {
            let factor = m[row * n + col] / p;
            if factor == T::zero() {
                continue;
            }
            for k in col..n {
                let v = m[col * n + k];
                m[row * n + k] -= factor * v;
            }
            let v = rhs[col];
            rhs[row] -= factor * v;
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in (row + 1)..n {
            acc -= m[row * n + k] * x[k];
        }
        x[row] = acc / m[row * n + row];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system_in_both_precisions() {
        let a = [2.0, 1.0, 1.0, 3.0];
        let x = solve_dense(&a, &[3.0, 5.0], 2, 1e-12).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);

        let a32 = [2.0f32, 1.0, 1.0, 3.0];
        let x32 = solve_dense(&a32, &[3.0, 5.0], 2, 1e-6).unwrap();
        assert!((x32[0] - 0.8).abs() < 1e-5);
    }

    #[test]
    fn singular_system_is_rejected() {
        let a = [1.0, 2.0, 2.0, 4.0];
        assert!(solve_dense(&a, &[1.0, 2.0], 2, 1e-12).is_none());
    }
}
