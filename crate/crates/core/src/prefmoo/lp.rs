//! Exact small linear and quadratic programs over the probability simplex.
//!
//! Dimensions here are the number of lower-level losses (at most a handful),
//! so both problems are solved by enumeration: the LP over basic feasible
//! solutions, the min-norm QP over supports.

use crate::scalar::{solve_dense, Scalar};

/// Half-space `coeffs . alpha >= bound`.
#[derive(Debug, Clone)]
pub struct HalfSpace<T> {
    pub coeffs: Vec<T>,
    pub bound: T,
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}

/// Maximizes `objective . alpha` over `{alpha >= 0, sum alpha = 1}` intersected
/// with the given half-spaces. Returns `None` when the region is empty.
/// Ties between optimal vertices resolve to the first enumerated vertex.
pub fn maximize_on_simplex<T: Scalar>(objective: &[T], constraints: &[HalfSpace<T>]) -> Option<Vec<T>> {
    let m = objective.len();
    if m == 0 {
        return None;
    }
    let scale = constraints
        .iter()
        .flat_map(|h| h.coeffs.iter().chain(std::iter::once(&h.bound)))
        .chain(objective.iter())
        .fold(T::one(), |acc, v| acc.max(v.abs()));
    let tol = T::lit(1e-9) * scale;
    let feasible = |alpha: &[T]| {
        alpha.iter().all(|&a| a >= -tol)
            && constraints
                .iter()
                .all(|h| crate::scalar::dot(&h.coeffs, alpha) >= h.bound - tol)
    };

    // inequality i < m is alpha_i >= 0, i >= m is constraints[i - m]
    let total = m + constraints.len();
    let mut best: Option<(T, Vec<T>)> = None;
    for active in subsets(total, m - 1) {
        let mut a = vec![T::zero(); m * m];
        let mut b = vec![T::zero(); m];
        for j in 0..m {
            a[j] = T::one();
        }
        b[0] = T::one();
        for (row, &idx) in active.iter().enumerate() {
            let r = row + 1;
            if idx < m {
                a[r * m + idx] = T::one();
            } else {
                let h = &constraints[idx - m];
                a[r * m..(r + 1) * m].copy_from_slice(&h.coeffs);
                b[r] = h.bound;
            }
        }
        let Some(mut alpha) = solve_dense(&a, &b, m, T::lit(1e-13) * scale) else {
            continue;
        };
        if !feasible(&alpha) {
            continue;
        }
        project_onto_simplex_clip(&mut alpha);
        let value = crate::scalar::dot(objective, &alpha);
        if best.as_ref().map_or(true, |(v, _)| value > *v + tol) {
            best = Some((value, alpha));
        }
    }
    best.map(|(_, alpha)| alpha)
}

/// Clears tolerance-level negatives and renormalizes.
fn project_onto_simplex_clip<T: Scalar>(alpha: &mut [T]) {
    for a in alpha.iter_mut() {
        if *a < T::zero() {
            *a = T::zero();
        }
    }
    let s: T = alpha.iter().copied().sum();
    if s > T::zero() {
        for a in alpha.iter_mut() {
            *a /= s;
        }
    }
}

/// Minimizes `alpha^T C alpha` over the simplex, where `c` is the row-major
/// `m x m` Gram matrix of the gradients. The minimizer's combination
/// `alpha^T G` is the min-norm point of the gradients' convex hull.
pub fn min_norm_coefficients<T: Scalar>(c: &[T], m: usize) -> Vec<T> {
    let quad = |alpha: &[T]| {
        let mut v = T::zero();
        for i in 0..m {
            for j in 0..m {
                v += alpha[i] * c[i * m + j] * alpha[j];
            }
        }
        v
    };
    let scale = c.iter().fold(T::one(), |acc, v| acc.max(v.abs()));
    let tol = T::lit(1e-12) * scale;
    let mut best: Option<(T, Vec<T>)> = None;
    for size in 1..=m {
        for support in subsets(m, size) {
            // [C_SS 1; 1^T 0] [alpha_S; lambda] = [0; 1]
            let k = size + 1;
            let mut a = vec![T::zero(); k * k];
            let mut b = vec![T::zero(); k];
            for (r, &i) in support.iter().enumerate() {
                for (s, &j) in support.iter().enumerate() {
                    a[r * k + s] = c[i * m + j];
                }
                a[r * k + size] = T::one();
                a[size * k + r] = T::one();
            }
            b[size] = T::one();
            let Some(sol) = solve_dense(&a, &b, k, T::lit(1e-14) * scale) else {
                continue;
            };
            if sol[..size].iter().any(|&v| v < -tol) {
                continue;
            }
            let mut alpha = vec![T::zero(); m];
            for (r, &i) in support.iter().enumerate() {
                alpha[i] = sol[r].max(T::zero());
            }
            project_onto_simplex_clip(&mut alpha);
            let value = quad(&alpha);
            if best.as_ref().map_or(true, |(v, _)| value < *v - tol) {
                best = Some((value, alpha));
            }
        }
    }
    best.map(|(_, a)| a).unwrap_or_else(|| {
        let mut alpha = vec![T::zero(); m];
        alpha[0] = T::one();
        alpha
    })
}
