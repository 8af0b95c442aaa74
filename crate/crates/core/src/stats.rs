//! Rank statistics and error metrics used to score surrogates.
//!
//! Constant input on either side makes a rank correlation undefined; these
//! functions return 0 in that case.

use crate::scalar::Scalar;
use crate::vectors::{check_len, VectorError};

fn check_pair<T>(a: &[T], b: &[T]) -> Result<(), VectorError> {
    check_len(a.len(), b.len())?;
    if a.len() < 2 {
        return Err(VectorError::TooShort { needed: 2, found: a.len() });
    }
    Ok(())
}

fn sign<T: Scalar>(x: T) -> i64 {
    if x > T::zero() {
        1
    } else if x < T::zero() {
        -1
    } else {
        0
    }
}

/// Kendall's tau-b.
pub fn kendall_tau<T: Scalar>(a: &[T], b: &[T]) -> Result<T, VectorError> {
    check_pair(a, b)?;
    let n = a.len();
    let (mut concordant_minus_discordant, mut untied_a, mut untied_b) = (0i64, 0i64, 0i64);
    for i in 0..n {
        for j in (i + 1)..n {
            let sa = sign(a[i] - a[j]);
            let sb = sign(b[i] - b[j]);
            concordant_minus_discordant += sa * sb;
            untied_a += sa.abs();
            untied_b += sb.abs();
        }
    }
    if untied_a == 0 || untied_b == 0 {
        return Ok(T::zero());
    }
    let denom = (T::lit(untied_a as f64) * T::lit(untied_b as f64)).sqrt();
    Ok(T::lit(concordant_minus_discordant as f64) / denom)
}

/// Average ranks (1-based), ties sharing their mean rank.
pub fn average_ranks<T: Scalar>(values: &[T]) -> Vec<T> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).expect("finite values"));
    let mut ranks = vec![T::zero(); values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = T::lit((start + end + 1) as f64 / 2.0);
        for &idx in &order[start..end] {
            ranks[idx] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = T::from_count(a.len());
    let ma = a.iter().copied().sum::<T>() / n;
    let mb = b.iter().copied().sum::<T>() / n;
    let (mut sab, mut saa, mut sbb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == T::zero() || sbb == T::zero() {
        return T::zero();
    }
    sab / (saa * sbb).sqrt()
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn spearman<T: Scalar>(a: &[T], b: &[T]) -> Result<T, VectorError> {
    check_pair(a, b)?;
    Ok(pearson(&average_ranks(a), &average_ranks(b)))
}

pub fn mse<T: Scalar>(a: &[T], b: &[T]) -> Result<T, VectorError> {
    check_len(a.len(), b.len())?;
    if a.is_empty() {
        return Err(VectorError::Empty);
    }
    let total: T = a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum();
    Ok(total / T::from_count(a.len()))
}

/// Area under the ROC curve as the Mann-Whitney statistic; ties count 1/2.
pub fn auc<T: Scalar>(positive_scores: &[T], negative_scores: &[T]) -> Result<T, VectorError> {
    if positive_scores.is_empty() || negative_scores.is_empty() {
        return Err(VectorError::Empty);
    }
    let mut wins = T::zero();
    let half = T::lit(0.5);
    for &p in positive_scores {
        for &q in negative_scores {
            if p > q {
                wins += T::one();
            } else if p == q {
                wins += half;
            }
        }
    }
    Ok(wins / (T::from_count(positive_scores.len()) * T::from_count(negative_scores.len())))
}

pub fn mean<T: Scalar>(values: &[T]) -> T {
    if values.is_empty() {
        return T::zero();
    }
    values.iter().copied().sum::<T>() / T::from_count(values.len())
}

/// Population standard deviation (0 for fewer than two values).
pub fn std_dev<T: Scalar>(values: &[T]) -> T {
    if values.len() < 2 {
        return T::zero();
    }
    let m = mean(values);
    (values.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / T::from_count(values.len())).sqrt()
}

pub fn median<T: Scalar>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 { sorted[mid] } else { (sorted[mid - 1] + sorted[mid]) / T::lit(2.0) })
}
