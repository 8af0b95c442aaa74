//! Evenly spread preference vectors on the probability simplex.

use crate::scalar::Scalar;
use crate::vectors::PreferenceVector;

/// Value substituted for zero lattice coordinates before renormalizing.
pub const LATTICE_FLOOR: f64 = 1e-6;

/// All points `k / divisions` with non-negative integer `k` summing to
/// `divisions`, in lexicographic order of `k`. Zero coordinates are raised to
/// [`LATTICE_FLOOR`] and the vector renormalized, since preferences must be
/// strictly positive. Yields `C(divisions + m - 1, m - 1)` vectors.
pub fn simplex_lattice<T: Scalar>(m: usize, divisions: usize) -> Vec<PreferenceVector<T>> {
    assert!(m >= 1 && divisions >= 1, "simplex lattice needs m >= 1 and H >= 1");
    let mut out = Vec::with_capacity(binomial(divisions + m - 1, m - 1));
    let mut current = vec![0usize; m];
    compositions(&mut current, 0, divisions, &mut |counts| {
        let h = T::from_count(divisions);
        let floor = T::lit(LATTICE_FLOOR);
        let raw = counts
            .iter()
            .map(|&k| if k == 0 { floor } else { T::from_count(k) / h })
            .collect();
        out.push(PreferenceVector::new(raw).expect("lattice entries are positive"));
    });
    out
}

fn compositions(current: &mut [usize], pos: usize, remaining: usize, emit: &mut impl FnMut(&[usize])) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        emit(current);
        return;
    }
    for k in 0..=remaining {
        current[pos] = k;
        compositions(current, pos + 1, remaining - k, emit);
    }
}

pub fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k.min(n));
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}
