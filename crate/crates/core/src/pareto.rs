//! Dominance, non-dominated sorting, crowding distance, and a bounded
//! non-dominated archive. Everything here assumes minimization.

use crate::scalar::Scalar;
use crate::vectors::{check_len, ObjectiveVector, VectorError};

/// `true` iff `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates<T: Scalar>(a: &[T], b: &[T]) -> Result<bool, VectorError> {
    check_len(a.len(), b.len())?;
    Ok(dominates_unchecked(a, b))
}

#[inline]
pub(crate) fn dominates_unchecked<T: Scalar>(a: &[T], b: &[T]) -> bool {
    let mut strictly = false;
    for (&x, &y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

fn check_uniform<T, P: AsRef<[T]>>(points: &[P]) -> Result<usize, VectorError> {
    let m = points.first().map(|p| p.as_ref().len()).unwrap_or(0);
    for p in points {
        check_len(m, p.as_ref().len())?;
    }
    Ok(m)
}

/// Fast non-dominated sort. Front 0 holds the non-dominated points; indices
/// within each front are ascending. Empty input yields no fronts.
pub fn non_dominated_sort<T: Scalar, P: AsRef<[T]>>(
    points: &[P],
) -> Result<Vec<Vec<usize>>, VectorError> {
    check_uniform(points)?;
    let n = points.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (points[i].as_ref(), points[j].as_ref());
            if dominates_unchecked(a, b) {
                dominated_by_me[i].push(j);
                domination_count[j] += 1;
            } else if dominates_unchecked(b, a) {
                dominated_by_me[j].push(i);
                domination_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &p in &current {
            for &q in &dominated_by_me[p] {
                domination_count[q] -= 1;
                if domination_count[q] == 0 {
                    next.push(q);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    Ok(fronts)
}

/// Rank (front number) of every point.
pub fn ranks<T: Scalar, P: AsRef<[T]>>(points: &[P]) -> Result<Vec<usize>, VectorError> {
    let fronts = non_dominated_sort(points)?;
    let mut rank = vec![0; points.len()];
    for (r, front) in fronts.iter().enumerate() {
        for &i in front {
            rank[i] = r;
        }
    }
    Ok(rank)
}

/// Crowding distance of each member of a mutually non-dominated front.
///
/// Neighbours are taken over distinct objective values, so duplicated points
/// receive identical distances and the result is permutation-equivariant.
/// Points attaining an objective's minimum or maximum get `+inf`, as do all
/// points of fronts with two or fewer members.
pub fn crowding_distance<T: Scalar, P: AsRef<[T]>>(front: &[P]) -> Result<Vec<T>, VectorError> {
    let m = check_uniform(front)?;
    let n = front.len();
    if n <= 2 {
        return Ok(vec![T::infinity(); n]);
    }
    let mut distance = vec![T::zero(); n];
    for k in 0..m {
        let mut values: Vec<T> = front.iter().map(|p| p.as_ref()[k]).collect();
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite objectives"));
        values.dedup();
        let (lo, hi) = (values[0], values[values.len() - 1]);
        let span = hi - lo;
        for (i, p) in front.iter().enumerate() {
            let v = p.as_ref()[k];
            if v == lo || v == hi {
                distance[i] = T::infinity();
                continue;
            }
            let pos = values
                .binary_search_by(|x| x.partial_cmp(&v).expect("finite objectives"))
                .expect("value present");
            distance[i] += (values[pos + 1] - values[pos - 1]) / span;
        }
    }
    Ok(distance)
}

/// Mutually non-dominated set of `(genotype, objectives)` pairs.
#[derive(Debug, Clone)]
pub struct ParetoArchive<G, T> {
    members: Vec<(G, ObjectiveVector<T>)>,
    capacity: Option<usize>,
}

impl<G: PartialEq, T: Scalar> ParetoArchive<G, T> {
    pub fn unbounded() -> Self {
        Self { members: Vec::new(), capacity: None }
    }

    pub fn with_capacity(capacity: usize) -> Self {
        assert!(capacity > 0, "archive capacity must be positive");
        Self { members: Vec::new(), capacity: Some(capacity) }
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    /// Offers a candidate. Returns `Ok(true)` when it was admitted. Members the
    /// candidate dominates are evicted; a dominated candidate or a genotype
    /// already present leaves the archive unchanged. When the capacity is
    /// exceeded the most crowded member is dropped.
    pub fn insert(&mut self, genotype: G, objectives: ObjectiveVector<T>) -> Result<bool, VectorError> {
        if let Some((_, first)) = self.members.first() {
            check_len(first.len(), objectives.len())?;
        }
        let obj = objectives.values();
        if self
            .members
            .iter()
            .any(|(g, o)| *g == genotype || dominates_unchecked(o.values(), obj))
        {
            return Ok(false);
        }
        self.members.retain(|(_, o)| !dominates_unchecked(obj, o.values()));
        self.members.push((genotype, objectives));
        if let Some(cap) = self.capacity {
            if self.members.len() > cap {
                let points: Vec<&[T]> = self.members.iter().map(|(_, o)| o.values()).collect();
                let crowd = crowding_distance(&points)?;
                let (worst, _) = crowd
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.partial_cmp(b.1).expect("comparable distances"))
                    .expect("non-empty archive");
                self.members.remove(worst);
            }
        }
        Ok(true)
    }

    pub fn members(&self) -> &[(G, ObjectiveVector<T>)] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn objectives(&self) -> Vec<&[T]> {
        self.members.iter().map(|(_, o)| o.values()).collect()
    }

    pub fn into_members(self) -> Vec<(G, ObjectiveVector<T>)> {
        self.members
    }
}

impl<G: PartialEq, T: Scalar> Default for ParetoArchive<G, T> {
    fn default() -> Self {
        Self::unbounded()
    }
}
