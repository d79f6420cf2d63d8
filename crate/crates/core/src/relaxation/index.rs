use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default hard cap on the number of moment-matrix rows.
pub const DEFAULT_INDEX_CAP: usize = 5000;

/// A partial assignment `(S, alpha)`: a sorted variable set with one label per variable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct AssignmentIndex {
    pub set: Vec<usize>,
    pub labels: Vec<usize>,
}

impl Ord for AssignmentIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.set
            .len()
            .cmp(&other.set.len())
            .then_with(|| self.set.cmp(&other.set))
            .then_with(|| self.labels.cmp(&other.labels))
    }
}

impl PartialOrd for AssignmentIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl AssignmentIndex {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn single(var: usize, label: usize) -> Self {
        AssignmentIndex {
            set: vec![var],
            labels: vec![label],
        }
    }

    /// Build from `(var, label)` pairs in any order. Returns `None` when a
    /// variable is given two different labels.
    pub fn from_pairs(pairs: &[(usize, usize)]) -> Option<Self> {
        let mut sorted = pairs.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.windows(2).any(|w| w[0].0 == w[1].0) {
            return None;
        }
        Some(AssignmentIndex {
            set: sorted.iter().map(|p| p.0).collect(),
            labels: sorted.iter().map(|p| p.1).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn label_of(&self, var: usize) -> Option<usize> {
        self.set
            .binary_search(&var)
            .ok()
            .map(|pos| self.labels[pos])
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.set.iter().copied().zip(self.labels.iter().copied())
    }

    pub(crate) fn check(&self, n: usize, k: usize) -> Result<()> {
        if self.set.len() != self.labels.len()
            || self.set.windows(2).any(|w| w[0] >= w[1])
            || self.set.iter().any(|&v| v >= n)
            || self.labels.iter().any(|&l| l >= k)
        {
            return Err(Error::InvalidInstance(format!(
                "malformed partial assignment {self:?}"
            )));
        }
        Ok(())
    }

    /// Label maps agree on the intersection of the two sets.
    pub fn compatible(&self, other: &Self) -> bool {
        self.union(other).is_some()
    }

    /// Merged assignment, or `None` if the two disagree somewhere.
    pub fn union(&self, other: &Self) -> Option<Self> {
        let mut set = Vec::with_capacity(self.len() + other.len());
        let mut labels = Vec::with_capacity(self.len() + other.len());
        let (mut i, mut j) = (0, 0);
        while i < self.len() && j < other.len() {
            match self.set[i].cmp(&other.set[j]) {
                Ordering::Less => {
                    set.push(self.set[i]);
                    labels.push(self.labels[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    set.push(other.set[j]);
                    labels.push(other.labels[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    if self.labels[i] != other.labels[j] {
                        return None;
                    }
                    set.push(self.set[i]);
                    labels.push(self.labels[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        set.extend_from_slice(&self.set[i..]);
        labels.extend_from_slice(&self.labels[i..]);
        set.extend_from_slice(&other.set[j..]);
        labels.extend_from_slice(&other.labels[j..]);
        Some(AssignmentIndex { set, labels })
    }

    /// `self ∪ {var -> label}`, or `None` on conflict.
    pub fn with(&self, var: usize, label: usize) -> Option<Self> {
        self.union(&AssignmentIndex::single(var, label))
    }

    /// Split into the first `at` pairs and the rest.
    pub fn split_at(&self, at: usize) -> (Self, Self) {
        (
            AssignmentIndex {
                set: self.set[..at].to_vec(),
                labels: self.labels[..at].to_vec(),
            },
            AssignmentIndex {
                set: self.set[at..].to_vec(),
                labels: self.labels[at..].to_vec(),
            },
        )
    }

    /// True when a full assignment agrees with every pair.
    pub fn agrees_with(&self, full: &[usize]) -> bool {
        self.pairs().all(|(v, l)| full[v] == l)
    }
}

/// `sum_{s=0..r} C(n, s) * k^s`, saturating.
pub fn index_len(n: usize, k: usize, r: usize) -> u128 {
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    let mut kpow: u128 = 1;
    for s in 0..=r.min(n) {
        total = total.saturating_add(binom.saturating_mul(kpow));
        binom = binom.saturating_mul((n - s) as u128) / (s as u128 + 1);
        kpow = kpow.saturating_mul(k as u128);
    }
    total
}

/// Calls `f` on every `s`-subset of `0..n` in lexicographic order.
pub(crate) fn for_each_subset(n: usize, s: usize, mut f: impl FnMut(&[usize])) {
    if s > n {
        return;
    }
    let mut subset: Vec<usize> = (0..s).collect();
    loop {
        f(&subset);
        let mut i = s;
        while i > 0 && subset[i - 1] == n - s + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        subset[i - 1] += 1;
        for j in i..s {
            subset[j] = subset[j - 1] + 1;
        }
    }
}

/// Calls `f` on every label tuple of length `s` over `k` labels in lexicographic order.
pub(crate) fn for_each_labeling(k: usize, s: usize, mut f: impl FnMut(&[usize])) {
    let mut labels = vec![0usize; s];
    loop {
        f(&labels);
        let mut i = s;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
        }
    }
}

/// All partial assignments with `|S| <= max_size`, in canonical order.
pub fn assignments_up_to(n: usize, k: usize, max_size: usize) -> Vec<AssignmentIndex> {
    let mut out = Vec::new();
    for s in 0..=max_size.min(n) {
        for_each_subset(n, s, |set| {
            for_each_labeling(k, s, |labels| {
                out.push(AssignmentIndex {
                    set: set.to_vec(),
                    labels: labels.to_vec(),
                });
            });
        });
    }
    out
}

/// Canonical row index of a level-`r` moment matrix with position lookup.
#[derive(Debug, Clone)]
pub struct MomentIndex {
    n: usize,
    k: usize,
    r: usize,
    entries: Vec<AssignmentIndex>,
    lookup: HashMap<AssignmentIndex, usize>,
}

impl MomentIndex {
    pub fn new(n: usize, k: usize, r: usize) -> Result<Self> {
        Self::with_cap(n, k, r, DEFAULT_INDEX_CAP)
    }

    pub fn with_cap(n: usize, k: usize, r: usize, cap: usize) -> Result<Self> {
        let entries = build_index_with_cap(n, k, r, cap)?;
        let lookup = entries
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        Ok(MomentIndex {
            n,
            k,
            r,
            entries,
            lookup,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn level(&self) -> usize {
        self.r
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[AssignmentIndex] {
        &self.entries
    }

    pub fn get(&self, pos: usize) -> &AssignmentIndex {
        &self.entries[pos]
    }

    pub fn position(&self, a: &AssignmentIndex) -> Option<usize> {
        self.lookup.get(a).copied()
    }

    pub fn position_of_single(&self, var: usize, label: usize) -> Option<usize> {
        self.position(&AssignmentIndex::single(var, label))
    }

    /// The matrix entry `(row, col)`, `row <= col`, that stores the moment of a
    /// union assignment: the first `min(|U|, r)` pairs index one side and the
    /// remainder the other. `None` when `|U| > 2r`.
    pub fn canonical_entry(&self, union: &AssignmentIndex) -> Option<(usize, usize)> {
        if union.len() > 2 * self.r {
            return None;
        }
        let (head, tail) = union.split_at(union.len().min(self.r));
        let a = self.position(&head)?;
        let b = self.position(&tail)?;
        Some((a.min(b), a.max(b)))
    }

    /// Positions of the degree-1 rows `(var -> label)` grouped per variable.
    pub fn degree_one_groups(&self) -> Vec<Vec<usize>> {
        (0..self.n)
            .map(|v| {
                (0..self.k)
                    .filter_map(|l| self.position_of_single(v, l))
                    .collect()
            })
            .collect()
    }
}

/// Canonical ordering of every `(S, alpha)` with `|S| <= r`.
pub fn build_index(n: usize, k: usize, r: usize) -> Result<Vec<AssignmentIndex>> {
    build_index_with_cap(n, k, r, DEFAULT_INDEX_CAP)
}

pub fn build_index_with_cap(
    n: usize,
    k: usize,
    r: usize,
    cap: usize,
) -> Result<Vec<AssignmentIndex>> {
    if n == 0 || k < 2 || r > n {
        return Err(Error::InvalidArgument(format!(
            "build_index needs n >= 1, k >= 2, r <= n (got n={n}, k={k}, r={r})"
        )));
    }
    let len = index_len(n, k, r);
    if len > cap as u128 {
        return Err(Error::Capacity {
            what: "moment index length",
            actual: len,
            cap: cap as u128,
        });
    }
    Ok(assignments_up_to(n, k, r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_examples() {
        let idx = build_index(2, 2, 1).unwrap();
        assert_eq!(idx.len(), 5);
        assert_eq!(idx[0], AssignmentIndex::empty());
        assert_eq!(idx[1], AssignmentIndex::single(0, 0));
        assert_eq!(idx[2], AssignmentIndex::single(0, 1));
        assert_eq!(idx[3], AssignmentIndex::single(1, 0));
        assert_eq!(idx[4], AssignmentIndex::single(1, 1));

        assert_eq!(build_index(3, 2, 2).unwrap().len(), 19);
        assert_eq!(build_index(4, 3, 0).unwrap().len(), 1);
    }

    #[test]
    fn index_is_sorted_and_counted() {
        for (n, k, r) in [(5, 2, 3), (4, 3, 2), (6, 2, 6)] {
            let idx = build_index(n, k, r).unwrap();
            assert_eq!(idx.len() as u128, index_len(n, k, r));
            assert!(idx.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn index_cap_is_enforced() {
        let err = build_index(12, 3, 3).unwrap_err();
        assert!(err.is_capacity());
        assert!(build_index_with_cap(3, 2, 2, 18).unwrap_err().is_capacity());
    }

    #[test]
    fn bad_arguments_rejected() {
        assert!(build_index(0, 2, 0).is_err());
        assert!(build_index(3, 1, 1).is_err());
        assert!(build_index(3, 2, 4).is_err());
    }

    #[test]
    fn union_and_compatibility() {
        let a = AssignmentIndex::from_pairs(&[(0, 1), (2, 0)]).unwrap();
        let b = AssignmentIndex::from_pairs(&[(2, 0), (3, 1)]).unwrap();
        let c = AssignmentIndex::single(2, 1);
        assert_eq!(
            a.union(&b).unwrap(),
            AssignmentIndex::from_pairs(&[(0, 1), (2, 0), (3, 1)]).unwrap()
        );
        assert!(!a.compatible(&c));
        assert!(AssignmentIndex::from_pairs(&[(1, 0), (1, 1)]).is_none());
    }

    #[test]
    fn canonical_entry_splits_by_level() {
        let idx = MomentIndex::new(4, 2, 2).unwrap();
        let u = AssignmentIndex::from_pairs(&[(0, 1), (1, 0), (3, 1)]).unwrap();
        let (a, b) = idx.canonical_entry(&u).unwrap();
        let head = AssignmentIndex::from_pairs(&[(0, 1), (1, 0)]).unwrap();
        let tail = AssignmentIndex::single(3, 1);
        let (pa, pb) = (idx.position(&head).unwrap(), idx.position(&tail).unwrap());
        assert_eq!((a, b), (pa.min(pb), pa.max(pb)));
        let too_big = AssignmentIndex::from_pairs(&[(0, 0), (1, 0), (2, 0), (3, 0)]).unwrap();
        assert!(idx.canonical_entry(&too_big).is_some());
        let idx1 = MomentIndex::new(4, 2, 1).unwrap();
        assert!(idx1.canonical_entry(&u).is_none());
    }
}
