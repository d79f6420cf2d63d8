//! Seed variable selection by column selection on the degree-1 vectors.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::embed::SeedColumns;
use crate::error::{Error, Result};
use crate::linalg::{orthonormal_basis, residual_sq};
use nalgebra::DVector;

/// Largest number of subsets the exhaustive strategy may score.
pub const EXHAUSTIVE_CAP: u128 = 1_000_000;

/// Residual mass below which volume sampling stops drawing and pads.
const VOLUME_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SeedStrategy {
    #[serde(rename = "greedy-colsel")]
    Greedy,
    #[serde(rename = "volume-sample")]
    Volume,
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "exhaustive-best")]
    Exhaustive,
}

impl SeedStrategy {
    pub const ALL: [SeedStrategy; 4] = [
        SeedStrategy::Greedy,
        SeedStrategy::Volume,
        SeedStrategy::Random,
        SeedStrategy::Exhaustive,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SeedStrategy::Greedy => "greedy-colsel",
            SeedStrategy::Volume => "volume-sample",
            SeedStrategy::Random => "random",
            SeedStrategy::Exhaustive => "exhaustive-best",
        }
    }
}

impl fmt::Display for SeedStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SeedStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = match s {
            "greedy" => "greedy-colsel",
            "volume" => "volume-sample",
            "exhaustive" => "exhaustive-best",
            other => other,
        };
        SeedStrategy::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown seed strategy {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedSet {
    /// Conditioning order.
    pub variables: Vec<usize>,
    pub strategy: SeedStrategy,
    /// Volume sampling ran out of residual mass and filled up with the
    /// lowest-index unselected variables.
    #[serde(default)]
    pub padded: bool,
    pub score: f64,
}

impl SeedSet {
    pub fn tag(&self) -> String {
        if self.padded {
            format!("{}+padded", self.strategy)
        } else {
            self.strategy.to_string()
        }
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }
}

/// Projection error of a selection; the order of `vars` does not matter.
pub fn score(cols: &SeedColumns, vars: &[usize]) -> f64 {
    let mut sorted = vars.to_vec();
    sorted.sort_unstable();
    cols.error(&sorted)
}

fn check_count(cols: &SeedColumns, m: usize) -> Result<()> {
    if m > cols.n() {
        return Err(Error::InvalidArgument(format!(
            "cannot pick {m} seeds from {} variables",
            cols.n()
        )));
    }
    Ok(())
}

fn finish(cols: &SeedColumns, variables: Vec<usize>, strategy: SeedStrategy, padded: bool) -> SeedSet {
    let score = score(cols, &variables);
    SeedSet {
        variables,
        strategy,
        padded,
        score,
    }
}

/// `m` greedy rounds, each adding the variable whose columns leave the
/// smallest residual. Near-equal candidates go to the lowest index.
pub fn select_greedy(cols: &SeedColumns, m: usize) -> Result<SeedSet> {
    check_count(cols, m)?;
    let tie = 1e-12 * (1.0 + cols.total_norm_sq());
    let mut chosen: Vec<usize> = Vec::with_capacity(m);
    for _ in 0..m {
        let mut best: Option<(usize, f64)> = None;
        for v in (0..cols.n()).filter(|v| !chosen.contains(v)) {
            let mut trial = chosen.clone();
            trial.push(v);
            let err = score(cols, &trial);
            if best.is_none_or(|(_, b)| err < b - tie) {
                best = Some((v, err));
            }
        }
        chosen.push(best.expect("m <= n leaves a candidate").0);
    }
    Ok(finish(cols, chosen, SeedStrategy::Greedy, false))
}

/// Sequential sampling: each draw picks a variable with probability
/// proportional to its columns' squared residual against the current span.
pub fn select_volume<R: Rng + ?Sized>(cols: &SeedColumns, m: usize, rng: &mut R) -> Result<SeedSet> {
    check_count(cols, m)?;
    let mut chosen: Vec<usize> = Vec::with_capacity(m);
    let mut padded = false;
    while chosen.len() < m {
        let span: Vec<DVector<f64>> = cols
            .columns_of(&chosen)
            .into_iter()
            .map(|c| cols.matrix.column(c).into_owned())
            .collect();
        let basis = orthonormal_basis(&span, crate::embed::SPAN_RANK_TOL);
        let candidates: Vec<(usize, f64)> = (0..cols.n())
            .filter(|v| !chosen.contains(v))
            .map(|v| {
                let mass = cols.groups[v]
                    .iter()
                    .map(|&c| residual_sq(&cols.matrix.column(c).into_owned(), &basis))
                    .sum::<f64>();
                (v, mass)
            })
            .collect();
        let total: f64 = candidates.iter().map(|c| c.1).sum();
        if candidates.iter().all(|c| c.1 < VOLUME_FLOOR) {
            padded = true;
            let need = m - chosen.len();
            chosen.extend(candidates.iter().take(need).map(|c| c.0));
            break;
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for &(v, mass) in &candidates {
            acc += mass;
            if mass > 0.0 {
                pick = Some(v);
                if target < acc {
                    break;
                }
            }
        }
        chosen.push(pick.expect("positive total mass"));
    }
    Ok(finish(cols, chosen, SeedStrategy::Volume, padded))
}

/// Uniform `m`-subset: the first `m` entries of a shuffled variable list,
/// sorted. Runs from the same stream are nested in `m`.
pub fn select_random<R: Rng + ?Sized>(cols: &SeedColumns, m: usize, rng: &mut R) -> Result<SeedSet> {
    check_count(cols, m)?;
    let mut order: Vec<usize> = (0..cols.n()).collect();
    order.shuffle(rng);
    let mut chosen = order[..m].to_vec();
    chosen.sort_unstable();
    Ok(finish(cols, chosen, SeedStrategy::Random, false))
}

pub fn binomial(n: usize, m: usize) -> u128 {
    if m > n {
        return 0;
    }
    let m = m.min(n - m);
    let mut c: u128 = 1;
    for i in 0..m {
        c = c.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    c
}

/// Exact minimizer over all `m`-subsets in lexicographic order; the first
/// strict minimum wins.
pub fn select_exhaustive(cols: &SeedColumns, m: usize) -> Result<SeedSet> {
    check_count(cols, m)?;
    let n = cols.n();
    let count = binomial(n, m);
    if count > EXHAUSTIVE_CAP {
        return Err(Error::Capacity {
            what: "seed subsets",
            actual: count,
            cap: EXHAUSTIVE_CAP,
        });
    }
    let mut subset: Vec<usize> = (0..m).collect();
    let mut best = (score(cols, &subset), subset.clone());
    loop {
        let Some(i) = (0..m).rev().find(|&i| subset[i] < n - m + i) else {
            break;
        };
        subset[i] += 1;
        for j in i + 1..m {
            subset[j] = subset[j - 1] + 1;
        }
        let err = score(cols, &subset);
        if err < best.0 {
            best = (err, subset.clone());
        }
    }
    Ok(SeedSet {
        variables: best.1,
        strategy: SeedStrategy::Exhaustive,
        padded: false,
        score: best.0,
    })
}

pub fn select<R: Rng + ?Sized>(
    strategy: SeedStrategy,
    cols: &SeedColumns,
    m: usize,
    rng: &mut R,
) -> Result<SeedSet> {
    match strategy {
        SeedStrategy::Greedy => select_greedy(cols, m),
        SeedStrategy::Volume => select_volume(cols, m, rng),
        SeedStrategy::Random => select_random(cols, m, rng),
        SeedStrategy::Exhaustive => select_exhaustive(cols, m),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// `n` variables with two orthogonal columns each, variable `v` scaled by `norms[v]`.
    fn orthogonal_groups(norms: &[f64]) -> SeedColumns {
        let n = norms.len();
        let m = DMatrix::from_fn(2 * n, 2 * n, |i, j| if i == j { norms[j / 2] } else { 0.0 });
        SeedColumns::from_matrix(m, 2)
    }

    #[test]
    fn greedy_rank_one_ties_to_lowest() {
        let cols = SeedColumns::from_matrix(DMatrix::from_element(3, 8, 1.0), 2);
        let s = select_greedy(&cols, 1).unwrap();
        assert_eq!(s.variables, vec![0]);
        assert!(s.score < 1e-20);
    }

    #[test]
    fn greedy_orthogonal_groups() {
        let cols = orthogonal_groups(&[1.0; 5]);
        let s = select_greedy(&cols, 2).unwrap();
        // each unselected variable keeps two unit columns
        assert!((s.score - 6.0).abs() < 1e-12);
        assert_eq!(s.variables, vec![0, 1]);
        assert!(select_greedy(&cols, 5).unwrap().score < 1e-20);
    }

    #[test]
    fn exhaustive_takes_largest_groups() {
        let cols = orthogonal_groups(&[1.0, 3.0, 2.0, 0.5]);
        let s = select_exhaustive(&cols, 2).unwrap();
        assert_eq!(s.variables, vec![1, 2]);
        assert!((s.score - 2.0 * (1.0 + 0.25)).abs() < 1e-12);
        assert!(select_exhaustive(&cols, 4).unwrap().score < 1e-20);
    }

    #[test]
    fn volume_single_dominant_column() {
        let mut m = DMatrix::zeros(2, 6);
        m[(0, 2)] = 1.0;
        let cols = SeedColumns::from_matrix(m, 2);
        for seed in 0..20 {
            let s = select_volume(&cols, 1, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(s.variables, vec![1]);
            assert!(!s.padded);
        }
        let s = select_volume(&cols, 3, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(s.padded);
        assert_eq!(s.tag(), "volume-sample+padded");
        assert_eq!(s.variables, vec![1, 0, 2]);
    }

    #[test]
    fn random_examples() {
        let cols = orthogonal_groups(&[1.0, 2.0, 3.0]);
        let full = select_random(&cols, 3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(full.variables, vec![0, 1, 2]);
        let a = select_random(&cols, 2, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = select_random(&cols, 2, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        let none = select_random(&cols, 0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert!(none.is_empty());
        assert!((none.score - 2.0 * 14.0).abs() < 1e-12);
    }

    #[test]
    fn caps_and_counts() {
        assert_eq!(binomial(6, 3), 20);
        assert_eq!(binomial(40, 20), 137_846_528_820);
        let cols = orthogonal_groups(&[1.0; 3]);
        assert!(select_greedy(&cols, 4).is_err());
        assert_eq!("greedy".parse::<SeedStrategy>().unwrap(), SeedStrategy::Greedy);
    }
}
