//! Seed sampling, conditioning and independent / threshold rounding.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relaxation::{LabelingInstance, MomentMatrix};

/// Draw from an unnormalized categorical distribution; one rng draw.
fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last = i;
            if target < acc {
                return i;
            }
        }
    }
    last
}

/// Sample labels for `seeds` in order from the current conditional
/// marginal, conditioning after each draw. Only labels with probability at
/// least `p_min` are eligible.
pub fn sample_seed_assignment<R: Rng + ?Sized>(
    m: &MomentMatrix,
    seeds: &[usize],
    p_min: f64,
    rng: &mut R,
) -> Result<(Vec<(usize, usize)>, MomentMatrix)> {
    if m.level() < seeds.len() + 1 {
        return Err(Error::LevelBudget {
            level: m.level(),
            seeds: seeds.len(),
        });
    }
    let mut current = m.clone();
    let mut assignment = Vec::with_capacity(seeds.len());
    for &var in seeds {
        if assignment.iter().any(|&(v, _)| v == var) {
            return Err(Error::InvalidArgument(format!("seed {var} repeated")));
        }
        let eligible: Vec<f64> = current
            .raw_marginal(var)?
            .into_iter()
            .map(|p| if p >= p_min { p } else { 0.0 })
            .collect();
        if eligible.iter().all(|&p| p == 0.0) {
            return Err(Error::InvalidMoments(format!(
                "no label of seed {var} has probability >= {p_min:e}"
            )));
        }
        let label = sample_categorical(&eligible, rng);
        current = current.condition(var, label, p_min)?;
        assignment.push((var, label));
    }
    Ok((assignment, current))
}

/// Conditional marginals of the non-seed variables after seeding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTable {
    pub n: usize,
    pub k: usize,
    pub seed_assignment: Vec<(usize, usize)>,
    /// `None` for seed variables; otherwise a distribution over `[k]`.
    pub marginals: Vec<Option<Vec<f64>>>,
    pub source_level: usize,
    /// Largest `|sum - 1|` of a marginal before clamping and renormalizing.
    pub max_sum_error: f64,
}

impl ConditionalTable {
    /// Clamp each raw marginal at zero and renormalize it to sum to one.
    pub fn from_moments(m: &MomentMatrix, seed_assignment: Vec<(usize, usize)>) -> Result<Self> {
        let (n, k) = (m.n(), m.k());
        let mut marginals = vec![None; n];
        let mut max_sum_error = 0.0f64;
        for (var, slot) in marginals.iter_mut().enumerate() {
            if seed_assignment.iter().any(|&(v, _)| v == var) {
                continue;
            }
            let raw = m.raw_marginal(var)?;
            let sum: f64 = raw.iter().sum();
            max_sum_error = max_sum_error.max((sum - 1.0).abs());
            let clamped: Vec<f64> = raw.iter().map(|&p| p.max(0.0)).collect();
            let total: f64 = clamped.iter().sum();
            if !(total > 1e-12 && total.is_finite()) {
                return Err(Error::InvalidMoments(format!(
                    "marginal of variable {var} has no mass"
                )));
            }
            *slot = Some(clamped.iter().map(|p| p / total).collect());
        }
        Ok(ConditionalTable {
            n,
            k,
            seed_assignment,
            marginals,
            source_level: m.level(),
            max_sum_error,
        })
    }

    /// Point masses on `labels` for every variable, no seeds.
    pub fn point_mass(k: usize, labels: &[usize]) -> Self {
        ConditionalTable {
            n: labels.len(),
            k,
            seed_assignment: Vec::new(),
            marginals: labels
                .iter()
                .map(|&l| Some((0..k).map(|j| if j == l { 1.0 } else { 0.0 }).collect()))
                .collect(),
            source_level: 0,
            max_sum_error: 0.0,
        }
    }

    /// Distribution of `var`, seeds as point masses.
    pub fn distribution(&self, var: usize) -> Vec<f64> {
        match &self.marginals[var] {
            Some(p) => p.clone(),
            None => {
                let label = self
                    .seed_assignment
                    .iter()
                    .find(|&&(v, _)| v == var)
                    .expect("seed variables are assigned")
                    .1;
                (0..self.k).map(|j| if j == label { 1.0 } else { 0.0 }).collect()
            }
        }
    }

    fn seeded_labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.n];
        for &(v, l) in &self.seed_assignment {
            labels[v] = l;
        }
        labels
    }

    /// Distinct values of `marginal[label]` over non-seed variables, ascending.
    pub fn marginal_values(&self, label: usize) -> Vec<f64> {
        let mut values: Vec<f64> = self.marginals.iter().flatten().map(|p| p[label]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        values
    }
}

/// Sample every non-seed variable independently; one rng draw per variable in index order.
pub fn round_independent<R: Rng + ?Sized>(table: &ConditionalTable, rng: &mut R) -> Vec<usize> {
    let mut labels = table.seeded_labels();
    for (var, m) in table.marginals.iter().enumerate() {
        if let Some(p) = m {
            labels[var] = sample_categorical(p, rng);
        }
    }
    labels
}

/// Non-seed variable `i` gets `side_label` iff `marginal_i[side_label] >= theta`.
pub fn round_threshold(table: &ConditionalTable, theta: f64, side_label: usize) -> Result<Vec<usize>> {
    if table.k != 2 {
        return Err(Error::LabelCount { k: table.k });
    }
    if !(0.0..=1.0).contains(&theta) || side_label > 1 {
        return Err(Error::InvalidArgument(format!(
            "threshold {theta} / side label {side_label} out of range"
        )));
    }
    let mut labels = table.seeded_labels();
    for (var, m) in table.marginals.iter().enumerate() {
        if let Some(p) = m {
            labels[var] = if p[side_label] >= theta { side_label } else { 1 - side_label };
        }
    }
    Ok(labels)
}

/// Exact expected objective under the product of the marginals.
pub fn expected_value_independent(table: &ConditionalTable, inst: &LabelingInstance) -> Result<f64> {
    if let Some(t) = inst.terms.iter().find(|t| t.scope.len() > 2) {
        return Err(Error::ScopeTooLarge {
            scope: t.scope.len(),
            level: 1,
        });
    }
    let k = table.k;
    let dists: Vec<Vec<f64>> = (0..table.n).map(|v| table.distribution(v)).collect();
    let mut total = 0.0;
    for t in &inst.terms {
        let e = match t.scope.as_slice() {
            [] => t.table[0],
            &[u] => (0..k).map(|a| t.table[a] * dists[u][a]).sum(),
            &[u, v] => {
                let mut s = 0.0;
                for a in 0..k {
                    for b in 0..k {
                        s += t.table[a * k + b] * dists[u][a] * dists[v][b];
                    }
                }
                s
            }
            _ => unreachable!(),
        };
        total += t.weight * e;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoundingMode {
    Independent,
    Threshold,
}

impl RoundingMode {
    pub const ALL: [RoundingMode; 2] = [RoundingMode::Independent, RoundingMode::Threshold];

    pub fn name(self) -> &'static str {
        match self {
            RoundingMode::Independent => "independent",
            RoundingMode::Threshold => "threshold",
        }
    }
}

impl fmt::Display for RoundingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RoundingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RoundingMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown rounding mode {s:?}")))
    }
}

/// One rounded assignment with its native value before and after repair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingResult {
    pub trial_index: usize,
    pub mode: RoundingMode,
    pub threshold_used: Option<f64>,
    pub assignment: Vec<usize>,
    pub objective: f64,
    pub feasible: bool,
    pub violations: Vec<String>,
    pub repaired: Vec<usize>,
    pub repaired_objective: f64,
    pub repaired_feasible: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relaxation::{MomentIndex, Sense, Term};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn table(marginals: Vec<Vec<f64>>) -> ConditionalTable {
        ConditionalTable {
            n: marginals.len(),
            k: marginals[0].len(),
            seed_assignment: vec![],
            marginals: marginals.into_iter().map(Some).collect(),
            source_level: 1,
            max_sum_error: 0.0,
        }
    }

    #[test]
    fn empty_seeds_leave_moments_alone() {
        let index = Arc::new(MomentIndex::new(3, 2, 2).unwrap());
        let m = MomentMatrix::from_assignment(index, &[1, 0, 1]).unwrap();
        let (a, c) = sample_seed_assignment(&m, &[], 1e-8, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(a.is_empty());
        assert_eq!(c.entries(), m.entries());
    }

    #[test]
    fn point_mass_recovers_labels() {
        let index = Arc::new(MomentIndex::new(4, 3, 3).unwrap());
        let labels = [2, 0, 1, 1];
        let m = MomentMatrix::from_assignment(index, &labels).unwrap();
        for seed in 0..5 {
            let (a, c) =
                sample_seed_assignment(&m, &[3, 0], 1e-8, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(a, vec![(3, 1), (0, 2)]);
            let t = ConditionalTable::from_moments(&c, a).unwrap();
            assert_eq!(round_independent(&t, &mut ChaCha8Rng::seed_from_u64(seed)), labels);
        }
    }

    #[test]
    fn level_budget() {
        let index = Arc::new(MomentIndex::new(3, 2, 2).unwrap());
        let m = MomentMatrix::from_assignment(index, &[0, 0, 0]).unwrap();
        let err = sample_seed_assignment(&m, &[0, 1], 1e-8, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert_eq!(err, Error::LevelBudget { level: 2, seeds: 2 });
    }

    #[test]
    fn fair_coin_frequency() {
        let t = table(vec![vec![0.5, 0.5]]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let ones = (0..1000).filter(|_| round_independent(&t, &mut rng)[0] == 1).count();
        assert!((450..=550).contains(&ones), "{ones}");
    }

    #[test]
    fn threshold_examples() {
        let t = table(vec![vec![0.9, 0.1], vec![0.2, 0.8]]);
        assert_eq!(round_threshold(&t, 0.5, 0).unwrap(), vec![0, 1]);
        assert_eq!(round_threshold(&t, 0.0, 1).unwrap(), vec![1, 1]);
        assert_eq!(round_threshold(&t, 1.0, 0).unwrap(), vec![1, 1]);
        let t3 = table(vec![vec![0.2, 0.3, 0.5]]);
        assert_eq!(round_threshold(&t3, 0.5, 0).unwrap_err(), Error::LabelCount { k: 3 });
    }

    #[test]
    fn expectation_examples() {
        let inst = LabelingInstance::new(2, 2, Sense::Maximize)
            .with_term(Term::pair(0, 1, vec![0.0, 1.0, 1.0, 0.0], 1.0));
        let half = table(vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert!((expected_value_independent(&half, &inst).unwrap() - 0.5).abs() < 1e-15);
        let point = ConditionalTable::point_mass(2, &[0, 1]);
        assert_eq!(expected_value_independent(&point, &inst).unwrap(), 1.0);
    }
}
