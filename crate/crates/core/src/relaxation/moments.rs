use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::relaxation::index::{assignments_up_to, AssignmentIndex, MomentIndex};

/// Numerical tolerances shared by validation, marginals and conditioning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub psd: f64,
    pub consistency: f64,
    pub p_min: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            psd: 1e-6,
            consistency: 1e-5,
            p_min: 1e-8,
        }
    }
}

impl Tolerances {
    pub fn relaxed(self, factor: f64) -> Self {
        Tolerances {
            psd: self.psd * factor,
            consistency: self.consistency * factor,
            p_min: self.p_min,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationClass {
    Shape,
    Pinning,
    Symmetry,
    Psd,
    Consistency,
    Marginalization,
    DiagonalRange,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub class: ViolationClass,
    /// Worst-case magnitude over all offending entries.
    pub worst: f64,
    pub count: usize,
}

/// Every violated invariant class with its worst magnitude. Empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn get(&self, class: ViolationClass) -> Option<&Violation> {
        self.violations.iter().find(|v| v.class == class)
    }

    fn record(&mut self, class: ViolationClass, magnitude: f64) {
        match self.violations.iter_mut().find(|v| v.class == class) {
            Some(v) => {
                v.worst = v.worst.max(magnitude);
                v.count += 1;
            }
            None => self.violations.push(Violation {
                class,
                worst: magnitude,
                count: 1,
            }),
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{:?}: worst {:.3e} over {} entries", v.class, v.worst, v.count)?;
        }
        Ok(())
    }
}

/// Level-`r` pseudo-moment matrix `M[(S,a),(T,b)] = y_{S ∪ T}(a ∪ b)`.
#[derive(Debug, Clone)]
pub struct MomentMatrix {
    index: Arc<MomentIndex>,
    entries: DMatrix<f64>,
}

impl MomentMatrix {
    pub fn new(index: Arc<MomentIndex>, entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() != index.len() || entries.ncols() != index.len() {
            return Err(Error::InvalidMoments(format!(
                "matrix is {}x{}, index has {} rows",
                entries.nrows(),
                entries.ncols(),
                index.len()
            )));
        }
        Ok(MomentMatrix { index, entries })
    }

    /// Moments of a true distribution over full assignments.
    pub fn from_distribution(
        index: Arc<MomentIndex>,
        support: &[(Vec<usize>, f64)],
    ) -> Result<Self> {
        for (x, _) in support {
            if x.len() != index.n() || x.iter().any(|&l| l >= index.k()) {
                return Err(Error::InvalidArgument(format!(
                    "assignment {x:?} does not fit n={}, k={}",
                    index.n(),
                    index.k()
                )));
            }
        }
        let dim = index.len();
        let mut entries = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in i..dim {
                let value = match index.get(i).union(index.get(j)) {
                    Some(u) => support
                        .iter()
                        .filter(|(x, _)| u.agrees_with(x))
                        .map(|(_, p)| p)
                        .sum(),
                    None => 0.0,
                };
                entries[(i, j)] = value;
                entries[(j, i)] = value;
            }
        }
        Ok(MomentMatrix { index, entries })
    }

    /// Indicator moments of one full assignment.
    pub fn from_assignment(index: Arc<MomentIndex>, labels: &[usize]) -> Result<Self> {
        Self::from_distribution(index, &[(labels.to_vec(), 1.0)])
    }

    pub fn index(&self) -> &Arc<MomentIndex> {
        &self.index
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn level(&self) -> usize {
        self.index.level()
    }

    pub fn n(&self) -> usize {
        self.index.n()
    }

    pub fn k(&self) -> usize {
        self.index.k()
    }

    pub fn dim(&self) -> usize {
        self.index.len()
    }

    /// `y_U(beta)` read from its canonical entry; `None` if `|U| > 2r`.
    pub fn moment(&self, union: &AssignmentIndex) -> Option<f64> {
        self.index
            .canonical_entry(union)
            .map(|(a, b)| self.entries[(a, b)])
    }

    /// Leading principal block of a lower level (the index is a prefix).
    pub fn restrict(&self, level: usize) -> Result<MomentMatrix> {
        if level > self.level() {
            return Err(Error::InvalidArgument(format!(
                "cannot restrict level {} to {level}",
                self.level()
            )));
        }
        let index = Arc::new(MomentIndex::with_cap(
            self.n(),
            self.k(),
            level,
            usize::MAX,
        )?);
        let d = index.len();
        let entries = self.entries.view((0, 0), (d, d)).into_owned();
        Ok(MomentMatrix { index, entries })
    }

    /// Unclamped `(y_{var->0}, ..., y_{var->k-1})`.
    pub fn raw_marginal(&self, var: usize) -> Result<Vec<f64>> {
        if self.level() == 0 {
            return Err(Error::InvalidArgument(
                "level-0 moments carry no marginals".into(),
            ));
        }
        if var >= self.n() {
            return Err(Error::InvalidArgument(format!("variable {var} out of range")));
        }
        Ok((0..self.k())
            .map(|l| {
                let pos = self.index.position_of_single(var, l).expect("level >= 1");
                self.entries[(0, pos)]
            })
            .collect())
    }

    /// Marginal distribution of `var`, clamped to `[0, 1]`.
    pub fn marginal(&self, var: usize, tol: &Tolerances) -> Result<Vec<f64>> {
        let raw = self.raw_marginal(var)?;
        let sum: f64 = raw.iter().sum();
        if (sum - 1.0).abs() > 10.0 * tol.consistency {
            return Err(Error::InvalidMoments(format!(
                "marginal of variable {var} sums to {sum}"
            )));
        }
        Ok(raw.into_iter().map(|p| p.clamp(0.0, 1.0)).collect())
    }

    /// Condition on the event `var -> label`, dropping one level:
    /// `y'_S(a) = y_{S ∪ var}(a ∪ label) / y_var(label)`.
    pub fn condition(&self, var: usize, label: usize, p_min: f64) -> Result<MomentMatrix> {
        if self.level() == 0 {
            return Err(Error::InvalidArgument("cannot condition level-0 moments".into()));
        }
        if var >= self.n() || label >= self.k() {
            return Err(Error::InvalidArgument(format!(
                "event {var} -> {label} out of range"
            )));
        }
        let event_pos = self.index.position_of_single(var, label).expect("level >= 1");
        let prob = self.entries[(0, event_pos)];
        if !(prob >= p_min) {
            return Err(Error::NearZeroProbability { prob, p_min });
        }
        let index = Arc::new(MomentIndex::with_cap(
            self.n(),
            self.k(),
            self.level() - 1,
            usize::MAX,
        )?);
        let lifted: Vec<Option<usize>> = index
            .entries()
            .iter()
            .map(|a| {
                a.with(var, label)
                    .map(|b| self.index.position(&b).expect("lifted row is representable"))
            })
            .collect();
        let d = index.len();
        let mut entries = DMatrix::zeros(d, d);
        for i in 0..d {
            let Some(pi) = lifted[i] else { continue };
            for j in i..d {
                let Some(pj) = lifted[j] else { continue };
                let v = self.entries[(pi, pj)] / prob;
                entries[(i, j)] = v;
                entries[(j, i)] = v;
            }
        }
        Ok(MomentMatrix { index, entries })
    }

    /// Check every invariant class and report the worst violation per class.
    pub fn validate(&self, tol: &Tolerances) -> ValidationReport {
        let mut report = ValidationReport::default();
        let m = &self.entries;
        let d = self.dim();
        if m.nrows() != d || m.ncols() != d {
            report.record(ViolationClass::Shape, f64::INFINITY);
            return report;
        }

        let pin = (m[(0, 0)] - 1.0).abs();
        if pin > tol.consistency {
            report.record(ViolationClass::Pinning, pin);
        }

        for i in 0..d {
            for j in i + 1..d {
                let asym = (m[(i, j)] - m[(j, i)]).abs();
                if asym > 0.0 || m[(i, j)].is_nan() != m[(j, i)].is_nan() {
                    report.record(ViolationClass::Symmetry, asym);
                }
            }
        }

        for i in 0..d {
            let x = m[(i, i)];
            let excess = if x < -tol.consistency {
                -x
            } else if x > 1.0 + tol.consistency {
                x - 1.0
            } else {
                0.0
            };
            if excess > 0.0 || x.is_nan() {
                report.record(ViolationClass::DiagonalRange, excess);
            }
        }

        for i in 0..d {
            for j in i..d {
                let gap = match self.index.get(i).union(self.index.get(j)) {
                    None => m[(i, j)].abs(),
                    Some(u) => {
                        let (a, b) = self.index.canonical_entry(&u).expect("union of rows fits 2r");
                        (m[(i, j)] - m[(a, b)]).abs()
                    }
                };
                if gap > tol.consistency || gap.is_nan() {
                    report.record(ViolationClass::Consistency, gap);
                }
            }
        }

        let r = self.level();
        if r >= 1 {
            let max_union = (2 * r).min(self.n());
            for u in assignments_up_to(self.n(), self.k(), max_union.saturating_sub(1)) {
                let base = self.moment(&u).expect("representable");
                for var in 0..self.n() {
                    if u.label_of(var).is_some() {
                        continue;
                    }
                    let sum: f64 = (0..self.k())
                        .map(|l| self.moment(&u.with(var, l).unwrap()).expect("representable"))
                        .sum();
                    let gap = (sum - base).abs();
                    if gap > tol.consistency || gap.is_nan() {
                        report.record(ViolationClass::Marginalization, gap);
                    }
                }
            }
        }

        let min_eig = linalg::min_eigenvalue(m);
        if min_eig < -tol.psd || min_eig.is_nan() {
            report.record(ViolationClass::Psd, -min_eig);
        }

        report
    }
}
