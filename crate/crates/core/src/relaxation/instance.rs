use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relaxation::index::AssignmentIndex;

/// Optimization direction of an objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Minimize,
    Maximize,
}

impl Sense {
    /// True when `a` is strictly better than `b` under this sense.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Sense::Minimize => a < b,
            Sense::Maximize => a > b,
        }
    }

    pub fn worst(self) -> f64 {
        match self {
            Sense::Minimize => f64::INFINITY,
            Sense::Maximize => f64::NEG_INFINITY,
        }
    }
}

/// A weighted local payoff (or cost) over at most two variables.
///
/// `table` is indexed row-major by the labels of `scope` in scope order,
/// so a pair term reads `table[a * k + b]` for labels `(a, b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub scope: Vec<usize>,
    pub table: Vec<f64>,
    pub weight: f64,
}

impl Term {
    pub fn unary(var: usize, table: Vec<f64>, weight: f64) -> Self {
        Term {
            scope: vec![var],
            table,
            weight,
        }
    }

    pub fn pair(u: usize, v: usize, table: Vec<f64>, weight: f64) -> Self {
        Term {
            scope: vec![u, v],
            table,
            weight,
        }
    }

    fn table_offset(&self, labels: &[usize], k: usize) -> usize {
        self.scope
            .iter()
            .fold(0, |acc, &var| acc * k + labels[var])
    }

    /// Contribution `weight * table[...]` under a full assignment.
    pub fn value(&self, labels: &[usize], k: usize) -> f64 {
        self.weight * self.table[self.table_offset(labels, k)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    Eq,
    Le,
}

/// `sum coeff(var, label) * y_{var -> label}  (= | <=)  rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalConstraint {
    pub coeffs: Vec<(usize, usize, f64)>,
    pub rhs: f64,
    pub relation: Relation,
}

impl GlobalConstraint {
    pub fn lhs(&self, labels: &[usize]) -> f64 {
        self.coeffs
            .iter()
            .filter(|&&(var, label, _)| labels[var] == label)
            .map(|&(_, _, c)| c)
            .sum()
    }
}

/// `n` variables over `k` labels with a weighted sum of local terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelingInstance {
    pub n: usize,
    pub k: usize,
    pub terms: Vec<Term>,
    pub sense: Sense,
    #[serde(default)]
    pub global_constraints: Vec<GlobalConstraint>,
    /// Partial assignments whose pseudo-probability is pinned to zero.
    #[serde(default)]
    pub forbidden: Vec<AssignmentIndex>,
}

impl LabelingInstance {
    pub fn new(n: usize, k: usize, sense: Sense) -> Self {
        LabelingInstance {
            n,
            k,
            terms: Vec::new(),
            sense,
            global_constraints: Vec::new(),
            forbidden: Vec::new(),
        }
    }

    pub fn with_term(mut self, term: Term) -> Self {
        self.terms.push(term);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInstance("n must be at least 1".into()));
        }
        if self.k < 2 {
            return Err(Error::InvalidInstance(format!("k = {} < 2", self.k)));
        }
        for (t, term) in self.terms.iter().enumerate() {
            if term.scope.len() > 2 {
                return Err(Error::InvalidInstance(format!(
                    "term {t} has scope size {} > 2",
                    term.scope.len()
                )));
            }
            if term.scope.iter().any(|&v| v >= self.n) {
                return Err(Error::InvalidInstance(format!(
                    "term {t} references a variable outside [0, {})",
                    self.n
                )));
            }
            if term.scope.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidInstance(format!(
                    "term {t} scope is not strictly ascending"
                )));
            }
            let expected = self.k.pow(term.scope.len() as u32);
            if term.table.len() != expected {
                return Err(Error::InvalidInstance(format!(
                    "term {t} table has {} entries, expected {expected}",
                    term.table.len()
                )));
            }
            if !term.weight.is_finite() || term.weight < 0.0 {
                return Err(Error::InvalidInstance(format!(
                    "term {t} weight {} is not finite and nonnegative",
                    term.weight
                )));
            }
            if term.table.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInstance(format!("term {t} table is not finite")));
            }
        }
        for (c, con) in self.global_constraints.iter().enumerate() {
            if con
                .coeffs
                .iter()
                .any(|&(v, l, x)| v >= self.n || l >= self.k || !x.is_finite())
            {
                return Err(Error::InvalidInstance(format!(
                    "global constraint {c} has an out-of-range coefficient"
                )));
            }
        }
        for f in &self.forbidden {
            f.check(self.n, self.k)?;
        }
        Ok(())
    }

    /// Objective at a full assignment, summed in term order.
    pub fn objective(&self, labels: &[usize]) -> f64 {
        self.terms.iter().map(|t| t.value(labels, self.k)).sum()
    }

    /// Largest term scope; the relaxation level must represent it.
    pub fn max_scope(&self) -> usize {
        self.terms.iter().map(|t| t.scope.len()).max().unwrap_or(0)
    }
}
