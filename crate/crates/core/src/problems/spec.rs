use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::linalg;
use crate::relaxation::Sense;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    MinBisection,
    MaxCut,
    UniqueGames,
    IndependentSet,
    Qip,
    SparsestCut,
    CapacityCutPacking,
    TwoCsp,
    #[serde(rename = "partial-3-coloring")]
    Partial3Coloring,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 9] = [
        ProblemKind::MinBisection,
        ProblemKind::MaxCut,
        ProblemKind::UniqueGames,
        ProblemKind::IndependentSet,
        ProblemKind::Qip,
        ProblemKind::SparsestCut,
        ProblemKind::CapacityCutPacking,
        ProblemKind::TwoCsp,
        ProblemKind::Partial3Coloring,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::MinBisection => "min-bisection",
            ProblemKind::MaxCut => "max-cut",
            ProblemKind::UniqueGames => "unique-games",
            ProblemKind::IndependentSet => "independent-set",
            ProblemKind::Qip => "qip",
            ProblemKind::SparsestCut => "sparsest-cut",
            ProblemKind::CapacityCutPacking => "capacity-cut-packing",
            ProblemKind::TwoCsp => "two-csp",
            ProblemKind::Partial3Coloring => "partial-3-coloring",
        }
    }

    /// Two labels, i.e. the kind is a cut/partition problem.
    pub fn is_binary(self) -> bool {
        !matches!(
            self,
            ProblemKind::UniqueGames | ProblemKind::TwoCsp | ProblemKind::Partial3Coloring
        )
    }

    /// Kinds whose guarantee is driven by the graph's low normalized-Laplacian spectrum.
    pub fn is_cut_spectral(self) -> bool {
        matches!(
            self,
            ProblemKind::MinBisection | ProblemKind::SparsestCut | ProblemKind::CapacityCutPacking
        )
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown problem kind {s:?}")))
    }
}

/// `sum_{i on side} coeffs[i] <= budget`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingConstraint {
    pub side: usize,
    pub coeffs: Vec<f64>,
    pub budget: f64,
}

impl PackingConstraint {
    pub fn load(&self, labels: &[usize]) -> f64 {
        labels
            .iter()
            .zip(&self.coeffs)
            .filter(|(&l, _)| l == self.side)
            .map(|(_, &c)| c)
            .sum()
    }
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Kind-specific data. Per-edge vectors are aligned with `ProblemSpec::edges`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Unique games: edge `(u, v)` is satisfied iff `label_v = perm[label_u]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutations: Option<Vec<Vec<usize>>>,
    /// Two-CSP payoff tables, row-major `k x k` indexed `(label_u, label_v)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tables: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertex_weights: Option<Vec<f64>>,
    /// Hard-zero moment constraints instead of soft penalties.
    #[serde(default, skip_serializing_if = "is_false")]
    pub strict: bool,
    /// QIP objective matrix (symmetric PSD).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sense: Option<Sense>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub packing: Option<Vec<PackingConstraint>>,
    /// Partial coloring penalty per monochromatic edge (default `2n`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<f64>,
    /// Sparsest cut: fix the relaxation's side size instead of sweeping.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side_size: Option<f64>,
    /// Planted bisection: the hidden labels, informational only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted: Option<Vec<usize>>,
}

/// A problem instance as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub format_version: u32,
    pub kind: ProblemKind,
    pub n: usize,
    pub k_hint: usize,
    pub edges: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub params: Params,
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind, n: usize, edges: Vec<(usize, usize, f64)>) -> Self {
        let k_hint = match kind {
            ProblemKind::Partial3Coloring => 4,
            ProblemKind::UniqueGames | ProblemKind::TwoCsp => 3,
            _ => 2,
        };
        ProblemSpec {
            format_version: FORMAT_VERSION,
            kind,
            n,
            k_hint,
            edges,
            params: Params::default(),
        }
    }

    pub fn with_params(mut self, params: Params) -> Self {
        self.params = params;
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k_hint = k;
        self
    }

    /// Label count used by the encoding.
    pub fn k(&self) -> usize {
        match self.kind {
            ProblemKind::UniqueGames | ProblemKind::TwoCsp => self.k_hint,
            ProblemKind::Partial3Coloring => 4,
            _ => 2,
        }
    }

    pub fn sense(&self) -> Sense {
        match self.kind {
            ProblemKind::MinBisection
            | ProblemKind::SparsestCut
            | ProblemKind::CapacityCutPacking => Sense::Minimize,
            ProblemKind::Qip => self.params.sense.unwrap_or(Sense::Maximize),
            _ => Sense::Maximize,
        }
    }

    pub fn weighted_degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for &(u, v, w) in &self.edges {
            d[u] += w;
            d[v] += w;
        }
        d
    }

    pub fn vertex_weight(&self, v: usize) -> f64 {
        self.params
            .vertex_weights
            .as_ref()
            .map_or(1.0, |w| w[v])
    }

    pub fn coloring_penalty(&self) -> f64 {
        self.params.penalty.unwrap_or(2.0 * self.n as f64)
    }

    /// Orient every edge `u < v`, sort edges, and carry per-edge data along.
    pub fn canonicalize(&mut self) -> Result<()> {
        let k = self.k();
        for (e, edge) in self.edges.iter_mut().enumerate() {
            if edge.0 == edge.1 {
                return Err(Error::InvalidSpec(format!("edge {e} is a self-loop")));
            }
            if edge.0 > edge.1 {
                *edge = (edge.1, edge.0, edge.2);
                if let Some(perms) = self.params.permutations.as_mut() {
                    if let Some(p) = perms.get_mut(e) {
                        let mut inv = vec![0; p.len()];
                        for (a, &b) in p.iter().enumerate() {
                            if b < inv.len() {
                                inv[b] = a;
                            }
                        }
                        *p = inv;
                    }
                }
                if let Some(tables) = self.params.tables.as_mut() {
                    if let Some(t) = tables.get_mut(e) {
                        if t.len() == k * k {
                            let old = t.clone();
                            for a in 0..k {
                                for b in 0..k {
                                    t[b * k + a] = old[a * k + b];
                                }
                            }
                        }
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..self.edges.len()).collect();
        order.sort_by(|&a, &b| {
            let (ea, eb) = (self.edges[a], self.edges[b]);
            (ea.0, ea.1).cmp(&(eb.0, eb.1)).then(ea.2.total_cmp(&eb.2))
        });
        self.edges = order.iter().map(|&i| self.edges[i]).collect();
        if let Some(perms) = self.params.permutations.as_mut() {
            if perms.len() == order.len() {
                *perms = order.iter().map(|&i| perms[i].clone()).collect();
            }
        }
        if let Some(tables) = self.params.tables.as_mut() {
            if tables.len() == order.len() {
                *tables = order.iter().map(|&i| tables[i].clone()).collect();
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.format_version != FORMAT_VERSION {
            return bad(format!("unsupported format_version {}", self.format_version));
        }
        if self.n == 0 {
            return bad("n must be at least 1".into());
        }
        let k = self.k();
        if k < 2 {
            return bad(format!("label count {k} < 2"));
        }
        for (e, &(u, v, w)) in self.edges.iter().enumerate() {
            if u >= self.n || v >= self.n || u == v {
                return bad(format!("edge {e} = ({u}, {v}) is out of range or a loop"));
            }
            if !w.is_finite() || w < 0.0 {
                return bad(format!("edge {e} weight {w} is not finite and nonnegative"));
            }
        }
        let m = self.edges.len();
        let p = &self.params;
        match self.kind {
            ProblemKind::UniqueGames => {
                let Some(perms) = &p.permutations else {
                    return bad("unique-games needs params.permutations".into());
                };
                if perms.len() != m {
                    return bad(format!("{} permutations for {m} edges", perms.len()));
                }
                for (e, perm) in perms.iter().enumerate() {
                    let mut seen = vec![false; k];
                    if perm.len() != k
                        || perm.iter().any(|&x| x >= k || std::mem::replace(&mut seen[x], true))
                    {
                        return bad(format!("permutation {e} is not a bijection on [{k}]"));
                    }
                }
            }
            ProblemKind::TwoCsp => {
                let Some(tables) = &p.tables else {
                    return bad("two-csp needs params.tables".into());
                };
                if tables.len() != m {
                    return bad(format!("{} tables for {m} edges", tables.len()));
                }
                if tables
                    .iter()
                    .any(|t| t.len() != k * k || t.iter().any(|x| !x.is_finite()))
                {
                    return bad(format!("two-csp tables must have {} finite entries", k * k));
                }
            }
            ProblemKind::Qip => {
                let Some(a) = &p.matrix else {
                    return bad("qip needs params.matrix".into());
                };
                if a.len() != self.n || a.iter().any(|row| row.len() != self.n) {
                    return bad(format!("qip matrix must be {0}x{0}", self.n));
                }
                let dense = nalgebra::DMatrix::from_fn(self.n, self.n, |i, j| a[i][j]);
                if dense.iter().any(|x| !x.is_finite()) {
                    return bad("qip matrix is not finite".into());
                }
                for i in 0..self.n {
                    for j in 0..i {
                        if (a[i][j] - a[j][i]).abs() > 1e-12 {
                            return bad("qip matrix is not symmetric".into());
                        }
                    }
                }
                let min_eig = linalg::min_eigenvalue(&dense);
                if min_eig < -1e-8 {
                    return bad(format!("qip matrix is not PSD (min eigenvalue {min_eig:e})"));
                }
            }
            ProblemKind::CapacityCutPacking => {
                for (c, con) in p.packing.iter().flatten().enumerate() {
                    if con.side > 1
                        || con.coeffs.len() != self.n
                        || con.coeffs.iter().any(|&x| !x.is_finite() || x < 0.0)
                        || !con.budget.is_finite()
                    {
                        return bad(format!(
                            "packing constraint {c} needs side in {{0,1}} and {} nonnegative coefficients",
                            self.n
                        ));
                    }
                }
            }
            ProblemKind::SparsestCut => {
                if let Some(s) = p.side_size {
                    if !(s > 0.0 && s < self.n as f64) {
                        return bad(format!("side_size {s} outside (0, n)"));
                    }
                }
            }
            _ => {}
        }
        if let Some(w) = &p.vertex_weights {
            if w.len() != self.n || w.iter().any(|&x| !x.is_finite() || x < 0.0) {
                return bad(format!("vertex_weights must be {} nonnegative values", self.n));
            }
        }
        if let Some(pen) = p.penalty {
            if !(pen.is_finite() && pen > 0.0) {
                return bad(format!("penalty {pen} must be positive"));
            }
        }
        if let Some(planted) = &p.planted {
            if planted.len() != self.n || planted.iter().any(|&l| l >= k) {
                return bad("planted labels do not fit the instance".into());
            }
        }
        Ok(())
    }

    /// Canonical on-disk bytes (edges oriented and sorted, 17 significant digits).
    pub fn to_canonical_json(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.canonicalize()?;
        Ok(io::to_canonical_json(&copy))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut spec: ProblemSpec = serde_json::from_str(text)
            .map_err(|e| Error::InvalidSpec(format!("cannot parse instance: {e}")))?;
        spec.canonicalize()?;
        spec.validate()?;
        Ok(spec)
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> Result<String> {
        Ok(io::sha256_hex(self.to_canonical_json()?.as_bytes()))
    }
}
