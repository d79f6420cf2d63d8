use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::spec::{PackingConstraint, Params, ProblemKind, ProblemSpec};

/// Largest vertex count the generators accept.
pub const GEN_VERTEX_CAP: usize = 5000;

const REGULAR_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    Ring { n: usize },
    Grid { rows: usize, cols: usize },
    RandomRegular { n: usize, degree: usize },
    Gnp { n: usize, p: f64 },
    PlantedBisection { n: usize, p_in: f64, p_out: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Ring { .. } => "ring",
            Family::Grid { .. } => "grid",
            Family::RandomRegular { .. } => "random-regular",
            Family::Gnp { .. } => "gnp",
            Family::PlantedBisection { .. } => "planted-bisection",
        }
    }

    pub fn vertices(&self) -> usize {
        match *self {
            Family::Ring { n }
            | Family::RandomRegular { n, .. }
            | Family::Gnp { n, .. }
            | Family::PlantedBisection { n, .. } => n,
            Family::Grid { rows, cols } => rows.saturating_mul(cols),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Family names accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyName {
    Ring,
    Grid,
    RandomRegular,
    Gnp,
    PlantedBisection,
}

impl FromStr for FamilyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "ring" => FamilyName::Ring,
            "grid" => FamilyName::Grid,
            "random-regular" => FamilyName::RandomRegular,
            "gnp" => FamilyName::Gnp,
            "planted-bisection" => FamilyName::PlantedBisection,
            _ => return Err(Error::InvalidArgument(format!("unknown graph family {s:?}"))),
        })
    }
}

fn probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} = {p} is not a probability")))
    }
}

fn ring_edges(n: usize) -> BTreeSet<(usize, usize)> {
    let mut edges = BTreeSet::new();
    if n >= 2 {
        for i in 0..n {
            let j = (i + 1) % n;
            if i != j {
                edges.insert((i.min(j), i.max(j)));
            }
        }
    }
    edges
}

fn grid_edges(rows: usize, cols: usize) -> BTreeSet<(usize, usize)> {
    let mut edges = BTreeSet::new();
    for r in 0..rows {
        for c in 0..cols {
            let v = r * cols + c;
            if c + 1 < cols {
                edges.insert((v, v + 1));
            }
            if r + 1 < rows {
                edges.insert((v, v + cols));
            }
        }
    }
    edges
}

/// Configuration model, retried until the pairing is simple.
fn regular_edges(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Result<BTreeSet<(usize, usize)>> {
    if d >= n || (n * d) % 2 == 1 {
        return Err(Error::InvalidArgument(format!(
            "no simple {d}-regular graph on {n} vertices"
        )));
    }
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, d)).collect();
    for _ in 0..REGULAR_ATTEMPTS {
        stubs.shuffle(rng);
        let mut edges = BTreeSet::new();
        let simple = stubs.chunks(2).all(|pair| {
            let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            u != v && edges.insert((u, v))
        });
        if simple {
            return Ok(edges);
        }
    }
    Err(Error::InvalidArgument(format!(
        "could not sample a simple {d}-regular graph on {n} vertices"
    )))
}

fn gnp_edges(n: usize, p: f64, rng: &mut ChaCha8Rng) -> BTreeSet<(usize, usize)> {
    let mut edges = BTreeSet::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.insert((u, v));
            }
        }
    }
    edges
}

/// Hidden balanced labeling (label 1 on `n / 2` vertices), then edges with
/// probability `p_in` inside a side and `p_out` across.
fn planted_edges(
    n: usize,
    p_in: f64,
    p_out: f64,
    rng: &mut ChaCha8Rng,
) -> (BTreeSet<(usize, usize)>, Vec<usize>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut labels = vec![0; n];
    for &v in &order[..n / 2] {
        labels[v] = 1;
    }
    let mut edges = BTreeSet::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if labels[u] == labels[v] { p_in } else { p_out };
            if rng.random_bool(p) {
                edges.insert((u, v));
            }
        }
    }
    (edges, labels)
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Generate a canonical instance. Unit edge weights; kind-specific data is
/// drawn from the same seeded stream after the graph.
///
/// `k` applies to unique-games and two-csp (default 3).
pub fn generate(kind: ProblemKind, family: &Family, k: Option<usize>, seed: u64) -> Result<ProblemSpec> {
    let n = family.vertices();
    if n == 0 {
        return Err(Error::InvalidArgument("instance needs at least one vertex".into()));
    }
    if n > GEN_VERTEX_CAP {
        return Err(Error::Capacity {
            what: "generated vertex count",
            actual: n as u128,
            cap: GEN_VERTEX_CAP as u128,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut planted = None;
    let edges = match *family {
        Family::Ring { n } => ring_edges(n),
        Family::Grid { rows, cols } => grid_edges(rows, cols),
        Family::RandomRegular { n, degree } => regular_edges(n, degree, &mut rng)?,
        Family::Gnp { n, p } => {
            probability("p", p)?;
            gnp_edges(n, p, &mut rng)
        }
        Family::PlantedBisection { n, p_in, p_out } => {
            if !kind.is_binary() {
                return Err(Error::InvalidArgument(format!(
                    "planted-bisection needs a two-label kind, not {kind}"
                )));
            }
            probability("p_in", p_in)?;
            probability("p_out", p_out)?;
            let (edges, labels) = planted_edges(n, p_in, p_out, &mut rng);
            planted = Some(labels);
            edges
        }
    };
    let edges: Vec<(usize, usize, f64)> = edges.into_iter().map(|(u, v)| (u, v, 1.0)).collect();
    let mut spec = ProblemSpec::new(kind, n, edges);
    if let Some(k) = k {
        spec.k_hint = k;
    }
    let k = spec.k();
    let m = spec.edges.len();
    let mut params = Params {
        planted,
        ..Params::default()
    };
    match kind {
        ProblemKind::UniqueGames => {
            params.permutations = Some(
                (0..m)
                    .map(|_| {
                        let mut p: Vec<usize> = (0..k).collect();
                        p.shuffle(&mut rng);
                        p
                    })
                    .collect(),
            );
        }
        ProblemKind::TwoCsp => {
            params.tables = Some(
                (0..m)
                    .map(|_| (0..k * k).map(|_| round3(rng.random::<f64>())).collect())
                    .collect(),
            );
        }
        ProblemKind::Qip => {
            // graph Laplacian: PSD, and x'Lx / 4 is the cut weight
            let mut a = vec![vec![0.0; n]; n];
            for &(u, v, w) in &spec.edges {
                a[u][u] += w;
                a[v][v] += w;
                a[u][v] -= w;
                a[v][u] -= w;
            }
            params.matrix = Some(a);
        }
        ProblemKind::CapacityCutPacking => {
            let budget = (2 * n).div_ceil(3) as f64;
            params.packing = Some(
                (0..2)
                    .map(|side| PackingConstraint {
                        side,
                        coeffs: vec![1.0; n],
                        budget,
                    })
                    .collect(),
            );
        }
        _ => {}
    }
    spec.params = params;
    spec.canonicalize()?;
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::evaluate::evaluate;
    use crate::problems::oracle::oracle;

    #[test]
    fn ring_max_cut_is_c5() {
        let spec = generate(ProblemKind::MaxCut, &Family::Ring { n: 5 }, None, 0).unwrap();
        assert_eq!(spec.edges.len(), 5);
        assert_eq!(oracle(&spec).unwrap().opt_value, 4.0);
    }

    #[test]
    fn empty_gnp_cuts_nothing() {
        let spec = generate(ProblemKind::MaxCut, &Family::Gnp { n: 6, p: 0.0 }, None, 3).unwrap();
        assert!(spec.edges.is_empty());
        assert_eq!(evaluate(&spec, &[0, 1, 0, 1, 1, 0]).value, 0.0);
    }

    #[test]
    fn same_seed_same_bytes() {
        let fam = Family::Gnp { n: 8, p: 0.4 };
        for kind in ProblemKind::ALL {
            let a = generate(kind, &fam, None, 11).unwrap().to_canonical_json().unwrap();
            let b = generate(kind, &fam, None, 11).unwrap().to_canonical_json().unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn regular_degrees() {
        let spec = generate(ProblemKind::MaxCut, &Family::RandomRegular { n: 10, degree: 3 }, None, 5).unwrap();
        assert!(spec.weighted_degrees().iter().all(|&d| d == 3.0));
        assert!(generate(ProblemKind::MaxCut, &Family::RandomRegular { n: 5, degree: 3 }, None, 5).is_err());
    }

    #[test]
    fn grid_shape() {
        let spec = generate(ProblemKind::MaxCut, &Family::Grid { rows: 2, cols: 3 }, None, 0).unwrap();
        assert_eq!(spec.n, 6);
        assert_eq!(spec.edges.len(), 7);
    }

    #[test]
    fn planted_bisection_is_balanced_and_binary_only() {
        let fam = Family::PlantedBisection { n: 10, p_in: 0.8, p_out: 0.1 };
        let spec = generate(ProblemKind::MinBisection, &fam, None, 1).unwrap();
        let planted = spec.params.planted.clone().unwrap();
        assert_eq!(planted.iter().filter(|&&l| l == 1).count(), 5);
        assert!(evaluate(&spec, &planted).feasible);
        assert!(generate(ProblemKind::UniqueGames, &fam, None, 1).is_err());
    }

    #[test]
    fn vertex_cap() {
        let err = generate(ProblemKind::MaxCut, &Family::Ring { n: GEN_VERTEX_CAP + 1 }, None, 0).unwrap_err();
        assert!(err.is_capacity());
    }
}
