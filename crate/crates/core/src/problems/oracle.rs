use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::evaluate::{is_feasible, value};
use super::spec::{ProblemKind, ProblemSpec};

/// Assignments the oracle may enumerate.
pub const ORACLE_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub opt_value: f64,
    pub witness: Vec<usize>,
    /// Assignments actually evaluated (pruned ones are not counted).
    pub enumerated: u64,
}

/// `k^n`, saturating.
pub fn search_space(n: usize, k: usize) -> u128 {
    let mut total: u128 = 1;
    for _ in 0..n {
        total = total.saturating_mul(k as u128);
    }
    total
}

/// Exact optimum by exhaustive enumeration in lexicographic order. A later
/// assignment replaces the incumbent only when strictly better, so the
/// witness is the lexicographically first optimum.
pub fn oracle(spec: &ProblemSpec) -> Result<OracleResult> {
    spec.validate()?;
    let (n, k) = (spec.n, spec.k());
    let space = search_space(n, k);
    if space > ORACLE_CAP {
        return Err(Error::Capacity {
            what: "oracle search space",
            actual: space,
            cap: ORACLE_CAP,
        });
    }
    let sense = spec.sense();
    let balanced = spec.kind == ProblemKind::MinBisection;
    let mut labels = vec![0usize; n];
    let mut ones = 0usize;
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut enumerated = 0u64;
    loop {
        if !balanced || ones == n / 2 {
            enumerated += 1;
            if is_feasible(spec, &labels) {
                let v = value(spec, &labels);
                if best.as_ref().is_none_or(|(b, _)| sense.better(v, *b)) {
                    best = Some((v, labels.clone()));
                }
            }
        }
        // advance the last position first so the order is lexicographic
        let mut pos = n;
        loop {
            if pos == 0 {
                return best
                    .map(|(opt_value, witness)| OracleResult {
                        opt_value,
                        witness,
                        enumerated,
                    })
                    .ok_or_else(|| Error::InvalidSpec("no feasible assignment exists".into()));
            }
            pos -= 1;
            if labels[pos] == 1 {
                ones -= 1;
            }
            labels[pos] += 1;
            if labels[pos] < k {
                if labels[pos] == 1 {
                    ones += 1;
                }
                break;
            }
            labels[pos] = 0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::evaluate::evaluate;
    use crate::problems::spec::Params;

    fn complete(kind: ProblemKind, n: usize) -> ProblemSpec {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v, 1.0));
            }
        }
        ProblemSpec::new(kind, n, edges)
    }

    fn ring(kind: ProblemKind, n: usize) -> ProblemSpec {
        ProblemSpec::new(kind, n, (0..n).map(|i| (i.min((i + 1) % n), i.max((i + 1) % n), 1.0)).collect())
    }

    #[test]
    fn k4_bisection_and_triangle_cut() {
        let r = oracle(&complete(ProblemKind::MinBisection, 4)).unwrap();
        assert_eq!(r.opt_value, 4.0);
        assert_eq!(r.enumerated, 6);
        assert_eq!(r.witness, vec![0, 0, 1, 1]);
        assert_eq!(oracle(&complete(ProblemKind::MaxCut, 3)).unwrap().opt_value, 2.0);
    }

    #[test]
    fn c5_values() {
        assert_eq!(oracle(&ring(ProblemKind::MaxCut, 5)).unwrap().opt_value, 4.0);
        assert_eq!(oracle(&ring(ProblemKind::IndependentSet, 5)).unwrap().opt_value, 2.0);
    }

    #[test]
    fn sparsest_cut_two_triangles() {
        let edges = vec![
            (0, 1, 1.0),
            (0, 2, 1.0),
            (1, 2, 1.0),
            (3, 4, 1.0),
            (3, 5, 1.0),
            (4, 5, 1.0),
            (2, 3, 1.0),
        ];
        let r = oracle(&ProblemSpec::new(ProblemKind::SparsestCut, 6, edges)).unwrap();
        assert_eq!(r.opt_value, 1.0 / 9.0);
        assert_eq!(r.witness, vec![0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn single_edge_and_identity_games() {
        assert_eq!(
            oracle(&ProblemSpec::new(ProblemKind::MaxCut, 2, vec![(0, 1, 1.0)])).unwrap().opt_value,
            1.0
        );
        let mut spec = ring(ProblemKind::UniqueGames, 4);
        spec.params.permutations = Some(vec![vec![0, 1, 2]; 4]);
        assert_eq!(oracle(&spec).unwrap().opt_value, 4.0);
    }

    #[test]
    fn qip_identity_scores_n() {
        let n = 4;
        let matrix: Vec<Vec<f64>> =
            (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let spec = ProblemSpec::new(ProblemKind::Qip, n, vec![]).with_params(Params {
            matrix: Some(matrix),
            sense: Some(crate::relaxation::Sense::Minimize),
            ..Params::default()
        });
        let r = oracle(&spec).unwrap();
        assert_eq!(r.opt_value, 4.0);
        assert_eq!(evaluate(&spec, &[1, 0, 1, 1]).value, 4.0);
    }

    #[test]
    fn witness_evaluates_to_optimum() {
        for kind in [ProblemKind::MinBisection, ProblemKind::Partial3Coloring, ProblemKind::IndependentSet] {
            let spec = ring(kind, 5);
            let r = oracle(&spec).unwrap();
            let e = evaluate(&spec, &r.witness);
            assert!(e.feasible);
            assert_eq!(e.value, r.opt_value);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let spec = ring(ProblemKind::MaxCut, 24);
        assert!(oracle(&spec).unwrap_err().is_capacity());
    }
}
