use crate::error::Result;
use crate::relaxation::{AssignmentIndex, GlobalConstraint, LabelingInstance, Relation, Sense, Term};

use super::spec::{ProblemKind, ProblemSpec};

const CUT_TABLE: [f64; 4] = [0.0, 1.0, 1.0, 0.0];

/// One SDP to solve for a spec, with the factor converting its objective
/// into the problem's native units.
#[derive(Debug, Clone)]
pub struct RelaxationCase {
    pub label: String,
    pub instance: LabelingInstance,
    pub scale: f64,
}

fn balance(n: usize, side: usize, size: f64) -> GlobalConstraint {
    GlobalConstraint {
        coeffs: (0..n).map(|i| (i, side, 1.0)).collect(),
        rhs: size,
        relation: Relation::Eq,
    }
}

fn cut_instance(spec: &ProblemSpec, sense: Sense) -> LabelingInstance {
    let mut inst = LabelingInstance::new(spec.n, 2, sense);
    for &(u, v, w) in &spec.edges {
        inst.terms.push(Term::pair(u, v, CUT_TABLE.to_vec(), w));
    }
    inst
}

fn sparsest_cut_instance(spec: &ProblemSpec, side_size: f64) -> LabelingInstance {
    let mut inst = cut_instance(spec, Sense::Minimize);
    inst.global_constraints.push(balance(spec.n, 1, side_size));
    inst
}

/// Encode a problem as a labeling instance.
pub fn encode(spec: &ProblemSpec) -> Result<LabelingInstance> {
    spec.validate()?;
    let n = spec.n;
    let k = spec.k();
    let inst = match spec.kind {
        ProblemKind::MaxCut => cut_instance(spec, Sense::Maximize),
        ProblemKind::MinBisection => {
            let mut inst = cut_instance(spec, Sense::Minimize);
            inst.global_constraints.push(balance(n, 1, (n / 2) as f64));
            inst
        }
        ProblemKind::SparsestCut => {
            sparsest_cut_instance(spec, spec.params.side_size.unwrap_or(n as f64 / 2.0))
        }
        ProblemKind::CapacityCutPacking => {
            let mut inst = cut_instance(spec, Sense::Minimize);
            for con in spec.params.packing.iter().flatten() {
                inst.global_constraints.push(GlobalConstraint {
                    coeffs: con
                        .coeffs
                        .iter()
                        .enumerate()
                        .filter(|(_, &c)| c != 0.0)
                        .map(|(i, &c)| (i, con.side, c))
                        .collect(),
                    rhs: con.budget,
                    relation: Relation::Le,
                });
            }
            inst
        }
        ProblemKind::UniqueGames => {
            let perms = spec.params.permutations.as_ref().expect("validated");
            let mut inst = LabelingInstance::new(n, k, Sense::Maximize);
            for (&(u, v, w), perm) in spec.edges.iter().zip(perms) {
                let mut table = vec![0.0; k * k];
                for (a, &b) in perm.iter().enumerate() {
                    table[a * k + b] = 1.0;
                }
                inst.terms.push(Term::pair(u, v, table, w));
            }
            inst
        }
        ProblemKind::TwoCsp => {
            let tables = spec.params.tables.as_ref().expect("validated");
            let mut inst = LabelingInstance::new(n, k, Sense::Maximize);
            for (&(u, v, w), table) in spec.edges.iter().zip(tables) {
                inst.terms.push(Term::pair(u, v, table.clone(), w));
            }
            inst
        }
        ProblemKind::IndependentSet => {
            // label 1 = in the set
            let mut inst = LabelingInstance::new(n, 2, Sense::Maximize);
            let total: f64 = (0..n).map(|v| spec.vertex_weight(v)).sum();
            let big = 2.0 * total;
            for v in 0..n {
                inst.terms.push(Term::unary(v, vec![0.0, 1.0], spec.vertex_weight(v)));
            }
            for &(u, v, _) in &spec.edges {
                inst.terms.push(Term::pair(u, v, vec![0.0, 0.0, 0.0, -1.0], big));
                if spec.params.strict {
                    inst.forbidden
                        .push(AssignmentIndex::from_pairs(&[(u, 1), (v, 1)]).expect("u != v"));
                }
            }
            inst
        }
        ProblemKind::Qip => {
            // label 0 -> x = +1, label 1 -> x = -1
            let a = spec.params.matrix.as_ref().expect("validated");
            let mut inst = LabelingInstance::new(n, 2, spec.sense());
            for i in 0..n {
                if a[i][i] != 0.0 {
                    inst.terms.push(Term::unary(i, vec![a[i][i], a[i][i]], 1.0));
                }
            }
            for i in 0..n {
                for j in i + 1..n {
                    let c = 2.0 * a[i][j];
                    if c != 0.0 {
                        inst.terms.push(Term::pair(i, j, vec![c, -c, -c, c], 1.0));
                    }
                }
            }
            inst
        }
        ProblemKind::Partial3Coloring => {
            // labels 0..3 are colors, 3 = uncolored
            let mut inst = LabelingInstance::new(n, 4, Sense::Maximize);
            for v in 0..n {
                inst.terms.push(Term::unary(v, vec![1.0, 1.0, 1.0, 0.0], 1.0));
            }
            let penalty = spec.coloring_penalty();
            let mut table = vec![0.0; 16];
            for c in 0..3 {
                table[c * 4 + c] = -1.0;
            }
            for &(u, v, w) in &spec.edges {
                inst.terms.push(Term::pair(u, v, table.clone(), penalty * w));
                if spec.params.strict {
                    for c in 0..3 {
                        inst.forbidden
                            .push(AssignmentIndex::from_pairs(&[(u, c), (v, c)]).expect("u != v"));
                    }
                }
            }
            inst
        }
    };
    inst.validate()?;
    Ok(inst)
}

/// The SDPs solved for a spec. Sparsest cut without a fixed `side_size`
/// solves one relaxation per side size `s = 1..=n/2`, each scaled by
/// `1 / (s (n - s))`; the minimum is a lower bound on the optimal ratio.
pub fn relaxation_cases(spec: &ProblemSpec) -> Result<Vec<RelaxationCase>> {
    if spec.kind == ProblemKind::SparsestCut {
        spec.validate()?;
        let n = spec.n;
        let sizes: Vec<f64> = match spec.params.side_size {
            Some(s) => vec![s],
            None => (1..=n / 2).map(|s| s as f64).collect(),
        };
        if sizes.is_empty() {
            return Err(crate::error::Error::InvalidSpec(
                "sparsest cut needs at least two vertices".into(),
            ));
        }
        return Ok(sizes
            .into_iter()
            .map(|s| RelaxationCase {
                label: format!("side-size-{s}"),
                instance: sparsest_cut_instance(spec, s),
                scale: 1.0 / (s * (n as f64 - s)),
            })
            .collect());
    }
    Ok(vec![RelaxationCase {
        label: "main".into(),
        instance: encode(spec)?,
        scale: 1.0,
    }])
}
