use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::relaxation::index::{assignments_up_to, for_each_labeling, AssignmentIndex, MomentIndex, DEFAULT_INDEX_CAP};
use crate::relaxation::instance::{LabelingInstance, Relation};
use crate::relaxation::moments::MomentMatrix;
use crate::sdpsolve::{EqConstraint, SdpProblem, SdpSolution, SparseSym};

/// A level-`r` relaxation: the SDP plus the index needed to read moments back.
#[derive(Debug, Clone)]
pub struct Relaxation {
    pub sdp: SdpProblem,
    pub index: Arc<MomentIndex>,
}

impl Relaxation {
    /// Moment matrix from a solution's first block.
    pub fn moments(&self, solution: &SdpSolution) -> Result<MomentMatrix> {
        MomentMatrix::new(self.index.clone(), solution.x[0].clone())
    }

    pub fn level(&self) -> usize {
        self.index.level()
    }
}

fn single_entry(i: usize, j: usize, coef: f64, b: f64) -> EqConstraint {
    let mut a = SparseSym::new();
    a.add_linear(0, i, j, coef);
    EqConstraint { a, b }
}

/// Build the level-`r` moment SDP of an instance with the default index cap.
pub fn build_sdp(inst: &LabelingInstance, r: usize) -> Result<Relaxation> {
    build_sdp_with_cap(inst, r, DEFAULT_INDEX_CAP)
}

pub fn build_sdp_with_cap(inst: &LabelingInstance, r: usize, cap: usize) -> Result<Relaxation> {
    inst.validate()?;
    if r == 0 {
        return Err(Error::InvalidArgument("relaxation level must be at least 1".into()));
    }
    let index = Arc::new(MomentIndex::with_cap(inst.n, inst.k, r, cap)?);
    let repr = (2 * r).min(inst.n);
    for term in &inst.terms {
        if term.scope.len() > 2 * r {
            return Err(Error::ScopeTooLarge {
                scope: term.scope.len(),
                level: r,
            });
        }
    }
    for f in &inst.forbidden {
        if f.len() > 2 * r {
            return Err(Error::ScopeTooLarge {
                scope: f.len(),
                level: r,
            });
        }
    }
    let canon = |u: &AssignmentIndex| index.canonical_entry(u).expect("representable union");

    // objective: expected term value read from union-assignment entries
    let mut coeffs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for term in &inst.terms {
        let mut t = 0;
        for_each_labeling(inst.k, term.scope.len(), |labels| {
            let c = term.weight * term.table[t];
            t += 1;
            if c != 0.0 {
                let u = AssignmentIndex {
                    set: term.scope.clone(),
                    labels: labels.to_vec(),
                };
                *coeffs.entry(canon(&u)).or_insert(0.0) += c;
            }
        });
    }
    let mut objective = SparseSym::new();
    for (&(i, j), &c) in &coeffs {
        objective.add_linear(0, i, j, c);
    }

    let dim = index.len();
    let mut constraints = vec![single_entry(0, 0, 1.0, 1.0)];

    // entries sharing a union assignment are tied to one representative;
    // incompatible pairs are zero
    for i in 0..dim {
        for j in i..dim {
            match index.get(i).union(index.get(j)) {
                None => constraints.push(single_entry(i, j, 1.0, 0.0)),
                Some(u) => {
                    let rep = canon(&u);
                    if rep != (i, j) {
                        let mut a = SparseSym::new();
                        a.add_linear(0, i, j, 1.0);
                        a.add_linear(0, rep.0, rep.1, -1.0);
                        constraints.push(EqConstraint { a, b: 0.0 });
                    }
                }
            }
        }
    }

    // marginalization: sum_j y_{U + (v -> j)} = y_U
    if repr >= 1 {
        for u in assignments_up_to(inst.n, inst.k, repr - 1) {
            let base = canon(&u);
            for v in 0..inst.n {
                if u.label_of(v).is_some() {
                    continue;
                }
                let mut a = SparseSym::new();
                for l in 0..inst.k {
                    let (i, j) = canon(&u.with(v, l).expect("v not in U"));
                    a.add_linear(0, i, j, 1.0);
                }
                a.add_linear(0, base.0, base.1, -1.0);
                constraints.push(EqConstraint { a, b: 0.0 });
            }
        }
    }

    for f in &inst.forbidden {
        let (i, j) = canon(f);
        constraints.push(single_entry(i, j, 1.0, 0.0));
    }

    // global linear constraints over degree-1 moments; each `le` gets a 1x1 slack block
    let mut blocks = vec![dim];
    for con in &inst.global_constraints {
        let mut a = SparseSym::new();
        for &(v, l, c) in &con.coeffs {
            let pos = index.position_of_single(v, l).expect("level >= 1");
            a.add_linear(0, 0, pos, c);
        }
        if con.relation == Relation::Le {
            a.add_linear(blocks.len(), 0, 0, 1.0);
            blocks.push(1);
        }
        constraints.push(EqConstraint { a, b: con.rhs });
    }

    // equalities also hold on every representable event U:
    // sum c * y_{U + (v -> l)} = rhs * y_U
    if repr >= 2 {
        let lifted: Vec<_> = inst
            .global_constraints
            .iter()
            .filter(|c| c.relation == Relation::Eq)
            .collect();
        if !lifted.is_empty() {
            for u in assignments_up_to(inst.n, inst.k, repr - 1).into_iter().filter(|u| !u.is_empty()) {
                for con in &lifted {
                    let mut coeffs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
                    for &(v, l, c) in &con.coeffs {
                        if let Some(event) = u.with(v, l) {
                            *coeffs.entry(canon(&event)).or_insert(0.0) += c;
                        }
                    }
                    *coeffs.entry(canon(&u)).or_insert(0.0) -= con.rhs;
                    let mut a = SparseSym::new();
                    for (&(i, j), &c) in &coeffs {
                        if c != 0.0 {
                            a.add_linear(0, i, j, c);
                        }
                    }
                    if !a.entries.is_empty() {
                        constraints.push(EqConstraint { a, b: 0.0 });
                    }
                }
            }
        }
    }

    Ok(Relaxation {
        sdp: SdpProblem {
            blocks,
            objective,
            constraints,
            sense: inst.sense,
        },
        index,
    })
}
