use serde::{Deserialize, Serialize};

use super::spec::{ProblemKind, ProblemSpec};

/// Native objective value of an assignment and its feasibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: f64,
    pub feasible: bool,
    pub violations: Vec<String>,
}

const PACKING_SLACK: f64 = 1e-9;

fn cut_weight(spec: &ProblemSpec, labels: &[usize]) -> f64 {
    spec.edges
        .iter()
        .map(|&(u, v, w)| if labels[u] != labels[v] { w } else { 0.0 })
        .sum()
}

fn side_count(labels: &[usize], side: usize) -> usize {
    labels.iter().filter(|&&l| l == side).count()
}

/// Objective value in native units, summed in the same term order as the encoding.
pub fn value(spec: &ProblemSpec, labels: &[usize]) -> f64 {
    let k = spec.k();
    match spec.kind {
        ProblemKind::MaxCut | ProblemKind::MinBisection | ProblemKind::CapacityCutPacking => {
            cut_weight(spec, labels)
        }
        ProblemKind::SparsestCut => {
            let s = side_count(labels, 1);
            let t = spec.n - s;
            if s == 0 || t == 0 {
                f64::INFINITY
            } else {
                cut_weight(spec, labels) / (s as f64 * t as f64)
            }
        }
        ProblemKind::UniqueGames => {
            let perms = spec.params.permutations.as_ref().expect("validated spec");
            spec.edges
                .iter()
                .zip(perms)
                .map(|(&(u, v, w), p)| if p[labels[u]] == labels[v] { w } else { 0.0 })
                .sum()
        }
        ProblemKind::TwoCsp => {
            let tables = spec.params.tables.as_ref().expect("validated spec");
            spec.edges
                .iter()
                .zip(tables)
                .map(|(&(u, v, w), t)| w * t[labels[u] * k + labels[v]])
                .sum()
        }
        ProblemKind::IndependentSet => (0..spec.n)
            .filter(|&v| labels[v] == 1)
            .map(|v| spec.vertex_weight(v))
            .sum(),
        ProblemKind::Qip => {
            let a = spec.params.matrix.as_ref().expect("validated spec");
            let x = |i: usize| if labels[i] == 0 { 1.0 } else { -1.0 };
            let mut total = 0.0;
            for i in 0..spec.n {
                total += a[i][i];
            }
            for i in 0..spec.n {
                for j in i + 1..spec.n {
                    let c = 2.0 * a[i][j];
                    if c != 0.0 {
                        total += if x(i) * x(j) > 0.0 { c } else { -c };
                    }
                }
            }
            total
        }
        ProblemKind::Partial3Coloring => labels.iter().filter(|&&l| l < 3).map(|_| 1.0).sum(),
    }
}

fn violations(spec: &ProblemSpec, labels: &[usize], out: Option<&mut Vec<String>>) -> bool {
    let mut sink = Vec::new();
    let out = out.unwrap_or(&mut sink);
    let before = out.len();
    match spec.kind {
        ProblemKind::MinBisection => {
            let ones = side_count(labels, 1);
            if ones != spec.n / 2 {
                out.push(format!("side 1 has {ones} vertices, need {}", spec.n / 2));
            }
        }
        ProblemKind::SparsestCut => {
            let ones = side_count(labels, 1);
            if ones == 0 || ones == spec.n {
                out.push("one side of the cut is empty".into());
            }
        }
        ProblemKind::CapacityCutPacking => {
            for (c, con) in spec.params.packing.iter().flatten().enumerate() {
                let load = con.load(labels);
                if load > con.budget + PACKING_SLACK {
                    out.push(format!("packing constraint {c}: load {load} > budget {}", con.budget));
                }
            }
        }
        ProblemKind::IndependentSet => {
            for &(u, v, _) in &spec.edges {
                if labels[u] == 1 && labels[v] == 1 {
                    out.push(format!("edge ({u}, {v}) has both endpoints in the set"));
                }
            }
        }
        ProblemKind::Partial3Coloring => {
            for &(u, v, _) in &spec.edges {
                if labels[u] < 3 && labels[u] == labels[v] {
                    out.push(format!("edge ({u}, {v}) is monochromatic"));
                }
            }
        }
        _ => {}
    }
    out.len() == before
}

pub fn is_feasible(spec: &ProblemSpec, labels: &[usize]) -> bool {
    violations(spec, labels, None)
}

pub fn evaluate(spec: &ProblemSpec, labels: &[usize]) -> Evaluation {
    let mut v = Vec::new();
    let feasible = violations(spec, labels, Some(&mut v));
    Evaluation {
        value: value(spec, labels),
        feasible,
        violations: v,
    }
}

fn adjacency(spec: &ProblemSpec) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); spec.n];
    for &(u, v, w) in &spec.edges {
        adj[u].push((v, w));
        adj[v].push((u, w));
    }
    adj
}

/// Cut increase when `v` switches to the other side of a binary labeling.
fn move_delta(adj: &[Vec<(usize, f64)>], labels: &[usize], v: usize) -> f64 {
    adj[v]
        .iter()
        .map(|&(u, w)| if labels[u] == labels[v] { w } else { -w })
        .sum()
}

/// Restore hard feasibility where the kind has a repair rule; identity otherwise.
pub fn repair(spec: &ProblemSpec, labels: &[usize]) -> Vec<usize> {
    let mut x = labels.to_vec();
    match spec.kind {
        ProblemKind::MinBisection => {
            let adj = adjacency(spec);
            let target = spec.n / 2;
            loop {
                let ones = side_count(&x, 1);
                let from = match ones.cmp(&target) {
                    std::cmp::Ordering::Greater => 1,
                    std::cmp::Ordering::Less => 0,
                    std::cmp::Ordering::Equal => break,
                };
                let v = (0..spec.n)
                    .filter(|&v| x[v] == from)
                    .min_by(|&a, &b| {
                        move_delta(&adj, &x, a)
                            .total_cmp(&move_delta(&adj, &x, b))
                            .then(a.cmp(&b))
                    })
                    .expect("the overfull side is nonempty");
                x[v] = 1 - from;
            }
        }
        ProblemKind::SparsestCut if spec.n >= 2 => {
            let ones = side_count(&x, 1);
            if ones == 0 || ones == spec.n {
                let adj = adjacency(spec);
                let v = (0..spec.n)
                    .min_by(|&a, &b| {
                        move_delta(&adj, &x, a)
                            .total_cmp(&move_delta(&adj, &x, b))
                            .then(a.cmp(&b))
                    })
                    .expect("n >= 2");
                x[v] = 1 - x[v];
            }
        }
        ProblemKind::IndependentSet => {
            for &(u, v, _) in &spec.edges {
                if x[u] == 1 && x[v] == 1 {
                    let drop = if spec.vertex_weight(v) < spec.vertex_weight(u) { v } else { u };
                    x[drop] = 0;
                }
            }
        }
        ProblemKind::Partial3Coloring => {
            let degree: Vec<usize> = adjacency(spec).iter().map(Vec::len).collect();
            for &(u, v, _) in &spec.edges {
                if x[u] < 3 && x[u] == x[v] {
                    let drop = if degree[v] < degree[u] { v } else { u };
                    x[drop] = 3;
                }
            }
        }
        ProblemKind::CapacityCutPacking => {
            let adj = adjacency(spec);
            let packing = spec.params.packing.clone().unwrap_or_default();
            for _ in 0..spec.n * spec.n.max(1) {
                let Some(con) = packing
                    .iter()
                    .find(|c| c.load(&x) > c.budget + PACKING_SLACK)
                else {
                    break;
                };
                let density = |v: usize| move_delta(&adj, &x, v) / con.coeffs[v];
                let Some(v) = (0..spec.n)
                    .filter(|&v| x[v] == con.side && con.coeffs[v] > 0.0)
                    .min_by(|&a, &b| density(a).total_cmp(&density(b)).then(a.cmp(&b)))
                else {
                    break;
                };
                x[v] = 1 - con.side;
            }
        }
        _ => {}
    }
    x
}
