//! Exact parametrization `v = v0 + N t` of an affine subspace `{v : A v = b}`
//! and the weighted projection onto it.
//!
//! The elimination is a sparse Gauss-Jordan pass: every row is reduced
//! against the current pivot expressions, one of its surviving variables
//! becomes a pivot, and the new expression is substituted into every older
//! expression that mentions it. Pivot expressions therefore only ever refer
//! to free variables.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
struct Expr {
    constant: f64,
    terms: Vec<(usize, f64)>,
}

/// A sparse linear row `sum coeffs * v = rhs`.
#[derive(Debug, Clone)]
pub(crate) struct LinearRow {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

const DROP_TOL: f64 = 1e-12;
const CONSISTENCY_TOL: f64 = 1e-8;

fn eliminate(nvars: usize, rows: &[LinearRow]) -> Result<Vec<Option<Expr>>> {
    let mut count = vec![0u32; nvars];
    for row in rows {
        for &(p, _) in &row.coeffs {
            count[p] += 1;
        }
    }

    let mut pivots: Vec<Option<Expr>> = vec![None; nvars];
    let mut occurs: Vec<Vec<usize>> = vec![Vec::new(); nvars];
    let mut scratch = vec![0.0f64; nvars];
    let mut touched: Vec<usize> = Vec::new();
    let mut marked = vec![false; nvars];

    for row in rows {
        let scale = row
            .coeffs
            .iter()
            .map(|c| c.1.abs())
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        let mut rhs = row.rhs;
        let mut add = |p: usize, c: f64, scratch: &mut Vec<f64>, touched: &mut Vec<usize>| {
            if !marked[p] {
                marked[p] = true;
                touched.push(p);
            }
            scratch[p] += c;
        };
        for &(p, c) in &row.coeffs {
            match &pivots[p] {
                Some(e) => {
                    rhs -= c * e.constant;
                    for &(q, d) in &e.terms {
                        add(q, c * d, &mut scratch, &mut touched);
                    }
                }
                None => add(p, c, &mut scratch, &mut touched),
            }
        }
        let mut reduced: Vec<(usize, f64)> = touched
            .iter()
            .map(|&p| (p, scratch[p]))
            .filter(|&(_, c)| c.abs() > DROP_TOL * scale)
            .collect();
        for &p in &touched {
            scratch[p] = 0.0;
            marked[p] = false;
        }
        touched.clear();
        reduced.sort_unstable_by_key(|t| t.0);

        if reduced.is_empty() {
            if rhs.abs() > CONSISTENCY_TOL * row.rhs.abs().max(1.0) {
                return Err(Error::InconsistentConstraints { residual: rhs.abs() });
            }
            continue;
        }

        let max_abs = reduced.iter().map(|t| t.1.abs()).fold(0.0, f64::max);
        let (q, cq) = reduced
            .iter()
            .copied()
            .filter(|t| t.1.abs() >= 0.1 * max_abs)
            .min_by(|a, b| count[a.0].cmp(&count[b.0]).then(b.0.cmp(&a.0)))
            .expect("nonempty");

        let expr = Expr {
            constant: rhs / cq,
            terms: reduced
                .iter()
                .filter(|t| t.0 != q)
                .map(|&(p, c)| (p, -c / cq))
                .collect(),
        };

        for piv in std::mem::take(&mut occurs[q]) {
            let Some(target) = pivots[piv].as_mut() else { continue };
            let Ok(at) = target.terms.binary_search_by_key(&q, |t| t.0) else {
                continue;
            };
            let a = target.terms.remove(at).1;
            target.constant += a * expr.constant;
            target.terms = merge_scaled(&target.terms, &expr.terms, a);
            for &(p, _) in &expr.terms {
                occurs[p].push(piv);
            }
        }
        for &(p, _) in &expr.terms {
            occurs[p].push(q);
        }
        pivots[q] = Some(expr);
    }
    Ok(pivots)
}

/// `a + s * b` for sorted sparse vectors, dropping cancellations.
fn merge_scaled(a: &[(usize, f64)], b: &[(usize, f64)], s: f64) -> Vec<(usize, f64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let (p, c) = if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
            i += 1;
            a[i - 1]
        } else if i == a.len() || b[j].0 < a[i].0 {
            j += 1;
            (b[j - 1].0, s * b[j - 1].1)
        } else {
            i += 1;
            j += 1;
            (a[i - 1].0, a[i - 1].1 + s * b[j - 1].1)
        };
        if c.abs() > DROP_TOL {
            out.push((p, c));
        }
    }
    out
}

/// Weighted projector onto an affine subspace, minimizing `sum w_p (v_p - x_p)^2`.
#[derive(Debug, Clone)]
pub(crate) struct AffineProjector {
    weights: Vec<f64>,
    offset: Vec<f64>,
    basis_rows: Vec<Vec<(usize, f64)>>,
    nfree: usize,
    gram: Option<Cholesky<f64, Dyn>>,
}

impl AffineProjector {
    pub fn new(weights: Vec<f64>, rows: &[LinearRow]) -> Result<Self> {
        let nvars = weights.len();
        let pivots = eliminate(nvars, rows)?;
        let mut column = vec![usize::MAX; nvars];
        let mut nfree = 0;
        for p in 0..nvars {
            if pivots[p].is_none() {
                column[p] = nfree;
                nfree += 1;
            }
        }
        let mut offset = vec![0.0; nvars];
        let mut basis_rows = Vec::with_capacity(nvars);
        for p in 0..nvars {
            match &pivots[p] {
                None => basis_rows.push(vec![(column[p], 1.0)]),
                Some(e) => {
                    offset[p] = e.constant;
                    basis_rows.push(e.terms.iter().map(|&(q, c)| (column[q], c)).collect());
                }
            }
        }
        let gram = if nfree == 0 {
            None
        } else {
            let mut g = DMatrix::<f64>::zeros(nfree, nfree);
            for (p, row) in basis_rows.iter().enumerate() {
                let w = weights[p];
                for &(a, ca) in row {
                    for &(b, cb) in row {
                        g[(a, b)] += w * ca * cb;
                    }
                }
            }
            Some(g.cholesky().ok_or_else(|| {
                Error::InvalidArgument("affine parametrization Gram matrix is singular".into())
            })?)
        };
        Ok(AffineProjector {
            weights,
            offset,
            basis_rows,
            nfree,
            gram,
        })
    }

    #[cfg(test)]
    pub fn free_dimension(&self) -> usize {
        self.nfree
    }

    pub fn project(&self, x: &[f64], out: &mut [f64]) {
        let Some(gram) = &self.gram else {
            out.copy_from_slice(&self.offset);
            return;
        };
        let mut rhs = DVector::<f64>::zeros(self.nfree);
        for (p, row) in self.basis_rows.iter().enumerate() {
            let d = self.weights[p] * (x[p] - self.offset[p]);
            if d != 0.0 {
                for &(a, c) in row {
                    rhs[a] += c * d;
                }
            }
        }
        let t = gram.solve(&rhs);
        for (p, row) in self.basis_rows.iter().enumerate() {
            out[p] = self.offset[p] + row.iter().map(|&(a, c)| c * t[a]).sum::<f64>();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(coeffs: &[(usize, f64)], rhs: f64) -> LinearRow {
        LinearRow {
            coeffs: coeffs.to_vec(),
            rhs,
        }
    }

    #[test]
    fn projects_onto_plane() {
        // x0 + x1 + x2 = 3, unit weights
        let proj = AffineProjector::new(vec![1.0; 3], &[row(&[(0, 1.0), (1, 1.0), (2, 1.0)], 3.0)])
            .unwrap();
        let mut out = vec![0.0; 3];
        proj.project(&[0.0, 0.0, 0.0], &mut out);
        for v in out {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert_eq!(proj.free_dimension(), 2);
    }

    #[test]
    fn redundant_rows_are_skipped() {
        let rows = [
            row(&[(0, 1.0), (1, -1.0)], 0.0),
            row(&[(1, 1.0), (2, -1.0)], 0.0),
            row(&[(0, 1.0), (2, -1.0)], 0.0),
            row(&[(0, 2.0)], 2.0),
        ];
        let proj = AffineProjector::new(vec![1.0, 2.0, 1.0], &rows).unwrap();
        let mut out = vec![0.0; 3];
        proj.project(&[5.0, -3.0, 0.5], &mut out);
        assert!(out.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert_eq!(proj.free_dimension(), 0);
    }

    #[test]
    fn inconsistent_rows_rejected() {
        let rows = [row(&[(0, 1.0), (1, 1.0)], 1.0), row(&[(0, 1.0), (1, 1.0)], 2.0)];
        assert!(matches!(
            AffineProjector::new(vec![1.0; 2], &rows),
            Err(Error::InconsistentConstraints { .. })
        ));
    }

    #[test]
    fn weighted_projection_matches_closed_form() {
        // minimize w0 (v0 - x0)^2 + w1 (v1 - x1)^2 subject to v0 + v1 = 1
        let (w0, w1) = (1.0, 3.0);
        let proj = AffineProjector::new(vec![w0, w1], &[row(&[(0, 1.0), (1, 1.0)], 1.0)]).unwrap();
        let x = [2.0, 2.0];
        let mut out = vec![0.0; 2];
        proj.project(&x, &mut out);
        // lagrange: v_i = x_i - lambda / w_i
        let lambda = (x[0] + x[1] - 1.0) / (1.0 / w0 + 1.0 / w1);
        assert!((out[0] - (x[0] - lambda / w0)).abs() < 1e-12);
        assert!((out[1] - (x[1] - lambda / w1)).abs() < 1e-12);
    }
}
