//! Dense block SDP solver for desk-scale relaxations.
//!
//! Problems are in standard form: optimize `<C, X>` subject to
//! `<A_i, X> = b_i` and `X` block-diagonal PSD. The solver runs
//! over-relaxed ADMM on the split `X ∈ affine set`, `Z ∈ PSD cone`,
//! `X = Z`. The affine projection is exact (see [`affine`]); the cone
//! projection is an eigenvalue clip per block.

mod affine;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::relaxation::Sense;

use affine::{AffineProjector, LinearRow};

/// Upper-triangle addressed entry of a block-diagonal symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymEntry {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    /// `A[row][col] = A[col][row] = value`.
    pub value: f64,
}

/// Sparse symmetric block matrix stored by its upper triangle.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseSym {
    pub entries: Vec<SymEntry>,
}

impl SparseSym {
    pub fn new() -> Self {
        Self::default()
    }

    /// Add a term so that `<A, X>` gains `coef * X[i][j]`.
    pub fn add_linear(&mut self, block: usize, i: usize, j: usize, coef: f64) {
        let (row, col) = (i.min(j), i.max(j));
        let value = if row == col { coef } else { coef / 2.0 };
        self.entries.push(SymEntry {
            block,
            row,
            col,
            value,
        });
    }

    /// `<A, X> = sum_ij A_ij X_ij` over the full symmetric matrices.
    pub fn inner(&self, x: &[DMatrix<f64>]) -> f64 {
        self.entries
            .iter()
            .map(|e| {
                let m = if e.row == e.col { 1.0 } else { 2.0 };
                m * e.value * x[e.block][(e.row, e.col)]
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqConstraint {
    pub a: SparseSym,
    pub b: f64,
}

/// Standard-form SDP over a list of PSD blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub blocks: Vec<usize>,
    pub objective: SparseSym,
    pub constraints: Vec<EqConstraint>,
    pub sense: Sense,
}

impl SdpProblem {
    /// Total matrix side over all blocks.
    pub fn dim(&self) -> usize {
        self.blocks.iter().sum()
    }

    pub fn check(&self) -> Result<()> {
        let in_range = |e: &SymEntry| {
            e.block < self.blocks.len() && e.row <= e.col && e.col < self.blocks[e.block]
        };
        if !self.objective.entries.iter().all(in_range)
            || !self
                .constraints
                .iter()
                .all(|c| c.a.entries.iter().all(in_range))
        {
            return Err(Error::InvalidArgument(
                "SDP entry outside its block or below the diagonal".into(),
            ));
        }
        let pinned = self.constraints.iter().any(|c| {
            c.b == 1.0
                && c.a.entries.len() == 1
                && c.a.entries[0].block == 0
                && c.a.entries[0].row == 0
                && c.a.entries[0].col == 0
                && c.a.entries[0].value == 1.0
        });
        if !pinned {
            return Err(Error::InvalidArgument(
                "SDP is missing the pinning constraint X[0][0] = 1".into(),
            ));
        }
        Ok(())
    }

    pub fn objective_at(&self, x: &[DMatrix<f64>]) -> f64 {
        self.objective.inner(x)
    }

    /// `max_i |<A_i, X> - b_i|`.
    pub fn primal_residual(&self, x: &[DMatrix<f64>]) -> f64 {
        self.constraints
            .iter()
            .map(|c| (c.a.inner(x) - c.b).abs())
            .fold(0.0, f64::max)
    }

    /// `-min eigenvalue` over all blocks, floored at zero.
    pub fn psd_residual(x: &[DMatrix<f64>]) -> f64 {
        x.iter()
            .map(|m| -linalg::min_eigenvalue(m))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub eps_primal: f64,
    pub eps_psd: f64,
    /// ADMM stationarity tolerance, relative to `max(1, ||C||)`.
    pub eps_dual: f64,
    pub max_iters: usize,
    pub over_relaxation: f64,
    pub rho: f64,
    pub adapt_every: usize,
    pub dim_cap: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            eps_primal: 1e-6,
            eps_psd: 1e-6,
            eps_dual: 1e-6,
            max_iters: 50_000,
            over_relaxation: 1.5,
            rho: 1.0,
            adapt_every: 100,
            dim_cap: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    /// One symmetric matrix per block.
    pub x: Vec<DMatrix<f64>>,
    pub objective_value: f64,
    pub primal_residual: f64,
    pub psd_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Flat storage of the upper triangles of all blocks.
struct Layout {
    blocks: Vec<usize>,
    offsets: Vec<usize>,
    coords: Vec<(usize, usize, usize)>,
    weights: Vec<f64>,
}

impl Layout {
    fn new(blocks: &[usize]) -> Self {
        let mut offsets = Vec::with_capacity(blocks.len());
        let mut coords = Vec::new();
        for (b, &d) in blocks.iter().enumerate() {
            offsets.push(coords.len());
            for i in 0..d {
                for j in i..d {
                    coords.push((b, i, j));
                }
            }
        }
        let weights = coords
            .iter()
            .map(|&(_, i, j)| if i == j { 1.0 } else { 2.0 })
            .collect();
        Layout {
            blocks: blocks.to_vec(),
            offsets,
            coords,
            weights,
        }
    }

    fn len(&self) -> usize {
        self.coords.len()
    }

    fn pos(&self, block: usize, i: usize, j: usize) -> usize {
        let d = self.blocks[block];
        self.offsets[block] + i * d - i * i.saturating_sub(1) / 2 + (j - i)
    }

    fn unpack(&self, v: &[f64]) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.blocks.iter().map(|&d| DMatrix::zeros(d, d)).collect();
        for (p, &(b, i, j)) in self.coords.iter().enumerate() {
            out[b][(i, j)] = v[p];
            out[b][(j, i)] = v[p];
        }
        out
    }

    fn sparse_to_vec(&self, s: &SparseSym, out: &mut [f64]) {
        for e in &s.entries {
            out[self.pos(e.block, e.row, e.col)] += e.value;
        }
    }

    fn norm(&self, v: &[f64]) -> f64 {
        v.iter()
            .zip(&self.weights)
            .map(|(x, w)| w * x * x)
            .sum::<f64>()
            .sqrt()
    }

    fn dist(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.weights)
            .map(|((x, y), w)| w * (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

impl Layout {
    fn project_psd(&self, v: &[f64], out: &mut [f64]) {
        for (b, &d) in self.blocks.iter().enumerate() {
            let start = self.offsets[b];
            let end = start + d * (d + 1) / 2;
            linalg::project_psd_packed(d, &v[start..end], &mut out[start..end]);
        }
    }
}

/// Solve with over-relaxed ADMM. Non-convergence is reported through
/// `converged = false`, not as an error.
pub fn solve(p: &SdpProblem, settings: &SolverSettings) -> Result<SdpSolution> {
    p.check()?;
    let dim = p.dim();
    if dim > settings.dim_cap {
        return Err(Error::Capacity {
            what: "SDP dimension",
            actual: dim as u128,
            cap: settings.dim_cap as u128,
        });
    }
    let layout = Layout::new(&p.blocks);
    let len = layout.len();

    let rows: Vec<LinearRow> = p
        .constraints
        .iter()
        .map(|c| {
            let mut coeffs: Vec<(usize, f64)> = c
                .a
                .entries
                .iter()
                .map(|e| {
                    let pos = layout.pos(e.block, e.row, e.col);
                    (pos, layout.weights[pos] * e.value)
                })
                .collect();
            coeffs.sort_unstable_by_key(|t| t.0);
            coeffs.dedup_by(|a, b| {
                if a.0 == b.0 {
                    b.1 += a.1;
                    true
                } else {
                    false
                }
            });
            LinearRow { coeffs, rhs: c.b }
        })
        .collect();
    let projector = AffineProjector::new(layout.weights.clone(), &rows)?;

    let sign = match p.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut c = vec![0.0; len];
    layout.sparse_to_vec(&p.objective, &mut c);
    for x in c.iter_mut() {
        *x *= sign;
    }
    let c_norm = layout.norm(&c).max(1.0);

    let alpha = settings.over_relaxation;
    let mut rho = settings.rho;
    let mut x = vec![0.0; len];
    let mut z = vec![0.0; len];
    let mut u = vec![0.0; len];
    let mut w = vec![0.0; len];
    let mut z_prev = vec![0.0; len];

    projector.project(&vec![0.0; len], &mut x);
    layout.project_psd(&x, &mut z);

    let mut iterations = 0;
    let mut admm_converged = false;
    for it in 1..=settings.max_iters {
        iterations = it;
        for q in 0..len {
            w[q] = z[q] - u[q] - c[q] / rho;
        }
        projector.project(&w, &mut x);

        z_prev.copy_from_slice(&z);
        for q in 0..len {
            w[q] = alpha * x[q] + (1.0 - alpha) * z_prev[q] + u[q];
        }
        layout.project_psd(&w, &mut z);
        for q in 0..len {
            u[q] = w[q] - z[q];
        }

        let primal = layout.dist(&x, &z);
        let dual = rho * layout.dist(&z, &z_prev);
        if primal <= settings.eps_psd && dual <= settings.eps_dual * c_norm {
            admm_converged = true;
            break;
        }
        if settings.adapt_every > 0 && it % settings.adapt_every == 0 {
            if primal > 10.0 * dual {
                rho *= 2.0;
                u.iter_mut().for_each(|v| *v /= 2.0);
            } else if dual > 10.0 * primal {
                rho /= 2.0;
                u.iter_mut().for_each(|v| *v *= 2.0);
            }
        }
    }

    let xs = layout.unpack(&x);
    let objective_value = p.objective_at(&xs);
    let primal_residual = p.primal_residual(&xs);
    let psd_residual = SdpProblem::psd_residual(&xs);
    let converged = admm_converged
        && primal_residual <= settings.eps_primal
        && psd_residual <= settings.eps_psd;
    Ok(SdpSolution {
        x: xs,
        objective_value,
        primal_residual,
        psd_residual,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateQuantity {
    Shape,
    Objective,
    PrimalResidual,
    PsdResidual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateIssue {
    pub quantity: CertificateQuantity,
    pub stored: f64,
    pub recomputed: f64,
}

/// Mismatches between a solution's stored figures and a from-scratch recomputation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub issues: Vec<CertificateIssue>,
}

impl CertificateReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }

    pub fn has(&self, q: CertificateQuantity) -> bool {
        self.issues.iter().any(|i| i.quantity == q)
    }
}

const CERTIFICATE_TOL: f64 = 1e-9;

pub fn check_certificate(p: &SdpProblem, s: &SdpSolution) -> CertificateReport {
    let mut report = CertificateReport::default();
    let shape_ok = s.x.len() == p.blocks.len()
        && s
            .x
            .iter()
            .zip(&p.blocks)
            .all(|(m, &d)| m.nrows() == d && m.ncols() == d);
    if !shape_ok {
        report.issues.push(CertificateIssue {
            quantity: CertificateQuantity::Shape,
            stored: f64::NAN,
            recomputed: f64::NAN,
        });
        return report;
    }
    let mut check = |quantity, stored: f64, recomputed: f64, scale: f64| {
        if !((stored - recomputed).abs() <= CERTIFICATE_TOL * scale) {
            report.issues.push(CertificateIssue {
                quantity,
                stored,
                recomputed,
            });
        }
    };
    let obj = p.objective_at(&s.x);
    check(
        CertificateQuantity::Objective,
        s.objective_value,
        obj,
        obj.abs().max(1.0),
    );
    check(
        CertificateQuantity::PrimalResidual,
        s.primal_residual,
        p.primal_residual(&s.x),
        1.0,
    );
    check(
        CertificateQuantity::PsdResidual,
        s.psd_residual,
        SdpProblem::psd_residual(&s.x),
        1.0,
    );
    report
}
