//! Vector embeddings of moment matrices and graph spectra.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::linalg::{orthonormal_basis, residual_sq, singular_values, sym_eigen, sym_eigenvalues};
use crate::relaxation::{MomentIndex, MomentMatrix};

/// Eigenvalues below this fraction of the largest are treated as zero.
const FACTOR_RANK_TOL: f64 = 1e-12;

/// Rank tolerance for the span of selected columns.
pub const SPAN_RANK_TOL: f64 = 1e-10;

/// Columns `v_i` with `<v_i, v_j> = M[i][j]` for the PSD part of `M`.
#[derive(Debug, Clone)]
pub struct Embedding {
    /// `dim_ambient x index.len()`, one column per index entry.
    pub vectors: DMatrix<f64>,
    pub index: Arc<MomentIndex>,
}

impl Embedding {
    pub fn dim_ambient(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn vector(&self, pos: usize) -> DVector<f64> {
        self.vectors.column(pos).into_owned()
    }

    pub fn gram(&self) -> DMatrix<f64> {
        self.vectors.transpose() * &self.vectors
    }
}

/// Factor `M = V^T V` from an eigendecomposition, clipping negative eigenvalues.
pub fn factorize(m: &MomentMatrix) -> Embedding {
    let (values, vectors) = sym_eigen(m.entries());
    let top = values.iter().copied().fold(0.0f64, f64::max);
    let keep: Vec<usize> = (0..values.len())
        .rev()
        .filter(|&i| values[i] > FACTOR_RANK_TOL * top.max(f64::MIN_POSITIVE))
        .collect();
    let d = m.dim();
    let mut v = DMatrix::zeros(keep.len(), d);
    for (row, &i) in keep.iter().enumerate() {
        let s = values[i].sqrt();
        for c in 0..d {
            v[(row, c)] = s * vectors[(c, i)];
        }
    }
    Embedding {
        vectors: v,
        index: m.index().clone(),
    }
}

/// Ascending normalized-Laplacian spectrum `D^{-1/2} L D^{-1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub eigenvalues: Vec<f64>,
}

impl SpectralReport {
    /// `lambda_m` for `m` in `1..=n` (1-based).
    pub fn lambda(&self, m: usize) -> Option<f64> {
        m.checked_sub(1).and_then(|i| self.eigenvalues.get(i).copied())
    }
}

/// Isolated vertices contribute a zero row and column.
pub fn laplacian_spectrum(n: usize, edges: &[(usize, usize, f64)]) -> SpectralReport {
    let mut deg = vec![0.0; n];
    for &(u, v, w) in edges {
        deg[u] += w;
        deg[v] += w;
    }
    let scale: Vec<f64> = deg
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / f64::sqrt(d) } else { 0.0 })
        .collect();
    let mut l = DMatrix::zeros(n, n);
    for i in 0..n {
        if deg[i] > 0.0 {
            l[(i, i)] = 1.0;
        }
    }
    for &(u, v, w) in edges {
        let x = w * scale[u] * scale[v];
        l[(u, v)] -= x;
        l[(v, u)] -= x;
    }
    SpectralReport {
        eigenvalues: sym_eigenvalues(&l),
    }
}

/// Sum over non-seed columns of the squared distance to the span of the seed columns.
pub fn projection_error(vectors: &DMatrix<f64>, seeds: &[usize]) -> f64 {
    let cols: Vec<DVector<f64>> = seeds.iter().map(|&s| vectors.column(s).into_owned()).collect();
    let basis = orthonormal_basis(&cols, SPAN_RANK_TOL);
    (0..vectors.ncols())
        .filter(|c| !seeds.contains(c))
        .map(|c| residual_sq(&vectors.column(c).into_owned(), &basis))
        .sum()
}

/// Squared Frobenius error of the best rank-`r` approximation.
pub fn best_rank_r_error(vectors: &DMatrix<f64>, r: usize) -> f64 {
    if vectors.is_empty() {
        return 0.0;
    }
    let mut s: Vec<f64> = singular_values(vectors).iter().map(|x| x * x).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s.iter().skip(r).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnWeighting {
    #[default]
    Raw,
    /// Variable `i`'s columns multiplied by `sqrt(deg_i)`.
    DegreeNormalized,
}

/// The degree-1 block `v_{i->j}` as columns, grouped per variable.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedColumns {
    pub matrix: DMatrix<f64>,
    /// `groups[i]` lists the columns of variable `i`.
    pub groups: Vec<Vec<usize>>,
}

impl SeedColumns {
    pub fn n(&self) -> usize {
        self.groups.len()
    }

    pub fn columns_of(&self, vars: &[usize]) -> Vec<usize> {
        vars.iter().flat_map(|&v| self.groups[v].iter().copied()).collect()
    }

    pub fn error(&self, vars: &[usize]) -> f64 {
        projection_error(&self.matrix, &self.columns_of(vars))
    }

    pub fn total_norm_sq(&self) -> f64 {
        self.matrix.norm_squared()
    }

    /// Build from plain columns, `k` consecutive columns per variable.
    pub fn from_matrix(matrix: DMatrix<f64>, k: usize) -> Self {
        let n = matrix.ncols() / k;
        let groups = (0..n).map(|v| (v * k..(v + 1) * k).collect()).collect();
        SeedColumns { matrix, groups }
    }
}

pub fn seed_columns(emb: &Embedding, weighting: ColumnWeighting, degrees: &[f64]) -> SeedColumns {
    let positions = emb.index.degree_one_groups();
    let k = emb.index.k();
    let n = positions.len();
    let mut matrix = DMatrix::zeros(emb.dim_ambient(), n * k);
    for (v, group) in positions.iter().enumerate() {
        let w = match weighting {
            ColumnWeighting::Raw => 1.0,
            ColumnWeighting::DegreeNormalized => degrees.get(v).copied().unwrap_or(0.0).sqrt(),
        };
        for (l, &pos) in group.iter().enumerate() {
            matrix.set_column(v * k + l, &(emb.vectors.column(pos) * w));
        }
    }
    SeedColumns::from_matrix(matrix, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relaxation::MomentIndex;

    fn assert_spectrum(got: &SpectralReport, want: &[f64]) {
        assert_eq!(got.eigenvalues.len(), want.len());
        for (g, w) in got.eigenvalues.iter().zip(want) {
            assert!((g - w).abs() < 1e-8, "{:?} vs {want:?}", got.eigenvalues);
        }
    }

    #[test]
    fn known_spectra() {
        let k4: Vec<_> = (0..4).flat_map(|u| (u + 1..4).map(move |v| (u, v, 1.0))).collect();
        assert_spectrum(&laplacian_spectrum(4, &k4), &[0.0, 4.0 / 3.0, 4.0 / 3.0, 4.0 / 3.0]);
        let c4 = [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (0, 3, 1.0)];
        assert_spectrum(&laplacian_spectrum(4, &c4), &[0.0, 1.0, 1.0, 2.0]);
        assert_spectrum(&laplacian_spectrum(2, &[(0, 1, 1.0)]), &[0.0, 2.0]);
    }

    #[test]
    fn isolated_vertex_is_zero() {
        let s = laplacian_spectrum(3, &[(0, 1, 1.0)]);
        assert_spectrum(&s, &[0.0, 0.0, 2.0]);
        assert_eq!(s.lambda(3), Some(s.eigenvalues[2]));
        assert_eq!(s.lambda(0), None);
        assert_eq!(s.lambda(4), None);
    }

    #[test]
    fn identity_and_rank_one_factorizations() {
        let index = Arc::new(MomentIndex::new(2, 2, 1).unwrap());
        let d = index.len();
        let id = MomentMatrix::new(index.clone(), DMatrix::identity(d, d)).unwrap();
        let emb = factorize(&id);
        assert!((emb.gram() - DMatrix::identity(d, d)).abs().max() < 1e-12);
        let ones = MomentMatrix::new(index, DMatrix::from_element(d, d, 1.0)).unwrap();
        let emb = factorize(&ones);
        assert_eq!(emb.dim_ambient(), 1);
        let first = emb.vector(0);
        for c in 0..d {
            assert!((emb.vector(c) - &first).norm() < 1e-12);
        }
    }

    #[test]
    fn projection_error_examples() {
        let id = DMatrix::<f64>::identity(5, 5);
        assert!((projection_error(&id, &[1]) - 4.0).abs() < 1e-12);
        let rank1 = DMatrix::from_fn(3, 4, |i, j| (i + 1) as f64 * (j + 1) as f64);
        assert!(projection_error(&rank1, &[2]) < 1e-20);
        let m = DMatrix::from_fn(5, 8, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        assert!(projection_error(&m, &(0..8).collect::<Vec<_>>()).abs() < 1e-20);
    }

    #[test]
    fn best_rank_examples() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
        assert!((best_rank_r_error(&d, 1) - 5.0).abs() < 1e-12);
        assert!(best_rank_r_error(&d, 3).abs() < 1e-12);
        let id = DMatrix::<f64>::identity(4, 4);
        assert!((best_rank_r_error(&id, 1) - 3.0).abs() < 1e-12);
    }
}
