//! Small dense symmetric helpers. Storage is nalgebra; eigen- and singular
//! value decompositions run on faer.

use nalgebra::{DMatrix, DVector};

fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Eigenvalues ascending with matching eigenvector columns.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let evd = to_faer(m)
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("symmetric eigendecomposition of a finite matrix");
    let values = evd.S().column_vector();
    let vectors = evd.U();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted = DVector::from_iterator(n, order.iter().map(|&i| values[i]));
    let basis = DMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
    (sorted, basis)
}

/// Ascending eigenvalues only.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut values = to_faer(m)
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .expect("symmetric eigenvalues of a finite matrix");
    values.sort_by(f64::total_cmp);
    values
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    if m.iter().any(|x| !x.is_finite()) {
        return f64::NAN;
    }
    sym_eigenvalues(m).first().copied().unwrap_or(f64::NAN)
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    to_faer(m)
        .singular_values()
        .expect("singular values of a finite matrix")
}

/// Nearest PSD matrix in Frobenius norm; the result is mirrored exactly.
pub fn project_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    if n == 0 {
        return m.clone();
    }
    if n == 1 {
        return DMatrix::from_element(1, 1, m[(0, 0)].max(0.0));
    }
    let (values, vectors) = sym_eigen(m);
    let positive: Vec<usize> = (0..n).filter(|&i| values[i] > 0.0).collect();
    if positive.is_empty() {
        return DMatrix::zeros(n, n);
    }
    let mut b = DMatrix::zeros(n, positive.len());
    for (c, &i) in positive.iter().enumerate() {
        b.set_column(c, &(vectors.column(i) * values[i].sqrt()));
    }
    let mut out = &b * b.transpose();
    symmetrize(&mut out);
    out
}

/// Copy the upper triangle onto the lower one.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in 0..j {
            m[(j, i)] = m[(i, j)];
        }
    }
}

/// Orthonormal basis (as columns) of the span of `cols`, by modified
/// Gram-Schmidt with two passes; columns whose residual norm falls below
/// `rank_tol` times their original norm (or absolutely below `rank_tol`) are dropped.
pub fn orthonormal_basis(cols: &[DVector<f64>], rank_tol: f64) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for c in cols {
        let norm0 = c.norm();
        let mut v = c.clone();
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&v);
                v.axpy(-proj, q, 1.0);
            }
        }
        let norm = v.norm();
        if norm > rank_tol * norm0.max(1.0) {
            basis.push(v / norm);
        }
    }
    basis
}

/// Squared distance of `v` from the span of an orthonormal basis.
pub fn residual_sq(v: &DVector<f64>, basis: &[DVector<f64>]) -> f64 {
    let mut r = v.clone();
    for _ in 0..2 {
        for q in basis {
            let proj = q.dot(&r);
            r.axpy(-proj, q, 1.0);
        }
    }
    r.norm_squared()
}

/// PSD projection of one block stored as a row-major upper triangle,
/// written back in the same layout. Runs on faer's sequential eigensolver.
pub fn project_psd_packed(d: usize, packed: &[f64], out: &mut [f64]) {
    if d == 1 {
        out[0] = packed[0].max(0.0);
        return;
    }
    let mut m = faer::Mat::<f64>::zeros(d, d);
    let mut p = 0;
    for i in 0..d {
        for j in i..d {
            m[(i, j)] = packed[p];
            m[(j, i)] = packed[p];
            p += 1;
        }
    }
    let evd = m
        .self_adjoint_eigen(faer::Side::Lower)
        .expect("symmetric eigendecomposition of a finite matrix");
    let values = evd.S().column_vector();
    let vectors = evd.U();
    let positive: Vec<usize> = (0..d).filter(|&i| values[i] > 0.0).collect();
    let mut b = faer::Mat::<f64>::zeros(d, positive.len());
    for (c, &i) in positive.iter().enumerate() {
        let s = values[i].sqrt();
        for r in 0..d {
            b[(r, c)] = vectors[(r, i)] * s;
        }
    }
    let prod = &b * b.transpose();
    let mut p = 0;
    for i in 0..d {
        for j in i..d {
            out[p] = prod[(i, j)];
            p += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_clips_negative_part() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        // eigenpairs: 3 on (1,1)/sqrt2, -1 on (1,-1)/sqrt2
        let p = project_psd(&m);
        for x in p.iter() {
            assert!((x - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn packed_projection_matches_dense() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 0.5, 2.0, -1.0, 0.3, 0.5, 0.3, 0.2]);
        let dense = project_psd(&m);
        let packed: Vec<f64> = (0..3).flat_map(|i| (i..3).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect();
        let mut out = vec![0.0; packed.len()];
        project_psd_packed(3, &packed, &mut out);
        let mut p = 0;
        for i in 0..3 {
            for j in i..3 {
                assert!((out[p] - dense[(i, j)]).abs() < 1e-12);
                p += 1;
            }
        }
    }

    #[test]
    fn eigen_sorted() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, 5.0]);
        let (vals, vecs) = sym_eigen(&m);
        assert_eq!(vals.as_slice(), &[-1.0, 2.0, 5.0]);
        assert!((vecs[(1, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((min_eigenvalue(&m) + 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_one_moment_block_has_finite_spectrum() {
        // a structured 0/1 PSD matrix on which some QR-iteration solvers return NaN
        let x = DVector::from_fn(40, |i, _| ((i * 7) % 3 == 0) as u8 as f64);
        let m = &x * x.transpose();
        let vals = sym_eigenvalues(&m);
        assert!(vals.iter().all(|v| v.is_finite()));
        assert!((vals[39] - x.norm_squared()).abs() < 1e-10);
    }
}
