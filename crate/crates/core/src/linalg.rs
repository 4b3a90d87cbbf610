//! Dense symmetric linear algebra: Cholesky factorization, triangular
//! solves and the reduction of `V a = delta W a` to a standard symmetric
//! eigenproblem.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{NpcError, Result};

/// Lower-triangular `L` with `L L' = a`. Fails on a non-positive pivot.
pub fn cholesky(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(NpcError::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(NpcError::Factorization(format!(
                "non-positive pivot {diag:e} at column {j}"
            )));
        }
        let pivot = diag.sqrt();
        l[(j, j)] = pivot;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / pivot;
        }
    }
    Ok(l)
}

/// Squared ratio of the extreme Cholesky pivots; a cheap lower estimate
/// of the 2-norm condition number of `L L'`.
pub fn condition_estimate(l: &DMatrix<f64>) -> f64 {
    let diag = l.diagonal();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    (max / min).powi(2)
}

/// Solves `L X = B` by forward substitution.
pub fn solve_lower(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut x = b.clone();
    for c in 0..b.ncols() {
        for i in 0..n {
            let mut s = x[(i, c)];
            for k in 0..i {
                s -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

/// Solves `L' X = B` by back substitution.
pub fn solve_lower_transpose(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    let mut x = b.clone();
    for c in 0..b.ncols() {
        for i in (0..n).rev() {
            let mut s = x[(i, c)];
            for k in i + 1..n {
                s -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = s / l[(i, i)];
        }
    }
    x
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Eigenvalues in ascending order with matching eigenvector columns.
pub fn symmetric_eigen_ascending(a: DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Solution of `V a = delta W a` for symmetric `V` and positive definite `W`.
#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    /// Ascending.
    pub values: DVector<f64>,
    /// Columns are `W`-orthonormal.
    pub vectors: DMatrix<f64>,
}

/// Cholesky reduction: with `W = L L'`, solves the standard problem
/// `L^{-1} V L^{-T} y = delta y` and maps back `a = L^{-T} y`.
pub fn generalized_symmetric_eigen_with_factor(
    v: &DMatrix<f64>,
    l: &DMatrix<f64>,
) -> GeneralizedEigen {
    let left = solve_lower(l, v);
    let mut reduced = solve_lower(l, &left.transpose());
    symmetrize(&mut reduced);
    let (values, y) = symmetric_eigen_ascending(reduced);
    let vectors = solve_lower_transpose(l, &y);
    GeneralizedEigen { values, vectors }
}

pub fn generalized_symmetric_eigen(v: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<GeneralizedEigen> {
    if v.shape() != w.shape() {
        return Err(NpcError::DimensionMismatch {
            expected: w.nrows(),
            found: v.nrows(),
        });
    }
    let l = cholesky(w)?;
    Ok(generalized_symmetric_eigen_with_factor(v, &l))
}
