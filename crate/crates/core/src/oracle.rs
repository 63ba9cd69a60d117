//! Brute-force dense references for tests and the verify command.
//!
//! Everything here forms the operators the main pipeline refuses to
//! materialize. Feasible up to a few hundred rows/columns; performance is
//! a non-goal.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::linalg::symmetric_eig;

pub const MAX_ORACLE_DIM: usize = 200;

/// Dense Cholesky factor L with A = L L^T. Fails on non-positive pivots,
/// which for the gram matrices used here means rank deficiency at
/// ridge 0.
fn cholesky(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.n_rows();
    assert_eq!(n, a.n_cols());
    let max_diag = (0..n).map(|i| a.get(i, i).abs()).fold(0.0f64, f64::max);
    let floor = 1e-12 * max_diag.max(1e-300);
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            for t in 0..j {
                sum -= l.get(i, t) * l.get(j, t);
            }
            if i == j {
                if sum <= floor {
                    return Err(Error::Numerical(
                        "gram matrix is numerically singular; rerun with ridge > 0".into(),
                    ));
                }
                l.set(i, i, sum.sqrt());
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Solve (L L^T) X = B for every column of B.
fn cholesky_solve(l: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let n = l.n_rows();
    let m = b.n_cols();
    let mut x = b.clone();
    // forward: L z = b
    for j in 0..m {
        for i in 0..n {
            let mut v = x.get(i, j);
            for t in 0..i {
                v -= l.get(i, t) * x.get(t, j);
            }
            x.set(i, j, v / l.get(i, i));
        }
        // backward: L^T x = z
        for i in (0..n).rev() {
            let mut v = x.get(i, j);
            for t in (i + 1)..n {
                v -= l.get(t, i) * x.get(t, j);
            }
            x.set(i, j, v / l.get(i, i));
        }
    }
    x
}

/// Dense direct ridge solve (X^T X + ridge I) W = X^T B, the reference
/// for `ridge_solve_multi`.
pub fn dense_ridge_solve(x: &DenseMatrix, b: &DenseMatrix, ridge: f64) -> Result<DenseMatrix> {
    if x.n_rows() != b.n_rows() {
        return Err(Error::dims(
            "dense_ridge_solve",
            format!("X has {} rows, B has {}", x.n_rows(), b.n_rows()),
        ));
    }
    let d = x.n_cols();
    let mut gram = x.transpose_matmul(x)?;
    for i in 0..d {
        let v = gram.get(i, i) + ridge;
        gram.set(i, i, v);
    }
    let l = cholesky(&gram)?;
    Ok(cholesky_solve(&l, &x.transpose_matmul(b)?))
}

/// Exact top-k eigenpairs of M = Y^T X (X^T X + ridge I)^-1 X^T Y, formed
/// explicitly. This is the object the randomized path approximates.
pub fn exact_embedding(
    x: &DenseMatrix,
    y: &DenseMatrix,
    k: usize,
    ridge: f64,
) -> Result<(DenseMatrix, Vec<f64>)> {
    let (n, d) = (x.n_rows(), x.n_cols());
    let c = y.n_cols();
    if y.n_rows() != n {
        return Err(Error::dims(
            "exact_embedding",
            format!("X has {n} rows, Y has {}", y.n_rows()),
        ));
    }
    if n > MAX_ORACLE_DIM || d > MAX_ORACLE_DIM || c > MAX_ORACLE_DIM {
        return Err(Error::InvalidArgument(format!(
            "oracle limited to dimensions <= {MAX_ORACLE_DIM}, got n={n} d={d} c={c}"
        )));
    }
    if k == 0 || k > c {
        return Err(Error::InvalidArgument(format!(
            "k must lie in 1..={c}, got {k}"
        )));
    }
    let xty = x.transpose_matmul(y)?; // d x c
    let w = dense_ridge_solve(x, y, ridge)?; // d x c
    let m_op = xty.transpose_matmul(&w)?; // c x c
    let sym = DenseMatrix::from_fn(c, c, |i, j| 0.5 * (m_op.get(i, j) + m_op.get(j, i)));
    let eig = symmetric_eig(&sym)?;
    Ok((
        eig.eigenvectors.take_columns(k),
        eig.eigenvalues[..k].to_vec(),
    ))
}

/// Principal angles between the column spans of two orthonormal c x k
/// matrices, nondecreasing, in [0, pi/2]. The singular values of A^T B
/// come from the eigenvalues of (A^T B)^T (A^T B), clamped into [0, 1]
/// before the arccosine.
pub fn principal_angles(a: &DenseMatrix, b: &DenseMatrix) -> Result<Vec<f64>> {
    if a.n_rows() != b.n_rows() || a.n_cols() != b.n_cols() {
        return Err(Error::dims(
            "principal_angles",
            format!(
                "{}x{} vs {}x{}",
                a.n_rows(),
                a.n_cols(),
                b.n_rows(),
                b.n_cols()
            ),
        ));
    }
    for (name, m) in [("first", a), ("second", b)] {
        let defect = m.orthonormality_defect();
        if defect > 1e-8 {
            return Err(Error::InvalidArgument(format!(
                "{name} input is not orthonormal (defect {defect:.3e})"
            )));
        }
    }
    let cross = a.transpose_matmul(b)?; // k x k
    let gram = cross.transpose_matmul(&cross)?;
    let eig = symmetric_eig(&gram)?;
    Ok(eig
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0).sqrt().clamp(0.0, 1.0).acos())
        .collect())
}

/// Largest principal angle, the usual single-number subspace distance.
pub fn largest_principal_angle(a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
    Ok(principal_angles(a, b)?
        .into_iter()
        .fold(0.0f64, f64::max))
}
