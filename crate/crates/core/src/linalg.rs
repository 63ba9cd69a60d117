//! Dense small-matrix kernels and the matrix-free ridge least-squares
//! solver.
//!
//! The eigensolver is cyclic Jacobi: the matrices it sees are at most
//! (k+p) x (k+p) in the pipeline and a few hundred square in the
//! verification oracle, where Jacobi is simple and returns orthonormal
//! vectors directly. The least-squares solver is conjugate gradient on
//! the normal equations, using only the `spmm`/`spmm_t` kernels.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::sparse::{spmm, spmm_t, SparseMatrix};

pub const DEFAULT_REL_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_ITERATIONS: usize = 1000;

/// Ridge weight scaled to the data: 1e-3 times the mean squared row norm
/// of the design matrix, so the default tracks feature magnitude.
pub fn default_ridge(x: &SparseMatrix) -> f64 {
    1e-3 * x.mean_squared_row_norm()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub ridge: f64,
    pub rel_tolerance: f64,
    pub max_iterations: usize,
}

impl SolverParams {
    pub fn new(ridge: f64) -> Self {
        SolverParams {
            ridge,
            rel_tolerance: DEFAULT_REL_TOLERANCE,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }

    pub fn with_tolerance(mut self, rel_tolerance: f64) -> Self {
        self.rel_tolerance = rel_tolerance;
        self
    }

    pub fn with_max_iterations(mut self, max_iterations: usize) -> Self {
        self.max_iterations = max_iterations;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.ridge.is_finite() || self.ridge < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "ridge must be finite and nonnegative, got {}",
                self.ridge
            )));
        }
        if !(self.rel_tolerance > 0.0 && self.rel_tolerance < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "rel_tolerance must lie in (0, 1), got {}",
                self.rel_tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument(
                "max_iterations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Per-column convergence record of a multi-RHS solve.
#[derive(Debug, Clone)]
pub struct ColumnConvergence {
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SolveReport {
    pub columns: Vec<ColumnConvergence>,
}

impl SolveReport {
    pub fn all_converged(&self) -> bool {
        self.columns.iter().all(|c| c.converged)
    }

    pub fn n_converged(&self) -> usize {
        self.columns.iter().filter(|c| c.converged).count()
    }

    pub fn max_iterations_used(&self) -> usize {
        self.columns.iter().map(|c| c.iterations).max().unwrap_or(0)
    }

    pub fn worst_rel_residual(&self) -> f64 {
        self.columns
            .iter()
            .map(|c| c.rel_residual)
            .fold(0.0, f64::max)
    }

    pub fn merge(&mut self, other: &SolveReport) {
        self.columns.extend(other.columns.iter().cloned());
    }
}

/// Eigendecomposition of a symmetric matrix, eigenvalues nonincreasing,
/// eigenvector j (column j) paired with eigenvalue j.
#[derive(Debug, Clone)]
pub struct EigResult {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DenseMatrix,
}

/// Flip each column so its largest-magnitude entry is positive, ties
/// going to the lowest index. Makes output comparable across runs.
fn canonicalize_column_signs(m: &mut DenseMatrix) {
    for j in 0..m.n_cols() {
        let mut pivot = 0usize;
        let mut best = f64::NEG_INFINITY;
        for i in 0..m.n_rows() {
            let a = m.get(i, j).abs();
            if a > best {
                best = a;
                pivot = i;
            }
        }
        if m.get(pivot, j) < 0.0 {
            for i in 0..m.n_rows() {
                let v = m.get(i, j);
                m.set(i, j, -v);
            }
        }
    }
}

const DEPENDENCE_RATIO: f64 = 1e-12;

/// Orthonormalize the columns of `q` by modified Gram-Schmidt with one
/// re-orthogonalization pass. A column whose post-projection norm falls
/// below 1e-12 of its pre-projection norm is numerically dependent and is
/// replaced by a fresh random direction orthonormalized against all
/// prior columns, so the output always has full column rank.
pub fn orthonormalize(q: &DenseMatrix, rng: &mut RandomStream) -> Result<DenseMatrix> {
    let (c, m) = (q.n_rows(), q.n_cols());
    if c < m {
        return Err(Error::dims(
            "orthonormalize",
            format!("need n_rows >= n_cols, got {c}x{m}"),
        ));
    }
    if m == 0 {
        return Ok(q.clone());
    }
    // accepted orthonormal columns, stored contiguously
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
    for j in 0..m {
        let mut v = q.column(j);
        let pre = vector_norm(&v);
        project_out(&mut v, &basis);
        project_out(&mut v, &basis);
        let post = vector_norm(&v);
        if pre == 0.0 || post < DEPENDENCE_RATIO * pre {
            v = replacement_direction(c, &basis, rng)?;
        } else {
            let inv = 1.0 / post;
            for x in &mut v {
                *x *= inv;
            }
        }
        basis.push(v);
    }
    let mut out = DenseMatrix::from_fn(c, m, |i, j| basis[j][i]);
    canonicalize_column_signs(&mut out);
    Ok(out)
}

fn vector_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
        for (x, y) in v.iter_mut().zip(b) {
            *x -= dot * y;
        }
    }
}

fn replacement_direction(
    c: usize,
    basis: &[Vec<f64>],
    rng: &mut RandomStream,
) -> Result<Vec<f64>> {
    for _ in 0..64 {
        let mut v: Vec<f64> = (0..c).map(|_| rng.next_gaussian()).collect();
        let pre = vector_norm(&v);
        project_out(&mut v, basis);
        project_out(&mut v, basis);
        let post = vector_norm(&v);
        if pre > 0.0 && post >= 1e-6 * pre {
            let inv = 1.0 / post;
            for x in &mut v {
                *x *= inv;
            }
            return Ok(v);
        }
    }
    Err(Error::Numerical(
        "failed to draw an independent replacement direction".into(),
    ))
}

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_OFFDIAG_RATIO: f64 = 1e-12;
const SYMMETRY_TOLERANCE: f64 = 1e-10;
pub const MAX_EIG_DIM: usize = 2000;

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// The input is symmetrized as (S + S^T)/2 after an asymmetry check;
/// convergence is declared when the largest off-diagonal magnitude drops
/// below 1e-12 of the Frobenius norm.
pub fn symmetric_eig(s: &DenseMatrix) -> Result<EigResult> {
    let m = s.n_rows();
    if s.n_cols() != m {
        return Err(Error::dims(
            "symmetric_eig",
            format!("matrix is {}x{}", s.n_rows(), s.n_cols()),
        ));
    }
    if m > MAX_EIG_DIM {
        return Err(Error::InvalidArgument(format!(
            "symmetric_eig limited to {MAX_EIG_DIM}x{MAX_EIG_DIM}, got {m}"
        )));
    }
    if let Some(v) = s.values().iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("symmetric_eig input entry {v}")));
    }
    let scale = s.max_abs().max(1.0);
    let mut asym = 0.0f64;
    for i in 0..m {
        for j in (i + 1)..m {
            asym = asym.max((s.get(i, j) - s.get(j, i)).abs());
        }
    }
    if asym > SYMMETRY_TOLERANCE * scale {
        return Err(Error::InvalidArgument(format!(
            "matrix is not symmetric: max |S - S^T| = {asym:.3e}"
        )));
    }

    let mut a: Vec<f64> = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            a.push(0.5 * (s.get(i, j) + s.get(j, i)));
        }
    }
    let mut u = DenseMatrix::identity(m);

    let frob = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let threshold = JACOBI_OFFDIAG_RATIO * frob;
    if frob > 0.0 {
        let mut converged = false;
        for _ in 0..JACOBI_MAX_SWEEPS {
            let mut max_off = 0.0f64;
            for p in 0..m {
                for q in (p + 1)..m {
                    let apq = a[p * m + q];
                    max_off = max_off.max(apq.abs());
                    if apq.abs() <= threshold {
                        continue;
                    }
                    let app = a[p * m + p];
                    let aqq = a[q * m + q];
                    let tau = (aqq - app) / (2.0 * apq);
                    let t = if tau >= 0.0 {
                        1.0 / (tau + (1.0 + tau * tau).sqrt())
                    } else {
                        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                    };
                    let cos = 1.0 / (1.0 + t * t).sqrt();
                    let sin = t * cos;
                    // rows/columns p and q of A
                    for r in 0..m {
                        let arp = a[r * m + p];
                        let arq = a[r * m + q];
                        a[r * m + p] = cos * arp - sin * arq;
                        a[r * m + q] = sin * arp + cos * arq;
                    }
                    for cix in 0..m {
                        let apc = a[p * m + cix];
                        let aqc = a[q * m + cix];
                        a[p * m + cix] = cos * apc - sin * aqc;
                        a[q * m + cix] = sin * apc + cos * aqc;
                    }
                    a[p * m + q] = 0.0;
                    a[q * m + p] = 0.0;
                    // accumulate rotation into eigenvector columns
                    for r in 0..m {
                        let urp = u.get(r, p);
                        let urq = u.get(r, q);
                        u.set(r, p, cos * urp - sin * urq);
                        u.set(r, q, sin * urp + cos * urq);
                    }
                }
            }
            if max_off <= threshold {
                converged = true;
                break;
            }
        }
        if !converged {
            // one final check: the sweep loop updates after rotating
            let max_off = (0..m)
                .flat_map(|p| ((p + 1)..m).map(move |q| (p, q)))
                .map(|(p, q)| a[p * m + q].abs())
                .fold(0.0f64, f64::max);
            if max_off > threshold {
                return Err(Error::Numerical(format!(
                    "Jacobi did not converge in {JACOBI_MAX_SWEEPS} sweeps \
                     (off-diagonal {max_off:.3e})"
                )));
            }
        }
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| {
        a[j * m + j]
            .partial_cmp(&a[i * m + i])
            .expect("finite eigenvalues")
            .then(i.cmp(&j))
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[i * m + i]).collect();
    let mut eigenvectors = DenseMatrix::from_fn(m, m, |r, c| u.get(r, order[c]));
    canonicalize_column_signs(&mut eigenvectors);
    Ok(EigResult {
        eigenvalues,
        eigenvectors,
    })
}

/// Minimize ||X W - B||_F^2 + ridge ||W||_F^2 column-by-column with
/// conjugate gradient on the normal equations (X^T X + ridge I) w = X^T b.
/// All right-hand sides share each X pass; columns stop individually when
/// their normal-equation residual drops below rel_tolerance times the
/// right-hand-side norm. Zero right-hand sides yield zero columns.
pub fn ridge_solve_multi(
    x: &SparseMatrix,
    b: &DenseMatrix,
    params: &SolverParams,
) -> Result<(DenseMatrix, SolveReport)> {
    params.validate()?;
    if b.n_rows() != x.n_rows() {
        return Err(Error::dims(
            "ridge_solve_multi",
            format!(
                "X is {}x{}, B is {}x{}",
                x.n_rows(),
                x.n_cols(),
                b.n_rows(),
                b.n_cols()
            ),
        ));
    }
    let d = x.n_cols();
    let m = b.n_cols();
    let ridge = params.ridge;

    let mut w = DenseMatrix::zeros(d, m);
    let mut r = spmm_t(x, b)?; // residual of the normal equations at W = 0
    let mut p = r.clone();

    let mut rr: Vec<f64> = (0..m).map(|j| col_norm_sq(&r, j)).collect();
    let rhs_norm: Vec<f64> = rr.iter().map(|v| v.sqrt()).collect();
    let mut done: Vec<bool> = Vec::with_capacity(m);
    let mut report: Vec<ColumnConvergence> = Vec::with_capacity(m);
    for j in 0..m {
        let trivial = rhs_norm[j] == 0.0;
        done.push(trivial);
        if trivial {
            zero_col(&mut p, j);
        }
        report.push(ColumnConvergence {
            iterations: 0,
            rel_residual: if trivial { 0.0 } else { 1.0 },
            converged: trivial,
        });
    }

    for iter in 1..=params.max_iterations {
        if done.iter().all(|&f| f) {
            break;
        }
        let mut ap = spmm_t(x, &spmm(x, &p)?)?;
        if ridge != 0.0 {
            for (o, &pv) in ap.values_mut().iter_mut().zip(p.values()) {
                *o += ridge * pv;
            }
        }
        for j in 0..m {
            if done[j] {
                continue;
            }
            let pap = col_dot(&p, &ap, j);
            if !(pap > 0.0) {
                // direction exhausted; freeze at the current iterate
                done[j] = true;
                report[j].converged = report[j].rel_residual <= params.rel_tolerance;
                zero_col(&mut p, j);
                continue;
            }
            let alpha = rr[j] / pap;
            axpy_col(&mut w, &p, alpha, j);
            axpy_col(&mut r, &ap, -alpha, j);
            let rr_new = col_norm_sq(&r, j);
            let rel = rr_new.sqrt() / rhs_norm[j];
            report[j].iterations = iter;
            report[j].rel_residual = rel;
            if rel <= params.rel_tolerance {
                report[j].converged = true;
                done[j] = true;
                zero_col(&mut p, j);
            } else {
                let beta = rr_new / rr[j];
                scale_col_add(&mut p, &r, beta, j);
            }
            rr[j] = rr_new;
        }
    }

    Ok((w, SolveReport { columns: report }))
}

#[inline]
fn col_norm_sq(m: &DenseMatrix, j: usize) -> f64 {
    let stride = m.n_cols();
    m.values()[j..]
        .iter()
        .step_by(stride)
        .map(|v| v * v)
        .sum()
}

#[inline]
fn col_dot(a: &DenseMatrix, b: &DenseMatrix, j: usize) -> f64 {
    let stride = a.n_cols();
    a.values()[j..]
        .iter()
        .step_by(stride)
        .zip(b.values()[j..].iter().step_by(stride))
        .map(|(x, y)| x * y)
        .sum()
}

#[inline]
fn zero_col(m: &mut DenseMatrix, j: usize) {
    let stride = m.n_cols();
    for v in m.values_mut()[j..].iter_mut().step_by(stride) {
        *v = 0.0;
    }
}

/// out_col += alpha * src_col
#[inline]
fn axpy_col(out: &mut DenseMatrix, src: &DenseMatrix, alpha: f64, j: usize) {
    let stride = out.n_cols();
    for (o, s) in out.values_mut()[j..]
        .iter_mut()
        .step_by(stride)
        .zip(src.values()[j..].iter().step_by(stride))
    {
        *o += alpha * s;
    }
}

/// p_col = src_col + beta * p_col
#[inline]
fn scale_col_add(p: &mut DenseMatrix, src: &DenseMatrix, beta: f64, j: usize) {
    let stride = p.n_cols();
    for (o, s) in p.values_mut()[j..]
        .iter_mut()
        .step_by(stride)
        .zip(src.values()[j..].iter().step_by(stride))
    {
        *o = s + beta * *o;
    }
}
