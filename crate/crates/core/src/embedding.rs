//! Randomized label embeddings.
//!
//! The embedding is the top-k eigenspace of the label-space operator
//! M = Y^T P_X Y, where P_X = X (X^T X + ridge I)^-1 X^T. M is never
//! formed: each application M·Q costs one sparse product Y·Q, one
//! multi-RHS ridge solve against X, and two more sparse products. A
//! seeded random probe block is driven through `power_iterations` rounds
//! of apply-and-orthonormalize, and eigenvalue/eigenvector estimates are
//! extracted from the small Rayleigh-Ritz matrix T = Q^T M Q.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::linalg::{
    orthonormalize, ridge_solve_multi, symmetric_eig, SolveReport, SolverParams,
};
use crate::rng::RandomStream;
use crate::sparse::{spmm, spmm_t, SparseMatrix};

pub const DEFAULT_OVERSAMPLING: usize = 10;
pub const DEFAULT_POWER_ITERATIONS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct RembedConfig {
    /// Target rank k: the embedding dimension.
    pub embedding_dim: usize,
    /// Extra probe columns beyond k that stabilize the recovery.
    pub oversampling: usize,
    /// Number of apply-and-orthonormalize rounds.
    pub power_iterations: usize,
    pub solver: SolverParams,
    pub seed: u64,
}

impl RembedConfig {
    pub fn new(embedding_dim: usize, ridge: f64, seed: u64) -> Self {
        RembedConfig {
            embedding_dim,
            oversampling: DEFAULT_OVERSAMPLING,
            power_iterations: DEFAULT_POWER_ITERATIONS,
            solver: SolverParams::new(ridge),
            seed,
        }
    }

    pub fn probe_width(&self) -> usize {
        self.embedding_dim + self.oversampling
    }

    pub fn validate(&self, n_labels: usize) -> Result<()> {
        if self.embedding_dim == 0 {
            return Err(Error::InvalidArgument("embedding_dim must be >= 1".into()));
        }
        if self.power_iterations == 0 {
            return Err(Error::InvalidArgument(
                "power_iterations must be >= 1".into(),
            ));
        }
        if self.probe_width() > n_labels {
            return Err(Error::InvalidArgument(format!(
                "embedding_dim + oversampling = {} exceeds the number of labels {}",
                self.probe_width(),
                n_labels
            )));
        }
        self.solver.validate()
    }
}

/// Orthonormal basis V (c x k) of the estimated top-k eigenspace of M,
/// with eigenvalue estimates from the Rayleigh-Ritz step.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelEmbedding {
    pub v: DenseMatrix,
    pub spectrum: Vec<f64>,
    pub config: RembedConfig,
}

impl LabelEmbedding {
    pub fn n_labels(&self) -> usize {
        self.v.n_rows()
    }

    pub fn dim(&self) -> usize {
        self.v.n_cols()
    }
}

#[derive(Debug, Clone)]
pub struct RembedOutput {
    pub embedding: LabelEmbedding,
    /// One entry per operator application (power iterations plus the
    /// final Rayleigh-Ritz product), in order.
    pub solve_reports: Vec<SolveReport>,
}

/// One matrix-free application of M: Z = Y Q, W = argmin ||X W - Z||^2 +
/// ridge ||W||^2, result = Y^T (X W).
pub fn hat_product(
    x: &SparseMatrix,
    y: &SparseMatrix,
    q: &DenseMatrix,
    solver: &SolverParams,
) -> Result<(DenseMatrix, SolveReport)> {
    if x.n_rows() != y.n_rows() {
        return Err(Error::dims(
            "hat_product",
            format!("X has {} rows, Y has {}", x.n_rows(), y.n_rows()),
        ));
    }
    if q.n_rows() != y.n_cols() {
        return Err(Error::dims(
            "hat_product",
            format!("Q has {} rows, Y has {} columns", q.n_rows(), y.n_cols()),
        ));
    }
    let z = spmm(y, q)?;
    let (w, report) = ridge_solve_multi(x, &z, solver)?;
    let fitted = spmm(x, &w)?;
    Ok((spmm_t(y, &fitted)?, report))
}

/// Compute the rank-k label embedding by randomized subspace iteration.
///
/// The probe block starts as a seeded Gaussian c x (k+p) matrix, is
/// replaced by orthonormalize(M Q) for `power_iterations` rounds, and the
/// result is refined through the Rayleigh-Ritz matrix T = Q^T M Q
/// (symmetrized to absorb inexact-solve asymmetry). Eigenvalue estimates
/// below zero are clamped: M is positive semidefinite, so any negative
/// estimate is solver noise. Inner-solver non-convergence is reported,
/// not fatal.
pub fn rembed(x: &SparseMatrix, y: &SparseMatrix, config: &RembedConfig) -> Result<RembedOutput> {
    config.validate(y.n_cols())?;
    if x.n_rows() != y.n_rows() {
        return Err(Error::dims(
            "rembed",
            format!("X has {} rows, Y has {}", x.n_rows(), y.n_rows()),
        ));
    }
    if x.n_rows() == 0 {
        return Err(Error::InvalidArgument("need at least one example".into()));
    }
    let c = y.n_cols();
    let k = config.embedding_dim;
    let width = config.probe_width();

    let mut rng = RandomStream::new(config.seed);
    let mut probe = DenseMatrix::from_fn(c, width, |_, _| rng.next_gaussian());
    let mut reports = Vec::with_capacity(config.power_iterations + 1);

    for _ in 0..config.power_iterations {
        let (applied, report) = hat_product(x, y, &probe, &config.solver)?;
        reports.push(report);
        probe = orthonormalize(&applied, &mut rng)?;
    }

    let (applied, report) = hat_product(x, y, &probe, &config.solver)?;
    reports.push(report);
    let small = probe.transpose_matmul(&applied)?;
    // symmetrize before the eigensolve; inexact solves leave T slightly
    // asymmetric
    let small_sym = {
        let w = small.n_cols();
        DenseMatrix::from_fn(w, w, |i, j| 0.5 * (small.get(i, j) + small.get(j, i)))
    };
    let eig = symmetric_eig(&small_sym)?;

    let v = probe.matmul(&eig.eigenvectors.take_columns(k))?;
    let spectrum: Vec<f64> = eig.eigenvalues[..k].iter().map(|&l| l.max(0.0)).collect();

    Ok(RembedOutput {
        embedding: LabelEmbedding {
            v,
            spectrum,
            config: config.clone(),
        },
        solve_reports: reports,
    })
}

/// Project a label set into the embedding space: z = V^T y for the
/// indicator vector y of `label_ids`.
pub fn embed_labels(label_ids: &[usize], embedding: &LabelEmbedding) -> Result<Vec<f64>> {
    let c = embedding.n_labels();
    let k = embedding.dim();
    let mut z = vec![0.0; k];
    for &l in label_ids {
        if l >= c {
            return Err(Error::InvalidArgument(format!(
                "label index {l} out of range (c = {c})"
            )));
        }
        for (zj, vj) in z.iter_mut().zip(embedding.v.row(l)) {
            *zj += vj;
        }
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{random_multilabel, random_sparse};

    fn one_hot_labels(counts: &[usize]) -> SparseMatrix {
        let c = counts.len();
        let mut rows = Vec::new();
        for (label, &count) in counts.iter().enumerate() {
            for _ in 0..count {
                rows.push(vec![(label, 1.0)]);
            }
        }
        SparseMatrix::from_rows(c, rows).unwrap()
    }

    #[test]
    fn hat_product_with_identity_design_reduces_to_gram() {
        // P_X = I when X = I and ridge = 0, so M Q = Y^T Y Q.
        let mut rng = RandomStream::new(11);
        let n = 12;
        let y = random_multilabel(&mut rng, n, 8, 3);
        let q = DenseMatrix::from_fn(8, 4, |_, _| rng.next_gaussian());
        let solver = SolverParams::new(0.0).with_tolerance(1e-14);
        let (got, rep) = hat_product(&SparseMatrix::identity(n), &y, &q, &solver).unwrap();
        assert!(rep.all_converged());
        let want = spmm_t(&y, &spmm(&y, &q).unwrap()).unwrap();
        assert!(got.rel_frobenius_diff(&want) <= 1e-10);
    }

    #[test]
    fn hat_product_orthonormal_labels_is_identity() {
        // Y with orthonormal columns and X = I: M = Y^T Y = I.
        let y = SparseMatrix::from_rows(
            3,
            vec![vec![(0, 1.0)], vec![(1, 1.0)], vec![(2, 1.0)], vec![]],
        )
        .unwrap();
        let mut rng = RandomStream::new(3);
        let q = DenseMatrix::from_fn(3, 2, |_, _| rng.next_gaussian());
        let solver = SolverParams::new(0.0).with_tolerance(1e-14);
        let (got, _) = hat_product(&SparseMatrix::identity(4), &y, &q, &solver).unwrap();
        assert!(got.rel_frobenius_diff(&q) <= 1e-10);
    }

    #[test]
    fn rembed_diagonal_case_recovers_counts_and_basis() {
        // X = I, Y one-hot with class counts (5,3,2,1): M = diag(5,3,2,1).
        let y = one_hot_labels(&[5, 3, 2, 1]);
        let n = y.n_rows();
        let mut config = RembedConfig::new(2, 0.0, 42);
        config.oversampling = 2;
        config.power_iterations = 6;
        config.solver = config.solver.with_tolerance(1e-13);
        let out = rembed(&SparseMatrix::identity(n), &y, &config).unwrap();
        let emb = &out.embedding;
        assert!((emb.spectrum[0] - 5.0).abs() < 1e-8);
        assert!((emb.spectrum[1] - 3.0).abs() < 1e-8);
        // V columns are +-e1, +-e2; the sign convention fixes them to +
        for (col, expect_row) in [(0usize, 0usize), (1, 1)] {
            for r in 0..4 {
                let want = if r == expect_row { 1.0 } else { 0.0 };
                assert!(
                    (emb.v.get(r, col).abs() - want).abs() < 1e-7,
                    "V[{r},{col}] = {}",
                    emb.v.get(r, col)
                );
            }
        }
        assert!(emb.v.orthonormality_defect() <= 1e-8);
    }

    #[test]
    fn rembed_full_width_probe_spans_everything() {
        // k + p = c: V plus the discarded directions form a basis of R^c.
        let mut rng = RandomStream::new(21);
        let x = random_sparse(&mut rng, 15, 10, 0.5);
        let y = random_multilabel(&mut rng, 15, 6, 2);
        let mut config = RembedConfig::new(4, 1e-3, 5);
        config.oversampling = 2; // k + p = 6 = c
        config.power_iterations = 2;
        let out = rembed(&x, &y, &config).unwrap();
        assert_eq!(out.embedding.dim(), 4);
        assert!(out.embedding.v.orthonormality_defect() <= 1e-8);
    }

    #[test]
    fn rembed_rejects_oversized_probe() {
        let x = SparseMatrix::identity(4);
        let y = one_hot_labels(&[2, 2]);
        let config = RembedConfig::new(2, 0.0, 1); // k+p = 12 > c = 2
        assert!(matches!(
            rembed(&x, &y, &config),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn rembed_is_deterministic_across_runs_and_thread_counts() {
        let mut rng = RandomStream::new(33);
        let x = random_sparse(&mut rng, 30, 20, 0.3);
        let y = random_multilabel(&mut rng, 30, 12, 3);
        let mut config = RembedConfig::new(3, 1e-3, 99);
        config.oversampling = 4;
        let a = rembed(&x, &y, &config).unwrap();
        let b = rembed(&x, &y, &config).unwrap();
        assert_eq!(a.embedding.v.values(), b.embedding.v.values());
        assert_eq!(a.embedding.spectrum, b.embedding.spectrum);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap();
        let c = pool.install(|| rembed(&x, &y, &config).unwrap());
        assert_eq!(a.embedding.v.values(), c.embedding.v.values());
    }

    #[test]
    fn rembed_spectrum_is_nonincreasing_and_nonnegative() {
        let mut rng = RandomStream::new(55);
        let x = random_sparse(&mut rng, 25, 15, 0.3);
        let y = random_multilabel(&mut rng, 25, 10, 2);
        let mut config = RembedConfig::new(4, 1e-4, 3);
        config.oversampling = 3;
        let out = rembed(&x, &y, &config).unwrap();
        let s = &out.embedding.spectrum;
        for w in s.windows(2) {
            assert!(w[0] >= w[1]);
        }
        assert!(s.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn embed_labels_selects_rows() {
        let v = DenseMatrix::from_fn(4, 2, |i, j| (i * 2 + j) as f64);
        let emb = LabelEmbedding {
            v,
            spectrum: vec![1.0, 0.5],
            config: RembedConfig::new(2, 0.0, 0),
        };
        // single label -> that row of V
        assert_eq!(embed_labels(&[3], &emb).unwrap(), vec![6.0, 7.0]);
        // empty -> zero
        assert_eq!(embed_labels(&[], &emb).unwrap(), vec![0.0, 0.0]);
        // two labels -> sum of rows
        assert_eq!(embed_labels(&[1, 2], &emb).unwrap(), vec![6.0, 8.0]);
        // out of range
        assert!(embed_labels(&[4], &emb).is_err());
    }
}
