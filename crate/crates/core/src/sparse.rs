//! CSR sparse matrices and the two dense-block products that dominate
//! the pipeline's runtime.
//!
//! Determinism contract: `spmm` and `spmm_t` produce bit-identical output
//! for a given input regardless of how many worker threads rayon uses.
//! `spmm` parallelizes over output rows (each row is summed serially).
//! `spmm_t` splits the input rows into chunks whose boundaries depend only
//! on the matrix shape, accumulates one partial per chunk, and merges the
//! partials in ascending chunk order.

use rayon::prelude::*;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from raw CSR arrays, validating every structural invariant:
    /// offsets start at 0, are nondecreasing, and end at nnz; column
    /// indices are strictly increasing within each row and in bounds;
    /// values are finite.
    pub fn from_csr(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1 {
            return Err(Error::InvalidMatrix(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                n_rows + 1
            )));
        }
        if row_offsets[0] != 0 {
            return Err(Error::InvalidMatrix("row_offsets[0] must be 0".into()));
        }
        let nnz = *row_offsets.last().unwrap();
        if col_indices.len() != nnz || values.len() != nnz {
            return Err(Error::InvalidMatrix(format!(
                "col_indices/values have lengths {}/{}, expected nnz={}",
                col_indices.len(),
                values.len(),
                nnz
            )));
        }
        for i in 0..n_rows {
            let (lo, hi) = (row_offsets[i], row_offsets[i + 1]);
            if lo > hi {
                return Err(Error::InvalidMatrix(format!(
                    "row_offsets decreases at row {i}"
                )));
            }
            let mut prev: Option<usize> = None;
            for &c in &col_indices[lo..hi] {
                if c >= n_cols {
                    return Err(Error::InvalidMatrix(format!(
                        "column index {c} out of bounds (n_cols={n_cols}) in row {i}"
                    )));
                }
                if let Some(p) = prev {
                    if c <= p {
                        return Err(Error::InvalidMatrix(format!(
                            "column indices not strictly increasing in row {i}"
                        )));
                    }
                }
                prev = Some(c);
            }
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sparse matrix entry {v}")));
        }
        Ok(SparseMatrix {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Build from per-row (column, value) pair lists. Pairs within a row
    /// may be unsorted but must not contain duplicate columns.
    pub fn from_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n_rows = rows.len();
        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        row_offsets.push(0usize);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        for (i, mut row) in rows.into_iter().enumerate() {
            row.sort_by_key(|&(c, _)| c);
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::InvalidMatrix(format!(
                        "duplicate column {} in row {i}",
                        w[0].0
                    )));
                }
            }
            for (c, v) in row {
                col_indices.push(c);
                values.push(v);
            }
            row_offsets.push(col_indices.len());
        }
        SparseMatrix::from_csr(n_rows, n_cols, row_offsets, col_indices, values)
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                out.set(i, c, v);
            }
        }
        out
    }

    /// Mean squared row norm, the scale used for the default ridge.
    pub fn mean_squared_row_norm(&self) -> f64 {
        if self.n_rows == 0 {
            return 0.0;
        }
        self.values.iter().map(|v| v * v).sum::<f64>() / self.n_rows as f64
    }

    /// The same matrix viewed with a wider column dimension.
    pub fn pad_columns(&self, n_cols: usize) -> Result<SparseMatrix> {
        if n_cols < self.n_cols {
            return Err(Error::InvalidArgument(format!(
                "cannot pad {} columns down to {}",
                self.n_cols, n_cols
            )));
        }
        let mut out = self.clone();
        out.n_cols = n_cols;
        Ok(out)
    }

    /// Scale every nonzero row to unit Euclidean norm; all-zero rows are
    /// left unchanged.
    pub fn row_l2_normalize(&self) -> SparseMatrix {
        let mut values = self.values.clone();
        for i in 0..self.n_rows {
            let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
            let norm = values[lo..hi].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in &mut values[lo..hi] {
                    *v /= norm;
                }
            }
        }
        SparseMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets: self.row_offsets.clone(),
            col_indices: self.col_indices.clone(),
            values,
        }
    }
}

/// A (n x d) * B (d x m) -> n x m.
pub fn spmm(a: &SparseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.n_cols != b.n_rows() {
        return Err(Error::dims(
            "spmm",
            format!(
                "sparse {}x{} * dense {}x{}",
                a.n_rows,
                a.n_cols,
                b.n_rows(),
                b.n_cols()
            ),
        ));
    }
    let m = b.n_cols();
    let mut out = DenseMatrix::zeros(a.n_rows, m);
    out.values_mut()
        .par_chunks_mut(m.max(1))
        .enumerate()
        .for_each(|(i, out_row)| {
            let (cols, vals) = a.row(i);
            for (&t, &av) in cols.iter().zip(vals) {
                let b_row = b.row(t);
                for (o, &bv) in out_row.iter_mut().zip(b_row) {
                    *o += av * bv;
                }
            }
        });
    Ok(out)
}

/// Input rows per chunk for `spmm_t`. Boundaries are a function of the
/// shape alone so the merge order (and therefore the floating-point
/// result) does not depend on the thread count.
fn spmm_t_chunk_rows(n_rows: usize) -> usize {
    const MIN_CHUNK: usize = 128;
    const MAX_CHUNKS: usize = 64;
    MIN_CHUNK.max(n_rows.div_ceil(MAX_CHUNKS))
}

/// A^T (d x n) * B (n x m) -> d x m, without materializing A^T.
pub fn spmm_t(a: &SparseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.n_rows != b.n_rows() {
        return Err(Error::dims(
            "spmm_t",
            format!(
                "sparse {}x{}^T * dense {}x{}",
                a.n_rows,
                a.n_cols,
                b.n_rows(),
                b.n_cols()
            ),
        ));
    }
    let m = b.n_cols();
    let chunk = spmm_t_chunk_rows(a.n_rows);
    let ranges: Vec<(usize, usize)> = (0..a.n_rows)
        .step_by(chunk.max(1))
        .map(|lo| (lo, (lo + chunk).min(a.n_rows)))
        .collect();

    let partials: Vec<DenseMatrix> = ranges
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut acc = DenseMatrix::zeros(a.n_cols, m);
            for i in lo..hi {
                let (cols, vals) = a.row(i);
                let b_row = b.row(i);
                for (&t, &av) in cols.iter().zip(vals) {
                    let acc_row = acc.row_mut(t);
                    for (o, &bv) in acc_row.iter_mut().zip(b_row) {
                        *o += av * bv;
                    }
                }
            }
            acc
        })
        .collect();

    let mut out = DenseMatrix::zeros(a.n_cols, m);
    for part in partials {
        for (o, p) in out.values_mut().iter_mut().zip(part.values()) {
            *o += p;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;
    use crate::testing::{random_dense, random_sparse};
    use proptest::prelude::*;

    /// Naive triple-loop oracle for A*B with A densified.
    fn naive_spmm(a: &SparseMatrix, b: &DenseMatrix) -> DenseMatrix {
        let ad = a.to_dense();
        let mut out = DenseMatrix::zeros(a.n_rows(), b.n_cols());
        for i in 0..a.n_rows() {
            for j in 0..b.n_cols() {
                let mut s = 0.0;
                for t in 0..a.n_cols() {
                    s += ad.get(i, t) * b.get(t, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    fn naive_spmm_t(a: &SparseMatrix, b: &DenseMatrix) -> DenseMatrix {
        let ad = a.to_dense();
        let mut out = DenseMatrix::zeros(a.n_cols(), b.n_cols());
        for i in 0..a.n_cols() {
            for j in 0..b.n_cols() {
                let mut s = 0.0;
                for t in 0..a.n_rows() {
                    s += ad.get(t, i) * b.get(t, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    #[test]
    fn from_csr_validates_structure() {
        // bad offsets length
        assert!(SparseMatrix::from_csr(2, 2, vec![0, 1], vec![0], vec![1.0]).is_err());
        // decreasing offsets
        assert!(SparseMatrix::from_csr(2, 2, vec![0, 1, 0], vec![0], vec![1.0]).is_err());
        // out-of-bounds column
        assert!(SparseMatrix::from_csr(1, 2, vec![0, 1], vec![2], vec![1.0]).is_err());
        // non-increasing columns within a row
        assert!(SparseMatrix::from_csr(1, 3, vec![0, 2], vec![1, 1], vec![1.0, 2.0]).is_err());
        // NaN value
        assert!(matches!(
            SparseMatrix::from_csr(1, 1, vec![0, 1], vec![0], vec![f64::NAN]),
            Err(Error::NonFinite(_))
        ));
        // valid
        assert!(SparseMatrix::from_csr(2, 3, vec![0, 2, 3], vec![0, 2, 1], vec![1.0; 3]).is_ok());
    }

    #[test]
    fn spmm_identity_returns_input() {
        let mut rng = RandomStream::new(1);
        let b = random_dense(&mut rng, 3, 2);
        let out = spmm(&SparseMatrix::identity(3), &b).unwrap();
        assert_eq!(out, b);
    }

    #[test]
    fn spmm_zero_matrix_annihilates() {
        let a = SparseMatrix::from_rows(3, vec![vec![], vec![], vec![]]).unwrap();
        let b = DenseMatrix::from_fn(3, 2, |i, j| (i + j) as f64);
        let out = spmm(&a, &b).unwrap();
        assert_eq!(out.max_abs(), 0.0);
    }

    #[test]
    fn spmm_matches_naive_oracle() {
        let mut rng = RandomStream::new(42);
        let a = random_sparse(&mut rng, 20, 15, 0.2);
        let b = random_dense(&mut rng, 15, 4);
        let fast = spmm(&a, &b).unwrap();
        let slow = naive_spmm(&a, &b);
        assert!(fast.rel_frobenius_diff(&slow) <= 1e-12);
    }

    #[test]
    fn spmm_t_identity_and_single_entry() {
        let mut rng = RandomStream::new(2);
        let b = random_dense(&mut rng, 3, 2);
        assert_eq!(spmm_t(&SparseMatrix::identity(3), &b).unwrap(), b);

        // A[0,2]=5 in 2x4; B = (1,0)^T -> A^T B = (0,0,5,0)^T
        let a = SparseMatrix::from_rows(4, vec![vec![(2, 5.0)], vec![]]).unwrap();
        let b = DenseMatrix::from_row_major(2, 1, vec![1.0, 0.0]).unwrap();
        let out = spmm_t(&a, &b).unwrap();
        assert_eq!(out.values(), &[0.0, 0.0, 5.0, 0.0]);
    }

    #[test]
    fn spmm_t_matches_naive_oracle() {
        let mut rng = RandomStream::new(43);
        let a = random_sparse(&mut rng, 20, 15, 0.3);
        let b = random_dense(&mut rng, 20, 3);
        let fast = spmm_t(&a, &b).unwrap();
        let slow = naive_spmm_t(&a, &b);
        assert!(fast.rel_frobenius_diff(&slow) <= 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = SparseMatrix::identity(3);
        let b = DenseMatrix::zeros(4, 2);
        assert!(matches!(
            spmm(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            spmm_t(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ata_b_composition_matches_dense() {
        let mut rng = RandomStream::new(44);
        let a = random_sparse(&mut rng, 30, 25, 0.25);
        let b = random_dense(&mut rng, 25, 3);
        let fast = spmm_t(&a, &spmm(&a, &b).unwrap()).unwrap();
        let ad = a.to_dense();
        let slow = ad
            .transpose()
            .matmul(&ad.matmul(&b).unwrap())
            .unwrap();
        assert!(fast.rel_frobenius_diff(&slow) <= 1e-10);
    }

    #[test]
    fn spmm_t_chunked_merge_is_thread_invariant() {
        // Run the same product under differently sized local pools; the
        // fixed chunk boundaries must make the bits identical.
        let mut rng = RandomStream::new(45);
        let a = random_sparse(&mut rng, 700, 40, 0.1);
        let b = random_dense(&mut rng, 700, 6);
        let reference = spmm_t(&a, &b).unwrap();
        for threads in [1usize, 2, 7] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let out = pool.install(|| spmm_t(&a, &b).unwrap());
            assert_eq!(out.values(), reference.values(), "threads={threads}");
        }
    }

    #[test]
    fn row_l2_normalize_examples() {
        let a = SparseMatrix::from_rows(2, vec![vec![(0, 3.0), (1, 4.0)], vec![]]).unwrap();
        let n = a.row_l2_normalize();
        let (_, vals) = n.row(0);
        assert!((vals[0] - 0.6).abs() < 1e-15);
        assert!((vals[1] - 0.8).abs() < 1e-15);
        let (cols, _) = n.row(1);
        assert!(cols.is_empty());
    }

    #[test]
    fn stored_zeros_do_not_change_products() {
        let with_zero =
            SparseMatrix::from_rows(3, vec![vec![(0, 2.0), (1, 0.0)], vec![(2, 1.0)]]).unwrap();
        let without =
            SparseMatrix::from_rows(3, vec![vec![(0, 2.0)], vec![(2, 1.0)]]).unwrap();
        let b = DenseMatrix::from_fn(3, 2, |i, j| (i * 2 + j) as f64 + 0.5);
        assert_eq!(
            spmm(&with_zero, &b).unwrap().values(),
            spmm(&without, &b).unwrap().values()
        );
        let c = DenseMatrix::from_fn(2, 2, |i, j| (i + j) as f64 - 0.25);
        assert_eq!(
            spmm_t(&with_zero, &c).unwrap().values(),
            spmm_t(&without, &c).unwrap().values()
        );
    }

    proptest! {
        #[test]
        fn prop_spmm_matches_naive(seed in 0u64..500) {
            let mut rng = RandomStream::new(seed);
            let n = 1 + (rng.next_u64() % 24) as usize;
            let d = 1 + (rng.next_u64() % 24) as usize;
            let m = 1 + (rng.next_u64() % 5) as usize;
            let a = random_sparse(&mut rng, n, d, 0.3);
            let b = DenseMatrix::from_fn(d, m, |_, _| rng.next_gaussian());
            let fast = spmm(&a, &b).unwrap();
            let slow = naive_spmm(&a, &b);
            prop_assert!(fast.rel_frobenius_diff(&slow) <= 1e-12);
        }

        #[test]
        fn prop_row_normalize_idempotent(seed in 0u64..200) {
            let mut rng = RandomStream::new(seed);
            let a = random_sparse(&mut rng, 12, 9, 0.4);
            let once = a.row_l2_normalize();
            let twice = once.row_l2_normalize();
            for (x, y) in once.values().iter().zip(twice.values()) {
                prop_assert!((x - y).abs() <= 1e-15);
            }
        }
    }
}
