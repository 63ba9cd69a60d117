//! Shared helpers for unit tests.

use crate::dense::DenseMatrix;
use crate::rng::RandomStream;
use crate::sparse::SparseMatrix;

pub(crate) fn random_sparse(
    rng: &mut RandomStream,
    n: usize,
    d: usize,
    density: f64,
) -> SparseMatrix {
    let rows = (0..n)
        .map(|_| {
            (0..d)
                .filter_map(|j| {
                    if rng.next_unit() < density {
                        Some((j, rng.next_gaussian()))
                    } else {
                        None
                    }
                })
                .collect()
        })
        .collect();
    SparseMatrix::from_rows(d, rows).unwrap()
}

pub(crate) fn random_dense(rng: &mut RandomStream, n: usize, m: usize) -> DenseMatrix {
    DenseMatrix::from_fn(n, m, |_, _| rng.next_gaussian())
}

/// Sparse multilabel indicator matrix with 1..=max_labels labels per row.
pub(crate) fn random_multilabel(
    rng: &mut RandomStream,
    n: usize,
    c: usize,
    max_labels: usize,
) -> SparseMatrix {
    let rows = (0..n)
        .map(|_| {
            let count = 1 + rng.next_below(max_labels.min(c));
            rng.choose_distinct(c, count)
                .into_iter()
                .map(|l| (l, 1.0))
                .collect()
        })
        .collect();
    SparseMatrix::from_rows(c, rows).unwrap()
}
