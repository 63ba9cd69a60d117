//! Embedding-space regressor and top-t decoding.
//!
//! Training regresses X onto the embedded targets Y·V; prediction scores
//! every label by s = V (W_e^T x) and keeps the top t. Scoring is exact
//! and dense over all c labels (cost c·k per query); ties break by
//! ascending label id so output is deterministic.

use rayon::prelude::*;

use crate::dataset::{Dataset, DatasetKind, Metrics};
use crate::dense::DenseMatrix;
use crate::embedding::LabelEmbedding;
use crate::error::{Error, Result};
use crate::linalg::{ridge_solve_multi, SolveReport, SolverParams};
use crate::sparse::{spmm, SparseMatrix};

#[derive(Debug, Clone)]
pub struct LinearPredictor {
    /// d x k map from features to the embedding space.
    pub w_e: DenseMatrix,
    pub embedding: LabelEmbedding,
    pub ridge_used: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub label_ids: Vec<usize>,
    /// Scores aligned with `label_ids`, nonincreasing.
    pub scores: Vec<f64>,
}

/// Fit the embedding-space regressor W_e = argmin ||X W - Y V||_F^2 +
/// ridge ||W||_F^2.
pub fn fit_regressor(
    x: &SparseMatrix,
    y: &SparseMatrix,
    embedding: &LabelEmbedding,
    solver: &SolverParams,
) -> Result<(LinearPredictor, SolveReport)> {
    if x.n_rows() != y.n_rows() {
        return Err(Error::dims(
            "fit_regressor",
            format!("X has {} rows, Y has {}", x.n_rows(), y.n_rows()),
        ));
    }
    if y.n_cols() != embedding.n_labels() {
        return Err(Error::dims(
            "fit_regressor",
            format!(
                "Y has {} labels, embedding has {}",
                y.n_cols(),
                embedding.n_labels()
            ),
        ));
    }
    let targets = spmm(y, &embedding.v)?;
    let (w_e, report) = ridge_solve_multi(x, &targets, solver)?;
    Ok((
        LinearPredictor {
            w_e,
            embedding: embedding.clone(),
            ridge_used: solver.ridge,
        },
        report,
    ))
}

impl LinearPredictor {
    pub fn n_features(&self) -> usize {
        self.w_e.n_rows()
    }

    pub fn n_labels(&self) -> usize {
        self.embedding.n_labels()
    }

    /// Full score vector V (W_e^T x) for a sparse feature row.
    pub fn score_labels(&self, indices: &[usize], values: &[f64]) -> Result<Vec<f64>> {
        let d = self.n_features();
        let k = self.embedding.dim();
        let mut z = vec![0.0; k];
        for (&i, &v) in indices.iter().zip(values) {
            if i >= d {
                return Err(Error::dims(
                    "score_labels",
                    format!("feature index {i} out of range (d = {d})"),
                ));
            }
            for (zj, wj) in z.iter_mut().zip(self.w_e.row(i)) {
                *zj += v * wj;
            }
        }
        let c = self.n_labels();
        let mut scores = vec![0.0; c];
        for l in 0..c {
            let row = self.embedding.v.row(l);
            scores[l] = row.iter().zip(&z).map(|(a, b)| a * b).sum();
        }
        Ok(scores)
    }

    /// Top-t labels by score, ties broken by ascending label id.
    pub fn predict_topt(&self, indices: &[usize], values: &[f64], t: usize) -> Result<Prediction> {
        let c = self.n_labels();
        if t == 0 || t > c {
            return Err(Error::InvalidArgument(format!(
                "top-t count {t} must lie in 1..={c}"
            )));
        }
        let scores = self.score_labels(indices, values)?;
        let mut order: Vec<usize> = (0..c).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .expect("scores are finite")
                .then(a.cmp(&b))
        });
        order.truncate(t);
        let top_scores = order.iter().map(|&l| scores[l]).collect();
        Ok(Prediction {
            label_ids: order,
            scores: top_scores,
        })
    }

    /// Precision@t over a test set. Examples with no true labels are
    /// excluded from every mean and counted separately. For multiclass
    /// data the report also carries test error = 1 - precision@1.
    pub fn evaluate(&self, test: &Dataset, t_values: &[usize]) -> Result<Metrics> {
        if test.x.n_cols() != self.n_features() {
            return Err(Error::dims(
                "evaluate",
                format!(
                    "test has {} features, model expects {}",
                    test.x.n_cols(),
                    self.n_features()
                ),
            ));
        }
        if test.y.n_cols() != self.n_labels() {
            return Err(Error::dims(
                "evaluate",
                format!(
                    "test has {} labels, model expects {}",
                    test.y.n_cols(),
                    self.n_labels()
                ),
            ));
        }
        if t_values.is_empty() {
            return Err(Error::InvalidArgument("no t values requested".into()));
        }
        let c = self.n_labels();
        let mut ts: Vec<usize> = t_values.to_vec();
        if test.kind == DatasetKind::Multiclass && !ts.contains(&1) {
            ts.push(1); // needed for the test-error line
        }
        ts.sort_unstable();
        ts.dedup();
        if let Some(&bad) = ts.iter().find(|&&t| t == 0 || t > c) {
            return Err(Error::InvalidArgument(format!(
                "precision@{bad} undefined: t must lie in 1..={c}"
            )));
        }
        let t_max = *ts.last().unwrap();

        let n = test.x.n_rows();
        // per-example hit counts at each requested t; integer sums keep
        // the parallel reduction exact and order-free
        let per_example: Vec<Option<Vec<usize>>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let (true_labels, _) = test.y.row(i);
                if true_labels.is_empty() {
                    return None;
                }
                let (cols, vals) = test.x.row(i);
                let top = self
                    .predict_topt(cols, vals, t_max)
                    .expect("dimensions verified above");
                let mut hits_at = Vec::with_capacity(ts.len());
                let mut hits = 0usize;
                let mut next = 0usize;
                for (rank, label) in top.label_ids.iter().enumerate() {
                    if true_labels.binary_search(label).is_ok() {
                        hits += 1;
                    }
                    while next < ts.len() && ts[next] == rank + 1 {
                        hits_at.push(hits);
                        next += 1;
                    }
                }
                debug_assert_eq!(hits_at.len(), ts.len());
                Some(hits_at)
            })
            .collect();

        let mut totals = vec![0usize; ts.len()];
        let mut n_evaluated = 0usize;
        let mut n_skipped = 0usize;
        for row in per_example {
            match row {
                Some(hits) => {
                    n_evaluated += 1;
                    for (tot, h) in totals.iter_mut().zip(hits) {
                        *tot += h;
                    }
                }
                None => n_skipped += 1,
            }
        }

        let mut precision_at = std::collections::BTreeMap::new();
        for (&t, &tot) in ts.iter().zip(&totals) {
            let p = if n_evaluated == 0 {
                0.0
            } else {
                tot as f64 / (t * n_evaluated) as f64
            };
            precision_at.insert(t, p);
        }
        let test_error = if test.kind == DatasetKind::Multiclass {
            precision_at.get(&1).map(|p| 1.0 - p)
        } else {
            None
        };
        // only the requested t values appear in the output map
        precision_at.retain(|t, _| t_values.contains(t));

        Ok(Metrics {
            precision_at,
            test_error,
            n_evaluated,
            n_skipped_empty: n_skipped,
        })
    }
}
