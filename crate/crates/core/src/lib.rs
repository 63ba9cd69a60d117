//! Low-dimensional label embeddings for large output spaces.
//!
//! For a multiclass or multilabel problem with feature matrix X (n x d)
//! and label indicator matrix Y (n x c), the optimal rank-k squared-loss
//! predictor factors through the top-k eigenspace of Y^T P_X Y, where P_X
//! is the (ridge-regularized) hat matrix of X. This crate computes that
//! eigenspace without ever forming the operator: randomized subspace
//! iteration drives a seeded probe block through matrix-free products,
//! each of which costs one multi-RHS iterative ridge solve. On top of the
//! embedding sit a second-stage regressor into the embedding space, exact
//! top-t decoding back to labels, precision@t evaluation, dataset and
//! model file formats, and dense brute-force oracles used for
//! verification.
//!
//! Everything is deterministic: a single seed drives all randomness, and
//! the parallel kernels are bit-reproducible for any worker count.

pub mod dataset;
pub mod dense;
pub mod embedding;
pub mod error;
pub mod linalg;
pub mod model_file;
pub mod oracle;
pub mod predictor;
pub mod rng;
pub mod sparse;
pub mod synth;

#[cfg(test)]
pub(crate) mod testing;

pub use dataset::{Dataset, DatasetKind, Metrics, ParseReport};
pub use dense::DenseMatrix;
pub use embedding::{embed_labels, hat_product, rembed, LabelEmbedding, RembedConfig, RembedOutput};
pub use error::{Error, Result};
pub use linalg::{
    default_ridge, orthonormalize, ridge_solve_multi, symmetric_eig, EigResult, SolveReport,
    SolverParams,
};
pub use model_file::{load_model, save_model, ModelFile, RegressorSection};
pub use predictor::{fit_regressor, LinearPredictor, Prediction};
pub use rng::RandomStream;
pub use sparse::{spmm, spmm_t, SparseMatrix};
pub use synth::{generate_synthetic, SynthOutput, SynthSpec};
