//! Synthetic multiclass data with a planted low-rank structure.
//!
//! Geometry: `c` unit-norm class prototypes in R^k_true, spread apart by
//! a repulsion iteration so no two are close in inner product. Example i
//! gets class `i mod c` (balanced counts keep per-class score magnitudes
//! comparable), and its features are the class prototype in the first
//! k_true coordinates plus a small jitter, followed by a label-independent
//! mixture of sparse "topic" vectors over the remaining coordinates. The
//! topic block has low rank (r topics) so the nuisance subspace cannot
//! drown the class structure at the sample sizes this generator targets.
//! Labels are flipped to a uniformly random class with probability
//! `noise` after the features are drawn.

use crate::dataset::{Dataset, DatasetKind};
use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::sparse::SparseMatrix;

const JITTER: f64 = 0.02;
const N_TOPICS: usize = 8;
const TOPICS_PER_EXAMPLE: usize = 2;
const TOPIC_FILL: f64 = 0.1;
const REPULSION_ITERATIONS: usize = 800;
const REPULSION_STEP: f64 = 0.15;
const REPULSION_SHARPNESS: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// Training examples; the test split gets max(1, n/5) more.
    pub n: usize,
    pub d: usize,
    pub c: usize,
    pub k_true: usize,
    /// Label-flip probability in [0, 1].
    pub noise: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.d == 0 || self.c == 0 {
            return Err(Error::InvalidArgument(
                "synthetic spec needs n, d, c >= 1".into(),
            ));
        }
        if self.k_true == 0 || self.k_true > self.d.min(self.c) {
            return Err(Error::InvalidArgument(format!(
                "k_true must lie in 1..=min(d, c) = {}, got {}",
                self.d.min(self.c),
                self.k_true
            )));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::InvalidArgument(format!(
                "noise must lie in [0, 1], got {}",
                self.noise
            )));
        }
        Ok(())
    }

    pub fn n_test(&self) -> usize {
        (self.n / 5).max(1)
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub train: Dataset,
    pub test: Dataset,
    /// c x k_true prototype matrix; its column span is the planted label
    /// subspace for recovery tests.
    pub planted: DenseMatrix,
}

/// Unit-norm rows pushed apart on the sphere. Deterministic in the
/// stream state.
fn spread_prototypes(rng: &mut RandomStream, c: usize, k: usize) -> DenseMatrix {
    let mut u = vec![0.0f64; c * k];
    for v in &mut u {
        *v = rng.next_gaussian();
    }
    normalize_rows(&mut u, c, k);
    let mut grad = vec![0.0f64; c * k];
    for _ in 0..REPULSION_ITERATIONS {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for a in 0..c {
            for b in 0..c {
                if a == b {
                    continue;
                }
                let dot: f64 = (0..k).map(|t| u[a * k + t] * u[b * k + t]).sum();
                let w = (REPULSION_SHARPNESS * (dot - 1.0)).exp();
                for t in 0..k {
                    grad[a * k + t] += w * u[b * k + t];
                }
            }
        }
        for (uv, gv) in u.iter_mut().zip(&grad) {
            *uv -= REPULSION_STEP * gv;
        }
        normalize_rows(&mut u, c, k);
    }
    DenseMatrix::from_fn(c, k, |i, j| u[i * k + j])
}

fn normalize_rows(u: &mut [f64], c: usize, k: usize) {
    for i in 0..c {
        let row = &mut u[i * k..(i + 1) * k];
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in row {
                *v /= norm;
            }
        }
    }
}

/// Sparse topic vectors over the nuisance coordinates [k_true, d).
fn draw_topics(rng: &mut RandomStream, d_noise: usize) -> Vec<Vec<(usize, f64)>> {
    if d_noise == 0 {
        return Vec::new();
    }
    let nnz = ((d_noise as f64 * TOPIC_FILL).ceil() as usize).clamp(1, d_noise);
    (0..N_TOPICS)
        .map(|_| {
            let mut idx = rng.choose_distinct(d_noise, nnz);
            idx.sort_unstable();
            idx.into_iter().map(|i| (i, rng.next_gaussian())).collect()
        })
        .collect()
}

fn draw_split(
    rng: &mut RandomStream,
    spec: &SynthSpec,
    prototypes: &DenseMatrix,
    topics: &[Vec<(usize, f64)>],
    m: usize,
) -> Result<Dataset> {
    let k = spec.k_true;
    let mut x_rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
    let mut y_rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut label = i % spec.c;
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(k + 2 * topics.first().map_or(0, Vec::len));
        for t in 0..k {
            row.push((t, prototypes.get(label, t) + JITTER * rng.next_gaussian()));
        }
        if !topics.is_empty() {
            let chosen = rng.choose_distinct(topics.len(), TOPICS_PER_EXAMPLE.min(topics.len()));
            let mut acc = std::collections::BTreeMap::new();
            for t in chosen {
                let coeff = rng.next_gaussian();
                for &(j, v) in &topics[t] {
                    *acc.entry(k + j).or_insert(0.0) += coeff * v;
                }
            }
            row.extend(acc);
        }
        if spec.noise > 0.0 && rng.next_unit() < spec.noise {
            label = rng.next_below(spec.c);
        }
        x_rows.push(row);
        y_rows.push(vec![(label, 1.0)]);
    }
    Ok(Dataset {
        x: SparseMatrix::from_rows(spec.d, x_rows)?,
        y: SparseMatrix::from_rows(spec.c, y_rows)?,
        kind: DatasetKind::Multiclass,
    })
}

pub fn generate_synthetic(spec: &SynthSpec) -> Result<SynthOutput> {
    spec.validate()?;
    let mut rng = RandomStream::new(spec.seed);
    let prototypes = spread_prototypes(&mut rng, spec.c, spec.k_true);
    let topics = draw_topics(&mut rng, spec.d - spec.k_true);
    let train = draw_split(&mut rng, spec, &prototypes, &topics, spec.n)?;
    let test = draw_split(&mut rng, spec, &prototypes, &topics, spec.n_test())?;
    Ok(SynthOutput {
        train,
        test,
        planted: prototypes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(n: usize, noise: f64, seed: u64) -> SynthSpec {
        SynthSpec {
            n,
            d: 30,
            c: 10,
            k_true: 3,
            noise,
            seed,
        }
    }

    #[test]
    fn same_seed_identical_datasets() {
        let a = generate_synthetic(&spec(50, 0.2, 7)).unwrap();
        let b = generate_synthetic(&spec(50, 0.2, 7)).unwrap();
        assert_eq!(a.train.x, b.train.x);
        assert_eq!(a.train.y, b.train.y);
        assert_eq!(a.test.x, b.test.x);
        assert_eq!(a.planted, b.planted);
        let c = generate_synthetic(&spec(50, 0.2, 8)).unwrap();
        assert_ne!(a.train.x, c.train.x);
    }

    #[test]
    fn single_row_dataset_is_accepted() {
        let out = generate_synthetic(&spec(1, 0.0, 1)).unwrap();
        assert_eq!(out.train.n_examples(), 1);
        assert_eq!(out.test.n_examples(), 1);
    }

    #[test]
    fn infeasible_specs_are_rejected() {
        let mut s = spec(10, 0.0, 1);
        s.k_true = 31; // > min(d, c)
        assert!(generate_synthetic(&s).is_err());
        s = spec(10, 1.5, 1);
        assert!(generate_synthetic(&s).is_err());
        s = spec(0, 0.0, 1);
        assert!(generate_synthetic(&s).is_err());
    }

    #[test]
    fn prototypes_are_unit_and_spread() {
        let out = generate_synthetic(&spec(10, 0.0, 3)).unwrap();
        let p = &out.planted;
        assert_eq!(p.n_rows(), 10);
        assert_eq!(p.n_cols(), 3);
        let mut max_dot = f64::NEG_INFINITY;
        for a in 0..10 {
            let ra = p.row(a);
            let norm: f64 = ra.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
            for b in 0..10 {
                if a != b {
                    let dot: f64 = ra.iter().zip(p.row(b)).map(|(x, y)| x * y).sum();
                    max_dot = max_dot.max(dot);
                }
            }
        }
        // 10 prototypes in R^3 can stay well below cosine 0.9
        assert!(max_dot < 0.9, "max prototype dot {max_dot}");
    }

    #[test]
    fn labels_are_balanced_and_one_hot() {
        let out = generate_synthetic(&spec(40, 0.0, 5)).unwrap();
        assert_eq!(out.train.kind, DatasetKind::Multiclass);
        let mut counts = vec![0usize; 10];
        for i in 0..40 {
            let (labels, vals) = out.train.y.row(i);
            assert_eq!(labels.len(), 1);
            assert_eq!(vals, &[1.0]);
            counts[labels[0]] += 1;
        }
        assert!(counts.iter().all(|&cnt| cnt == 4));
    }

    #[test]
    fn full_rank_planted_model_with_d_equal_k() {
        // d = k_true: no nuisance block at all
        let s = SynthSpec {
            n: 20,
            d: 3,
            c: 6,
            k_true: 3,
            noise: 0.0,
            seed: 2,
        };
        let out = generate_synthetic(&s).unwrap();
        assert_eq!(out.train.x.n_cols(), 3);
        for i in 0..20 {
            let (cols, _) = out.train.x.row(i);
            assert!(cols.iter().all(|&c| c < 3));
        }
    }
}
