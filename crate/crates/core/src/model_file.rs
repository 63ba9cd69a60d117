//! Binary model files.
//!
//! Layout, all little-endian, in order:
//!
//! ```text
//! magic  b"RMBD"
//! u32    format version (currently 1)
//! u32    section flags: bit 0 embedding (always set), bit 1 regressor,
//!        bit 2 row-l2-normalize preprocessing
//! u64    c, u64 d, u64 k
//! u64    oversampling, u64 power_iterations, u64 seed
//! f64    solver ridge, f64 solver rel_tolerance, u64 solver max_iterations
//! f64    regressor ridge_used (0.0 when the regressor section is absent)
//! f64    spectrum[k]
//! f64    V, c*k values, column-major
//! f64    W_e, d*k values, column-major (present iff bit 1 is set)
//! u32    CRC32 (IEEE) of every preceding byte
//! ```
//!
//! A file written by the embed stage carries only the embedding section;
//! the train stage rewrites it with the regressor section added. Saving
//! the same model twice yields identical bytes, and a load of a save
//! reproduces every field bit for bit.

use std::path::Path;

use crate::dense::DenseMatrix;
use crate::embedding::{LabelEmbedding, RembedConfig};
use crate::error::{Error, Result};
use crate::linalg::SolverParams;
use crate::predictor::LinearPredictor;

const MAGIC: &[u8; 4] = b"RMBD";
const VERSION: u32 = 1;
const FLAG_EMBEDDING: u32 = 1;
const FLAG_REGRESSOR: u32 = 1 << 1;
const FLAG_NORMALIZE: u32 = 1 << 2;
const KNOWN_FLAGS: u32 = FLAG_EMBEDDING | FLAG_REGRESSOR | FLAG_NORMALIZE;

#[derive(Debug, Clone)]
pub struct RegressorSection {
    pub w_e: DenseMatrix,
    pub ridge_used: f64,
}

/// In-memory image of a model file; the regressor section is optional so
/// the embed and train stages can complete the same file progressively.
#[derive(Debug, Clone)]
pub struct ModelFile {
    pub n_features: usize,
    pub normalize: bool,
    pub embedding: LabelEmbedding,
    pub regressor: Option<RegressorSection>,
}

impl ModelFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let emb = &self.embedding;
        let c = emb.n_labels();
        let d = self.n_features;
        let k = emb.dim();
        let mut buf = Vec::with_capacity(96 + 8 * (k + c * k + d * k));
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        let mut flags = FLAG_EMBEDDING;
        if self.regressor.is_some() {
            flags |= FLAG_REGRESSOR;
        }
        if self.normalize {
            flags |= FLAG_NORMALIZE;
        }
        buf.extend_from_slice(&flags.to_le_bytes());
        for dim in [c as u64, d as u64, k as u64] {
            buf.extend_from_slice(&dim.to_le_bytes());
        }
        let cfg = &emb.config;
        buf.extend_from_slice(&(cfg.oversampling as u64).to_le_bytes());
        buf.extend_from_slice(&(cfg.power_iterations as u64).to_le_bytes());
        buf.extend_from_slice(&cfg.seed.to_le_bytes());
        buf.extend_from_slice(&cfg.solver.ridge.to_le_bytes());
        buf.extend_from_slice(&cfg.solver.rel_tolerance.to_le_bytes());
        buf.extend_from_slice(&(cfg.solver.max_iterations as u64).to_le_bytes());
        let ridge_used = self.regressor.as_ref().map_or(0.0, |r| r.ridge_used);
        buf.extend_from_slice(&ridge_used.to_le_bytes());
        for &s in &emb.spectrum {
            buf.extend_from_slice(&s.to_le_bytes());
        }
        // column-major V
        for j in 0..k {
            for i in 0..c {
                buf.extend_from_slice(&emb.v.get(i, j).to_le_bytes());
            }
        }
        if let Some(reg) = &self.regressor {
            for j in 0..k {
                for i in 0..d {
                    buf.extend_from_slice(&reg.w_e.get(i, j).to_le_bytes());
                }
            }
        }
        let crc = crc32fast::hash(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<ModelFile> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4)?;
        if magic != MAGIC {
            return Err(Error::ModelFormat(
                "not a model file (bad magic bytes)".into(),
            ));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported format version {version} (expected {VERSION})"
            )));
        }
        let flags = r.u32()?;
        if flags & !KNOWN_FLAGS != 0 {
            return Err(Error::ModelFormat(format!(
                "unknown section flags {flags:#x}"
            )));
        }
        if flags & FLAG_EMBEDDING == 0 {
            return Err(Error::ModelFormat("embedding section missing".into()));
        }
        let c = r.u64()? as usize;
        let d = r.u64()? as usize;
        let k = r.u64()? as usize;
        if k == 0 || k > c {
            return Err(Error::ModelFormat(format!(
                "inconsistent dimensions: c={c}, d={d}, k={k}"
            )));
        }
        let oversampling = r.u64()? as usize;
        let power_iterations = r.u64()? as usize;
        let seed = r.u64()?;
        let ridge = r.f64()?;
        let rel_tolerance = r.f64()?;
        let max_iterations = r.u64()? as usize;
        let ridge_used = r.f64()?;
        let spectrum: Vec<f64> = (0..k).map(|_| r.f64()).collect::<Result<_>>()?;
        let v = r.column_major(c, k)?;
        let regressor = if flags & FLAG_REGRESSOR != 0 {
            Some(RegressorSection {
                w_e: r.column_major(d, k)?,
                ridge_used,
            })
        } else {
            None
        };
        let payload_end = r.pos;
        let stored_crc = r.u32()?;
        if r.pos != bytes.len() {
            return Err(Error::ModelFormat(format!(
                "{} trailing bytes after checksum",
                bytes.len() - r.pos
            )));
        }
        let crc = crc32fast::hash(&bytes[..payload_end]);
        if crc != stored_crc {
            return Err(Error::ModelFormat(format!(
                "checksum mismatch: stored {stored_crc:#010x}, computed {crc:#010x}"
            )));
        }
        Ok(ModelFile {
            n_features: d,
            normalize: flags & FLAG_NORMALIZE != 0,
            embedding: LabelEmbedding {
                v,
                spectrum,
                config: RembedConfig {
                    embedding_dim: k,
                    oversampling,
                    power_iterations,
                    solver: SolverParams {
                        ridge,
                        rel_tolerance,
                        max_iterations,
                    },
                    seed,
                },
            },
            regressor,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ModelFile> {
        let path = path.as_ref();
        let bytes =
            std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
        ModelFile::from_bytes(&bytes)
    }

    /// The complete predictor, or an error if only the embedding stage
    /// has run.
    pub fn into_predictor(self) -> Result<LinearPredictor> {
        let reg = self.regressor.ok_or_else(|| {
            Error::ModelFormat(
                "model has no regressor section; run the train stage first".into(),
            )
        })?;
        Ok(LinearPredictor {
            w_e: reg.w_e,
            embedding: self.embedding,
            ridge_used: reg.ridge_used,
        })
    }
}

pub fn save_model(model: &LinearPredictor, path: impl AsRef<Path>) -> Result<()> {
    ModelFile {
        n_features: model.n_features(),
        normalize: false,
        embedding: model.embedding.clone(),
        regressor: Some(RegressorSection {
            w_e: model.w_e.clone(),
            ridge_used: model.ridge_used,
        }),
    }
    .save(path)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LinearPredictor> {
    ModelFile::load(path)?.into_predictor()
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.pos + len > self.bytes.len() {
            return Err(Error::ModelFormat("file truncated".into()));
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn column_major(&mut self, rows: usize, cols: usize) -> Result<DenseMatrix> {
        let data = self.take(8 * rows * cols)?;
        let mut m = DenseMatrix::zeros(rows, cols);
        let mut offset = 0;
        for j in 0..cols {
            for i in 0..rows {
                let v = f64::from_le_bytes(data[offset..offset + 8].try_into().unwrap());
                m.set(i, j, v);
                offset += 8;
            }
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;

    fn sample_model(seed: u64, with_regressor: bool) -> ModelFile {
        let mut rng = RandomStream::new(seed);
        let c = 7;
        let d = 5;
        let k = 3;
        let q = DenseMatrix::from_fn(c, k, |_, _| rng.next_gaussian());
        let v = crate::linalg::orthonormalize(&q, &mut rng).unwrap();
        let mut config = RembedConfig::new(k, 0.125, seed);
        config.oversampling = 4;
        config.power_iterations = 2;
        ModelFile {
            n_features: d,
            normalize: seed % 2 == 0,
            embedding: LabelEmbedding {
                v,
                spectrum: vec![3.5, 2.25, 0.5],
                config,
            },
            regressor: with_regressor.then(|| RegressorSection {
                w_e: DenseMatrix::from_fn(d, k, |_, _| rng.next_gaussian()),
                ridge_used: 0.25,
            }),
        }
    }

    fn assert_model_eq(a: &ModelFile, b: &ModelFile) {
        assert_eq!(a.n_features, b.n_features);
        assert_eq!(a.normalize, b.normalize);
        assert_eq!(a.embedding.v.values(), b.embedding.v.values());
        assert_eq!(a.embedding.spectrum, b.embedding.spectrum);
        assert_eq!(a.embedding.config, b.embedding.config);
        match (&a.regressor, &b.regressor) {
            (None, None) => {}
            (Some(x), Some(y)) => {
                assert_eq!(x.w_e.values(), y.w_e.values());
                assert_eq!(x.ridge_used, y.ridge_used);
            }
            _ => panic!("regressor presence differs"),
        }
    }

    #[test]
    fn roundtrip_is_bit_identical() {
        for (seed, with_reg) in [(1, true), (2, false), (3, true)] {
            let m = sample_model(seed, with_reg);
            let bytes = m.to_bytes();
            let back = ModelFile::from_bytes(&bytes).unwrap();
            assert_model_eq(&m, &back);
            // saving the reloaded model reproduces the bytes exactly
            assert_eq!(back.to_bytes(), bytes);
        }
    }

    #[test]
    fn truncation_is_an_error_not_a_crash() {
        let bytes = sample_model(4, true).to_bytes();
        for cut in [0, 3, 7, 20, bytes.len() / 2, bytes.len() - 1] {
            let err = ModelFile::from_bytes(&bytes[..cut]).unwrap_err();
            assert!(matches!(err, Error::ModelFormat(_)), "cut at {cut}");
        }
    }

    #[test]
    fn wrong_magic_is_rejected() {
        let mut bytes = sample_model(5, true).to_bytes();
        bytes[0] = b'X';
        let err = ModelFile::from_bytes(&bytes).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("not a model file"), "{msg}");
    }

    #[test]
    fn corruption_fails_the_checksum() {
        let mut bytes = sample_model(6, true).to_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xFF;
        let err = ModelFile::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("checksum"), "{err}");
    }

    #[test]
    fn trailing_bytes_are_rejected() {
        let mut bytes = sample_model(7, false).to_bytes();
        bytes.push(0);
        assert!(ModelFile::from_bytes(&bytes).is_err());
    }

    #[test]
    fn embedding_only_model_refuses_to_predict() {
        let m = sample_model(8, false);
        let err = m.into_predictor().unwrap_err();
        assert!(err.to_string().contains("train"), "{err}");
    }

    #[test]
    fn unknown_flags_and_versions_are_rejected() {
        let bytes = sample_model(9, true).to_bytes();
        let mut v = bytes.clone();
        v[4] = 99; // version byte
        // recompute crc so the version check itself is what fires
        let n = v.len();
        let crc = crc32fast::hash(&v[..n - 4]);
        v[n - 4..].copy_from_slice(&crc.to_le_bytes());
        assert!(ModelFile::from_bytes(&v)
            .unwrap_err()
            .to_string()
            .contains("version"));

        let mut f = bytes;
        f[8] |= 0x80; // unknown flag bit
        let n = f.len();
        let crc = crc32fast::hash(&f[..n - 4]);
        f[n - 4..].copy_from_slice(&crc.to_le_bytes());
        assert!(ModelFile::from_bytes(&f)
            .unwrap_err()
            .to_string()
            .contains("flags"));
    }
}
