//! Skip-gram n-gram embeddings trained with sampled logistic loss.
//!
//! Each (target, context) pair is scored against the true context and a
//! shared set of noise ids drawn once per batch from a log-uniform
//! distribution over the frequency-ranked vocabulary. Training is plain SGD
//! and single threaded, so a fixed seed reproduces the matrix bit for bit.

mod batch;
mod loss;
mod noise;
mod train;

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::codec::{read_file, write_file, ByteReader, ByteWriter};
use crate::error::{Error, Result};

pub use batch::{generate_batch, Batch};
pub use loss::{nce_loss_and_grad, SparseGradients};
pub use noise::LogUniformSampler;
pub use train::{train_embeddings, EmbeddingTrainer, FileLoss};

const EMB_MAGIC: &[u8; 7] = b"P2VEMB1";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingHyperparams {
    pub batch_size: usize,
    pub skip_window: usize,
    pub num_skips: usize,
    pub embedding_size: usize,
    /// Noise ids drawn per batch and scored against every pair.
    pub num_negative: usize,
    /// Batches per training file.
    pub num_steps: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for EmbeddingHyperparams {
    fn default() -> Self {
        Self {
            batch_size: 128,
            skip_window: 1,
            num_skips: 2,
            embedding_size: 128,
            num_negative: 64,
            num_steps: 100_000,
            learning_rate: 1.0,
            seed: 0,
        }
    }
}

impl EmbeddingHyperparams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.batch_size == 0 || self.skip_window == 0 || self.num_skips == 0 {
            return bad("batch_size, skip_window and num_skips must be positive".into());
        }
        if self.num_skips > 2 * self.skip_window {
            return bad(format!(
                "num_skips {} exceeds 2 * skip_window ({})",
                self.num_skips,
                2 * self.skip_window
            ));
        }
        if !self.batch_size.is_multiple_of(self.num_skips) {
            return bad(format!(
                "batch_size {} is not a multiple of num_skips {}",
                self.batch_size, self.num_skips
            ));
        }
        if self.embedding_size == 0 {
            return bad("embedding_size must be positive".into());
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!(
                "learning_rate {} must be positive",
                self.learning_rate
            ));
        }
        Ok(())
    }
}

/// Input vectors plus the output-side weights and biases of the loss.
/// Row 0 of the input vectors belongs to out-of-vocabulary tokens and is
/// pinned at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    vocab_rows: usize,
    dim: usize,
    rows: Vec<f32>,
    nce_weights: Vec<f32>,
    nce_biases: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn zeros(vocab_rows: usize, dim: usize) -> Self {
        assert!(vocab_rows >= 1 && dim >= 1);
        Self {
            vocab_rows,
            dim,
            rows: vec![0.0; vocab_rows * dim],
            nce_weights: vec![0.0; vocab_rows * dim],
            nce_biases: vec![0.0; vocab_rows],
        }
    }

    /// Inputs uniform in [-1, 1], output weights normal with standard
    /// deviation 1/sqrt(dim), biases zero.
    pub fn random<R: Rng + ?Sized>(vocab_rows: usize, dim: usize, rng: &mut R) -> Self {
        let mut m = Self::zeros(vocab_rows, dim);
        for v in &mut m.rows[dim..] {
            *v = rng.random_range(-1.0f32..=1.0);
        }
        let normal = Normal::new(0.0f32, 1.0 / (dim as f32).sqrt()).unwrap();
        for v in &mut m.nce_weights {
            *v = normal.sample(rng);
        }
        m
    }

    pub fn vocab_rows(&self) -> usize {
        self.vocab_rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, id: u32) -> &[f32] {
        let i = id as usize * self.dim;
        &self.rows[i..i + self.dim]
    }

    /// Mutable access to a non-OOV row.
    pub fn row_mut(&mut self, id: u32) -> &mut [f32] {
        assert_ne!(id, 0, "row 0 is fixed at zero");
        let i = id as usize * self.dim;
        &mut self.rows[i..i + self.dim]
    }

    pub fn weight(&self, id: u32) -> &[f32] {
        let i = id as usize * self.dim;
        &self.nce_weights[i..i + self.dim]
    }

    pub fn weight_mut(&mut self, id: u32) -> &mut [f32] {
        let i = id as usize * self.dim;
        &mut self.nce_weights[i..i + self.dim]
    }

    pub fn bias(&self, id: u32) -> f32 {
        self.nce_biases[id as usize]
    }

    pub fn bias_mut(&mut self, id: u32) -> &mut f32 {
        &mut self.nce_biases[id as usize]
    }

    pub fn rows(&self) -> &[f32] {
        &self.rows
    }

    pub fn nce_weights(&self) -> &[f32] {
        &self.nce_weights
    }

    pub fn nce_biases(&self) -> &[f32] {
        &self.nce_biases
    }

    pub fn is_finite(&self) -> bool {
        self.rows
            .iter()
            .chain(&self.nce_weights)
            .chain(&self.nce_biases)
            .all(|v| v.is_finite())
    }

    pub fn cosine(&self, a: u32, b: u32) -> f64 {
        let (x, y) = (self.row(a), self.row(b));
        let dot: f64 = x
            .iter()
            .zip(y)
            .map(|(p, q)| f64::from(*p) * f64::from(*q))
            .sum();
        let nx: f64 = x.iter().map(|p| f64::from(*p).powi(2)).sum::<f64>().sqrt();
        let ny: f64 = y.iter().map(|p| f64::from(*p).powi(2)).sum::<f64>().sqrt();
        if nx == 0.0 || ny == 0.0 {
            0.0
        } else {
            dot / (nx * ny)
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::with_capacity(15 + 4 * (2 * self.rows.len() + self.vocab_rows));
        w.bytes(EMB_MAGIC)
            .u32(self.vocab_rows as u32)
            .u32(self.dim as u32)
            .f32_slice(&self.rows)
            .f32_slice(&self.nce_weights)
            .f32_slice(&self.nce_biases);
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "embedding file");
        r.magic(EMB_MAGIC)?;
        let vocab_rows = r.u32()? as usize;
        let dim = r.u32()? as usize;
        if vocab_rows == 0 || dim == 0 {
            return Err(r.error(format!("degenerate shape {vocab_rows} x {dim}")));
        }
        let cells = vocab_rows
            .checked_mul(dim)
            .ok_or_else(|| r.error("shape overflows"))?;
        r.check_fits(cells, 8)?;
        let rows = r.f32_vec(cells)?;
        let nce_weights = r.f32_vec(cells)?;
        let nce_biases = r.f32_vec(vocab_rows)?;
        r.finish()?;
        let m = Self {
            vocab_rows,
            dim,
            rows,
            nce_weights,
            nce_biases,
        };
        if !m.is_finite() {
            return Err(r.error("non-finite parameter"));
        }
        if m.row(0).iter().any(|v| *v != 0.0) {
            return Err(r.error("out-of-vocabulary row is not zero"));
        }
        Ok(m)
    }

    pub(crate) fn rows_mut_raw(&mut self) -> (&mut [f32], &mut [f32], &mut [f32]) {
        (&mut self.rows, &mut self.nce_weights, &mut self.nce_biases)
    }
}

pub fn save_embeddings(m: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &m.to_bytes())
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMatrix> {
    EmbeddingMatrix::from_bytes(&read_file(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn defaults_match_published_settings() {
        let h = EmbeddingHyperparams::default();
        assert_eq!(
            (
                h.batch_size,
                h.skip_window,
                h.num_skips,
                h.embedding_size,
                h.num_negative,
                h.num_steps
            ),
            (128, 1, 2, 128, 64, 100_000)
        );
        h.validate().unwrap();
    }

    #[test]
    fn invalid_hyperparams() {
        let mut h = EmbeddingHyperparams {
            num_skips: 3,
            ..Default::default()
        };
        assert!(h.validate().is_err());
        h.num_skips = 2;
        h.batch_size = 127;
        assert!(h.validate().is_err());
    }

    #[test]
    fn random_init_keeps_oov_row_zero() {
        let m = EmbeddingMatrix::random(10, 4, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(m.row(0).iter().all(|v| *v == 0.0));
        assert!(m.rows()[4..].iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(m.nce_biases().iter().all(|b| *b == 0.0));
    }

    #[test]
    fn matrices_round_trip() {
        let m = EmbeddingMatrix::random(33, 7, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(EmbeddingMatrix::from_bytes(&m.to_bytes()).unwrap(), m);
        let z = EmbeddingMatrix::zeros(3, 2);
        assert_eq!(EmbeddingMatrix::from_bytes(&z.to_bytes()).unwrap(), z);
    }

    #[test]
    fn wrong_magic_and_nonzero_oov_rejected() {
        let mut bytes = EmbeddingMatrix::zeros(2, 2).to_bytes();
        bytes[3] = b'X';
        assert!(matches!(
            EmbeddingMatrix::from_bytes(&bytes),
            Err(Error::Format { .. })
        ));
        let mut bytes = EmbeddingMatrix::zeros(2, 2).to_bytes();
        bytes[15..19].copy_from_slice(&1.0f32.to_le_bytes());
        assert!(EmbeddingMatrix::from_bytes(&bytes).is_err());
    }
}
