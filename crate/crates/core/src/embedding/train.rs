use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    generate_batch, nce_loss_and_grad, EmbeddingHyperparams, EmbeddingMatrix, LogUniformSampler,
};
use crate::error::{Error, Result};
use crate::translate::load_flat;
use crate::vocab::Vocabulary;

/// Loss summary for one training file.
#[derive(Debug, Clone, PartialEq)]
pub struct FileLoss {
    pub source: String,
    pub steps: usize,
    pub first_loss: f64,
    pub last_loss: f64,
}

/// Owns the matrix and RNG across files so that each file resumes where the
/// previous one stopped.
#[derive(Debug, Clone)]
pub struct EmbeddingTrainer {
    h: EmbeddingHyperparams,
    matrix: EmbeddingMatrix,
    sampler: LogUniformSampler,
    rng: ChaCha8Rng,
    history: Vec<FileLoss>,
}

impl EmbeddingTrainer {
    /// Starts from a seeded random matrix with `vocab_rows` rows.
    pub fn fresh(h: EmbeddingHyperparams, vocab_rows: usize) -> Result<Self> {
        h.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(h.seed);
        let matrix = EmbeddingMatrix::random(vocab_rows, h.embedding_size, &mut rng);
        Self::with_rng(h, matrix, rng)
    }

    /// Resumes from an existing matrix.
    pub fn resume(h: EmbeddingHyperparams, matrix: EmbeddingMatrix) -> Result<Self> {
        h.validate()?;
        if matrix.dim() != h.embedding_size {
            return Err(Error::Consistency(format!(
                "initial matrix has {} columns, embedding_size is {}",
                matrix.dim(),
                h.embedding_size
            )));
        }
        let rng = ChaCha8Rng::seed_from_u64(h.seed);
        Self::with_rng(h, matrix, rng)
    }

    fn with_rng(h: EmbeddingHyperparams, matrix: EmbeddingMatrix, rng: ChaCha8Rng) -> Result<Self> {
        let max_id = u32::try_from(matrix.vocab_rows() - 1)
            .map_err(|_| Error::InvalidParameter("vocabulary too large".into()))?;
        let sampler = LogUniformSampler::new(max_id)?;
        Ok(Self {
            h,
            matrix,
            sampler,
            rng,
            history: Vec::new(),
        })
    }

    pub fn matrix(&self) -> &EmbeddingMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> EmbeddingMatrix {
        self.matrix
    }

    pub fn history(&self) -> &[FileLoss] {
        &self.history
    }

    /// Runs `num_steps` SGD steps over `stream`; returns the per-step losses.
    pub fn train_stream(&mut self, stream: &[u32], source: &str) -> Result<Vec<f64>> {
        let rows = self.matrix.vocab_rows();
        if let Some(bad) = stream.iter().find(|id| **id as usize >= rows) {
            return Err(Error::Consistency(format!(
                "{source}: token id {bad} out of range for {rows} embedding rows"
            )));
        }
        let mut cursor = 0;
        let mut negatives = Vec::with_capacity(self.h.num_negative);
        let mut losses = Vec::with_capacity(self.h.num_steps);
        for step in 0..self.h.num_steps {
            let (batch, next) =
                generate_batch(stream, cursor, &self.h, &mut self.rng).map_err(|e| match e {
                    Error::NoTrainableWindows(why) => {
                        Error::NoTrainableWindows(format!("{source}: {why}"))
                    }
                    other => other,
                })?;
            cursor = next;
            self.sampler
                .sample_into(&mut self.rng, &mut negatives, self.h.num_negative);
            let (loss, grads) = nce_loss_and_grad(&batch, &negatives, &self.matrix)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    file: source.to_string(),
                    step,
                    loss,
                });
            }
            grads.apply(&mut self.matrix, self.h.learning_rate);
            losses.push(loss);
        }
        if !self.matrix.is_finite() {
            return Err(Error::Divergence {
                file: source.to_string(),
                step: self.h.num_steps,
                loss: f64::NAN,
            });
        }
        self.history.push(FileLoss {
            source: source.to_string(),
            steps: losses.len(),
            first_loss: losses.first().copied().unwrap_or(0.0),
            last_loss: losses.last().copied().unwrap_or(0.0),
        });
        Ok(losses)
    }

    pub fn train_file(&mut self, path: &Path, vocab: &Vocabulary) -> Result<Vec<f64>> {
        let flat = load_flat(path)?;
        if flat.n != vocab.n() {
            return Err(Error::Consistency(format!(
                "{} was tokenized with n = {}, dictionary uses n = {}",
                path.display(),
                flat.n,
                vocab.n()
            )));
        }
        self.train_stream(&flat.ids, &path.display().to_string())
    }
}

/// Trains over `flat_files` in order, each file warm-starting from the
/// matrix the previous file produced.
pub fn train_embeddings<P: AsRef<Path>>(
    flat_files: &[P],
    vocab: &Vocabulary,
    h: &EmbeddingHyperparams,
    initial: Option<EmbeddingMatrix>,
) -> Result<EmbeddingMatrix> {
    let mut trainer = match initial {
        Some(m) => {
            if m.vocab_rows() != vocab.embedding_rows() {
                return Err(Error::Consistency(format!(
                    "initial matrix has {} rows, dictionary needs {}",
                    m.vocab_rows(),
                    vocab.embedding_rows()
                )));
            }
            EmbeddingTrainer::resume(h.clone(), m)?
        }
        None => EmbeddingTrainer::fresh(h.clone(), vocab.embedding_rows())?,
    };
    for path in flat_files {
        let path: PathBuf = path.as_ref().into();
        trainer.train_file(&path, vocab)?;
    }
    Ok(trainer.into_matrix())
}
