//! Packet classification from learned byte n-gram embeddings.
//!
//! The pipeline n-grams the identity-stripped bytes of each captured packet,
//! learns an embedding per frequent n-gram with skip-gram training, averages
//! those embeddings into one feature vector per packet and fits warm-started
//! classifiers over the resulting feature files.

pub mod classify;
mod codec;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod featurize;
pub mod groundtruth;
pub mod packet_io;
pub mod pipeline;
pub mod tokenize;
pub mod translate;
pub mod vocab;

#[cfg(test)]
mod test_util;

pub use classify::{Classifier, GaussianNbModel, RandomForestModel, ScoreVector};
pub use embedding::{EmbeddingHyperparams, EmbeddingMatrix};
pub use error::{Error, Result};
pub use eval::EvaluationCurves;
pub use featurize::FeatureMatrix;
pub use groundtruth::{AttackRecord, LabelVector};
pub use packet_io::{CaptureFile, PacketRecord, Protocol, RawFrame};
pub use tokenize::NGram;
pub use translate::TokenizedCapture;
pub use vocab::Vocabulary;
