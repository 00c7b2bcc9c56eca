//! The five training phases. Each phase reads its inputs from disk and
//! persists its outputs, so any phase can be rerun from its predecessors.
//! Captures are loaded one at a time.

use std::path::{Path, PathBuf};

use super::{capture_stems, with_workers, PipelineConfig};
use crate::classify::Classifier;
use crate::embedding::{
    load_embeddings, save_embeddings, EmbeddingMatrix, EmbeddingTrainer, FileLoss,
};
use crate::error::{Error, Result};
use crate::featurize::{featurize_capture, load_features, save_features};
use crate::groundtruth::{
    label_capture, load_attack_records, load_labels, save_labels, AttackRecord,
};
use crate::packet_io::read_capture;
use crate::translate::{load_flat, load_packets, save_tokens, translate_capture};
use crate::vocab::{build_vocabulary, load_vocabulary, save_vocabulary, NGramCounts, Vocabulary};

pub const PHASE_VOCAB: &str = "build-vocab";
pub const PHASE_TRANSLATE: &str = "translate";
pub const PHASE_EMBED: &str = "train-embeddings";
pub const PHASE_FEATURIZE: &str = "featurize";
pub const PHASE_LABEL: &str = "label";
pub const PHASE_TRAIN: &str = "train";

fn show(p: &Path) -> String {
    p.display().to_string()
}

/// Phase 1: count n-grams over every capture and keep the top `vocab_size`.
pub fn build_dictionary<P: AsRef<Path> + Sync>(
    cfg: &PipelineConfig,
    captures: &[P],
) -> Result<Vocabulary> {
    cfg.validate()?;
    let out = cfg.layout().dictionary();
    with_workers(cfg.workers, || {
        let mut counts = NGramCounts::new(cfg.n);
        for p in captures {
            let p = p.as_ref();
            let cap = read_capture(p).map_err(|e| e.in_phase(PHASE_VOCAB, show(p)))?;
            counts.add_capture(&cap);
        }
        let vocab = build_vocabulary(&counts, cfg.vocab_size)
            .map_err(|e| e.in_phase(PHASE_VOCAB, "<corpus>"))?;
        save_vocabulary(&vocab, &out).map_err(|e| e.in_phase(PHASE_VOCAB, show(&out)))?;
        Ok(vocab)
    })?
}

/// Phase 2: per capture, write the flat stream and the per-packet tokens.
/// Returns the flat-stream paths in capture order.
pub fn translate_files<P: AsRef<Path> + Sync>(
    cfg: &PipelineConfig,
    vocab: &Vocabulary,
    captures: &[P],
) -> Result<Vec<PathBuf>> {
    let stems = capture_stems(captures)?;
    let layout = cfg.layout();
    with_workers(cfg.workers, || {
        let mut flats = Vec::with_capacity(captures.len());
        for (p, stem) in captures.iter().zip(&stems) {
            let p = p.as_ref();
            let tag = |e: Error| e.in_phase(PHASE_TRANSLATE, show(p));
            let cap = read_capture(p).map_err(tag)?;
            let tokens = translate_capture(&cap, vocab);
            drop(cap);
            let flat = layout.flat_tokens(stem);
            save_tokens(&tokens, vocab.n(), &flat, layout.packet_tokens(stem)).map_err(tag)?;
            flats.push(flat);
        }
        Ok(flats)
    })?
}

/// Phase 3: train over the flat streams in order, each file resuming from
/// the previous file's matrix.
pub fn train_embedding_files<P: AsRef<Path>>(
    cfg: &PipelineConfig,
    vocab: &Vocabulary,
    flats: &[P],
    initial: Option<EmbeddingMatrix>,
) -> Result<(EmbeddingMatrix, Vec<FileLoss>)> {
    let mut trainer = match initial {
        Some(m) => {
            if m.vocab_rows() != vocab.embedding_rows() {
                return Err(Error::Consistency(format!(
                    "initial matrix has {} rows, dictionary needs {}",
                    m.vocab_rows(),
                    vocab.embedding_rows()
                ))
                .in_phase(PHASE_EMBED, "<initial>"));
            }
            EmbeddingTrainer::resume(cfg.embedding.clone(), m)
        }
        None => EmbeddingTrainer::fresh(cfg.embedding.clone(), vocab.embedding_rows()),
    }
    .map_err(|e| e.in_phase(PHASE_EMBED, "<config>"))?;
    for p in flats {
        let p = p.as_ref();
        trainer
            .train_file(p, vocab)
            .map_err(|e| e.in_phase(PHASE_EMBED, show(p)))?;
    }
    let history = trainer.history().to_vec();
    let m = trainer.into_matrix();
    let out = cfg.layout().embeddings();
    save_embeddings(&m, &out).map_err(|e| e.in_phase(PHASE_EMBED, show(&out)))?;
    Ok((m, history))
}

/// Phase 4: one feature matrix per capture from its per-packet tokens.
pub fn featurize_files(
    cfg: &PipelineConfig,
    embeddings: &EmbeddingMatrix,
    stems: &[String],
) -> Result<Vec<PathBuf>> {
    let layout = cfg.layout();
    with_workers(cfg.workers, || {
        stems
            .iter()
            .map(|stem| {
                let src = layout.packet_tokens(stem);
                let tag = |e: Error| e.in_phase(PHASE_FEATURIZE, show(&src));
                let tokens = load_packets(&src).map_err(tag)?;
                let x = featurize_capture(&tokens, embeddings).map_err(tag)?;
                let out = layout.features(stem);
                save_features(&x, &out).map_err(tag)?;
                Ok(out)
            })
            .collect()
    })?
}

/// Labels each capture against the attack records.
pub fn label_files<P: AsRef<Path> + Sync>(
    cfg: &PipelineConfig,
    captures: &[P],
    records: &[AttackRecord],
) -> Result<Vec<PathBuf>> {
    let stems = capture_stems(captures)?;
    let layout = cfg.layout();
    with_workers(cfg.workers, || {
        captures
            .iter()
            .zip(&stems)
            .map(|(p, stem)| {
                let p = p.as_ref();
                let tag = |e: Error| e.in_phase(PHASE_LABEL, show(p));
                let cap = read_capture(p).map_err(tag)?;
                let labels = label_capture(&cap, records);
                let out = layout.labels(stem);
                save_labels(&labels, &out).map_err(tag)?;
                Ok(out)
            })
            .collect()
    })?
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub files: usize,
    pub positive_files: usize,
    /// Files that changed the model.
    pub fitted_files: usize,
}

/// Phase 5: warm-start the classifier over the files in order. Fails if no
/// file contained a malicious packet.
pub fn fit_classifier_files(
    cfg: &PipelineConfig,
    stems: &[String],
) -> Result<(Classifier, FitSummary)> {
    let layout = cfg.layout();
    let mut model = Classifier::new(cfg.classifier, cfg.forest)
        .map_err(|e| e.in_phase(PHASE_TRAIN, "<config>"))?;
    let mut summary = FitSummary {
        files: stems.len(),
        positive_files: 0,
        fitted_files: 0,
    };
    with_workers(cfg.workers, || -> Result<()> {
        for stem in stems {
            let xp = layout.features(stem);
            let x = load_features(&xp).map_err(|e| e.in_phase(PHASE_TRAIN, show(&xp)))?;
            let yp = layout.labels(stem);
            let y = load_labels(&yp).map_err(|e| e.in_phase(PHASE_TRAIN, show(&yp)))?;
            if y.has_positive() {
                summary.positive_files += 1;
            }
            if model
                .fit_file(&x, &y)
                .map_err(|e| e.in_phase(PHASE_TRAIN, show(&xp)))?
            {
                summary.fitted_files += 1;
            }
        }
        Ok(())
    })??;
    if summary.positive_files == 0 {
        return Err(
            Error::NotFitted("no training file contains a malicious packet".into())
                .in_phase(PHASE_TRAIN, "<corpus>"),
        );
    }
    let out = layout.model(cfg.classifier);
    model
        .save(&out)
        .map_err(|e| e.in_phase(PHASE_TRAIN, show(&out)))?;
    Ok((model, summary))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    pub vocab_len: usize,
    pub losses: Vec<FileLoss>,
    pub fit: FitSummary,
    /// Tree count for forests.
    pub trees: Option<usize>,
    pub model_path: PathBuf,
}

/// All phases in order over `captures`, labelled from `attack_csv`.
pub fn run_training<P: AsRef<Path> + Sync>(
    cfg: &PipelineConfig,
    captures: &[P],
    attack_csv: &Path,
) -> Result<TrainingReport> {
    cfg.validate()?;
    let stems = capture_stems(captures)?;
    let records =
        load_attack_records(attack_csv).map_err(|e| e.in_phase(PHASE_LABEL, show(attack_csv)))?;
    let vocab = build_dictionary(cfg, captures)?;
    let flats = translate_files(cfg, &vocab, captures)?;
    let (embeddings, losses) = train_embedding_files(cfg, &vocab, &flats, None)?;
    featurize_files(cfg, &embeddings, &stems)?;
    label_files(cfg, captures, &records)?;
    let (model, fit) = fit_classifier_files(cfg, &stems)?;
    Ok(TrainingReport {
        vocab_len: vocab.len(),
        losses,
        fit,
        trees: match &model {
            Classifier::RandomForest(m) => Some(m.trees().len()),
            Classifier::GaussianNb(_) => None,
        },
        model_path: cfg.layout().model(cfg.classifier),
    })
}

/// Reloads the persisted dictionary and embeddings, checking they agree.
pub fn load_trained(cfg: &PipelineConfig) -> Result<(Vocabulary, EmbeddingMatrix)> {
    let layout = cfg.layout();
    let vocab = load_vocabulary(layout.dictionary())?;
    let emb = load_embeddings(layout.embeddings())?;
    if emb.vocab_rows() != vocab.embedding_rows() {
        return Err(Error::Consistency(format!(
            "embeddings have {} rows, dictionary needs {}",
            emb.vocab_rows(),
            vocab.embedding_rows()
        )));
    }
    Ok((vocab, emb))
}

/// Flat-stream paths for the given stems, checking each loads.
pub fn flat_paths(cfg: &PipelineConfig, stems: &[String]) -> Result<Vec<PathBuf>> {
    let layout = cfg.layout();
    stems
        .iter()
        .map(|s| {
            let p = layout.flat_tokens(s);
            load_flat(&p).map(|_| p)
        })
        .collect()
}
