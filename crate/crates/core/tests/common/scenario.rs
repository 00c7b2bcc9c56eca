use std::path::{Path, PathBuf};

use packet2vec::classify::ClassifierKind;
use packet2vec::eval::evaluate;
use packet2vec::groundtruth::label_capture;
use packet2vec::packet_io::read_capture;
use packet2vec::pipeline::training::{
    build_dictionary, featurize_files, fit_classifier_files, label_files, train_embedding_files,
    translate_files, FitSummary,
};
use packet2vec::pipeline::{
    capture_stems, generate_synthetic_corpus, run_inference, PipelineConfig, Split, SynthCorpus,
    SynthSpec,
};
use packet2vec::{
    Classifier, EmbeddingMatrix, EvaluationCurves, LabelVector, ScoreVector, Vocabulary,
};

/// A corpus with the training half already embedded, featurized and labelled.
pub struct Prepared {
    pub cfg: PipelineConfig,
    pub corpus: SynthCorpus,
    pub train_stems: Vec<String>,
    pub test: Vec<PathBuf>,
    pub vocab: Vocabulary,
    pub embeddings: EmbeddingMatrix,
}

pub fn prepare(dir: &Path, spec: &SynthSpec, mut cfg: PipelineConfig) -> Prepared {
    let corpus = generate_synthetic_corpus(spec, dir.join("captures")).unwrap();
    cfg.work_dir = dir.join("work");
    let train = Split::Even.select(&corpus.captures);
    let test = Split::Odd.select(&corpus.captures);
    let train_stems = capture_stems(&train).unwrap();
    let vocab = build_dictionary(&cfg, &train).unwrap();
    let flats = translate_files(&cfg, &vocab, &train).unwrap();
    let (embeddings, _) = train_embedding_files(&cfg, &vocab, &flats, None).unwrap();
    featurize_files(&cfg, &embeddings, &train_stems).unwrap();
    label_files(&cfg, &train, &corpus.records).unwrap();
    Prepared {
        cfg,
        corpus,
        train_stems,
        test,
        vocab,
        embeddings,
    }
}

pub struct Outcome {
    pub model: Classifier,
    pub fit: FitSummary,
    /// Scores and labels over every test capture, concatenated in order.
    pub scores: ScoreVector,
    pub labels: LabelVector,
    pub curves: EvaluationCurves,
}

pub fn fit_and_score(p: &Prepared, kind: ClassifierKind, workers: usize) -> Outcome {
    let mut cfg = p.cfg.clone();
    cfg.classifier = kind;
    let (model, fit) = fit_classifier_files(&cfg, &p.train_stems).unwrap();
    let scores = score_test(p, &model, workers);
    let mut y = Vec::new();
    for path in &p.test {
        let cap = read_capture(path).unwrap();
        y.extend_from_slice(label_capture(&cap, &p.corpus.records).labels());
    }
    let labels = LabelVector::new("test", y).unwrap();
    let curves = evaluate(&scores, &labels, &cfg.thresholds).unwrap();
    Outcome {
        model,
        fit,
        scores,
        labels,
        curves,
    }
}

pub fn score_test(p: &Prepared, model: &Classifier, workers: usize) -> ScoreVector {
    let mut all = Vec::new();
    for path in &p.test {
        let (s, _) = run_inference(&p.vocab, &p.embeddings, model, path, workers).unwrap();
        all.extend(s.into_inner());
    }
    ScoreVector::new(all)
}
