mod common;

use common::scenario::{fit_and_score, prepare, score_test};
use packet2vec::classify::ClassifierKind;
use packet2vec::embedding::load_embeddings;
use packet2vec::pipeline::{PipelineConfig, SynthSpec};

fn small_spec() -> SynthSpec {
    SynthSpec {
        files: 4,
        packets_per_file: 800,
        malicious_fraction: 0.02,
        seed: 11,
        ..SynthSpec::default()
    }
}

fn small_config(workers: usize) -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.apply_overrides(&[
        "num_steps=300",
        "embedding_size=16",
        "num_negative=16",
        "seed=11",
    ])
    .unwrap();
    cfg.workers = workers;
    cfg
}

#[test]
fn scores_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let p = prepare(dir.path(), &small_spec(), small_config(2));
    for kind in [ClassifierKind::RandomForest, ClassifierKind::GaussianNb] {
        let o = fit_and_score(&p, kind, 1);
        for w in [4, 8] {
            assert_eq!(
                score_test(&p, &o.model, w),
                o.scores,
                "{kind} with {w} workers"
            );
        }
    }
}

#[test]
fn training_artifacts_do_not_depend_on_worker_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let pa = prepare(a.path(), &small_spec(), small_config(1));
    let pb = prepare(b.path(), &small_spec(), small_config(8));
    assert_eq!(pa.vocab, pb.vocab);
    assert_eq!(
        load_embeddings(pa.cfg.layout().embeddings()).unwrap(),
        load_embeddings(pb.cfg.layout().embeddings()).unwrap()
    );
    let ma = fit_and_score(&pa, ClassifierKind::RandomForest, 1).model;
    let mb = fit_and_score(&pb, ClassifierKind::RandomForest, 1).model;
    let kind = ClassifierKind::RandomForest;
    assert_eq!(
        std::fs::read(pa.cfg.layout().model(kind)).unwrap(),
        std::fs::read(pb.cfg.layout().model(kind)).unwrap()
    );
    assert_eq!(ma.n_features(), mb.n_features());
}

#[test]
fn different_seeds_give_different_forests() {
    let dir = tempfile::tempdir().unwrap();
    let p = prepare(dir.path(), &small_spec(), small_config(1));
    let a = fit_and_score(&p, ClassifierKind::RandomForest, 1);
    let mut q = prepare(&dir.path().join("other"), &small_spec(), small_config(1));
    q.cfg.forest.seed = 12;
    let b = fit_and_score(&q, ClassifierKind::RandomForest, 1);
    assert_ne!(a.scores, b.scores);
}
