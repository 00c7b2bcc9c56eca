//! Synthetic fixtures for the benchmarks.

use packet2vec::embedding::EmbeddingMatrix;
use packet2vec::packet_io::parse_capture;
use packet2vec::pipeline::{generate_synthetic_corpus, SynthSpec};
use packet2vec::vocab::{build_vocabulary, count_ngrams};
use packet2vec::{CaptureFile, Vocabulary};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub struct Fixture {
    pub capture: CaptureFile,
    pub capture_bytes: Vec<u8>,
    pub vocab: Vocabulary,
    pub embeddings: EmbeddingMatrix,
}

/// One synthetic capture of `packets` packets with its dictionary and a
/// random embedding matrix of width `dim`.
pub fn fixture(packets: usize, dim: usize) -> Fixture {
    let dir = std::env::temp_dir().join(format!("packet2vec-bench-{}", std::process::id()));
    let spec = SynthSpec {
        files: 1,
        packets_per_file: packets,
        malicious_fraction: 0.01,
        ..SynthSpec::default()
    };
    let corpus = generate_synthetic_corpus(&spec, &dir).expect("synthetic corpus");
    let capture_bytes = std::fs::read(&corpus.captures[0]).expect("read capture");
    let _ = std::fs::remove_dir_all(&dir);
    let capture = parse_capture(&capture_bytes, "bench.pcap").expect("parse capture");
    let vocab = build_vocabulary(&count_ngrams([&capture], 2), 65536).expect("vocabulary");
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let embeddings = EmbeddingMatrix::random(vocab.embedding_rows(), dim, &mut rng);
    Fixture {
        capture,
        capture_bytes,
        vocab,
        embeddings,
    }
}
