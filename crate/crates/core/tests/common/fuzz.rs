use std::panic::{catch_unwind, AssertUnwindSafe};

use packet2vec::classify::{
    model_from_bytes, model_to_bytes, Classifier, ClassifierKind, ForestParams,
};
use packet2vec::packet_io::{encode_capture, parse_capture, Endianness, PCAP_MAGIC};
use packet2vec::translate::FlatTokens;
use packet2vec::vocab::{build_vocabulary, count_ngrams};
use packet2vec::{
    EmbeddingMatrix, Error, FeatureMatrix, LabelVector, TokenizedCapture, Vocabulary,
};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{ensure, random_ipv4_capture, random_raw_capture, run_cases, Check};

type Roundtrip = fn(&[u8]) -> packet2vec::Result<Vec<u8>>;

/// A binary artifact format: how to make a valid instance and how to parse
/// and re-encode one.
pub struct Format {
    pub name: &'static str,
    pub magic_len: usize,
    /// Whether a truncated file may still parse, as a shorter valid file.
    pub prefix_valid: bool,
    pub generate: fn(&mut ChaCha8Rng) -> Vec<u8>,
    pub roundtrip: Roundtrip,
}

fn guarded(f: Roundtrip, bytes: &[u8]) -> Result<packet2vec::Result<Vec<u8>>, String> {
    catch_unwind(AssertUnwindSafe(|| f(bytes)))
        .map_err(|_| format!("panicked on {} bytes", bytes.len()))
}

/// Round trip, then one truncation, one random mutation and one magic
/// mutation per instance.
pub fn fuzz_format(f: &Format, instances: usize, seed: u64) -> Check {
    run_cases(instances, seed, |r| {
        let bytes = (f.generate)(r);
        let back =
            guarded(f.roundtrip, &bytes)?.map_err(|e| format!("valid input rejected: {e}"))?;
        ensure(back == bytes, || "round trip changed the bytes".into())?;

        let cut = r.random_range(0..bytes.len());
        match guarded(f.roundtrip, &bytes[..cut])? {
            Err(_) => {}
            Ok(b) if f.prefix_valid => ensure(b == bytes[..cut], || {
                format!("truncation at {cut} parsed to different content")
            })?,
            Ok(_) => return Err(format!("truncation at {cut} of {} accepted", bytes.len())),
        }

        let mut mutated = bytes.clone();
        for _ in 0..r.random_range(1..=4) {
            let i = r.random_range(0..mutated.len());
            mutated[i] = r.random();
        }
        guarded(f.roundtrip, &mutated)?.ok();

        let mut bad_magic = bytes.clone();
        bad_magic[r.random_range(0..f.magic_len)] ^= 1 << r.random_range(0..8);
        ensure(
            matches!(guarded(f.roundtrip, &bad_magic)?, Err(Error::Format { .. })),
            || "bad magic accepted".into(),
        )
    })
}

fn gen_pcap(r: &mut ChaCha8Rng) -> Vec<u8> {
    let cap = if r.random_bool(0.5) {
        {
            let k = r.random_range(1..12);
            random_ipv4_capture(r, k, 40)
        }
    } else {
        {
            let k = r.random_range(1..12);
            random_raw_capture(r, k, 60)
        }
    };
    let frames: Vec<_> = cap.packets.iter().map(|p| p.to_raw_frame()).collect();
    let endian = if r.random_bool(0.5) {
        Endianness::Little
    } else {
        Endianness::Big
    };
    encode_capture(&frames, endian).unwrap()
}

fn rt_pcap(b: &[u8]) -> packet2vec::Result<Vec<u8>> {
    let cap = parse_capture(b, "fuzz.pcap")?;
    let endian = if b[..4] == PCAP_MAGIC.to_le_bytes() {
        Endianness::Little
    } else {
        Endianness::Big
    };
    let frames: Vec<_> = cap.packets.iter().map(|p| p.to_raw_frame()).collect();
    encode_capture(&frames, endian)
}

fn gen_dictionary(r: &mut ChaCha8Rng) -> Vec<u8> {
    let caps: Vec<_> = (0..2).map(|_| random_ipv4_capture(r, 5, 30)).collect();
    let n = r.random_range(1..=4);
    build_vocabulary(&count_ngrams(&caps, n), r.random_range(1..50))
        .unwrap()
        .to_bytes()
}

fn rt_dictionary(b: &[u8]) -> packet2vec::Result<Vec<u8>> {
    Vocabulary::from_bytes(b).map(|v| v.to_bytes())
}

fn gen_flat(r: &mut ChaCha8Rng) -> Vec<u8> {
    FlatTokens {
        n: r.random_range(1..=8),
        ids: (0..r.random_range(0..200))
            .map(|_| r.random_range(0..1000))
            .collect(),
    }
    .to_bytes()
}

fn rt_flat(b: &[u8]) -> packet2vec::Result<Vec<u8>> {
    FlatTokens::from_bytes(b).map(|t| t.to_bytes())
}

fn gen_packets(r: &mut ChaCha8Rng) -> Vec<u8> {
    let packets: Vec<Vec<u32>> = (0..r.random_range(0..10))
        .map(|_| {
            (0..r.random_range(0..30))
                .map(|_| r.random_range(0..500))
                .collect()
        })
        .collect();
    TokenizedCapture::from_packets("fuzz", packets).packets_bytes()
}

fn rt_packets(b: &[u8]) -> packet2vec::Result<Vec<u8>> {
    TokenizedCapture::from_packets_bytes(b, "fuzz").map(|t| t.packets_bytes())
}

fn gen_embedding(r: &mut ChaCha8Rng) -> Vec<u8> {
    let (rows, dim) = (r.random_range(1..30), r.random_range(1..12));
    EmbeddingMatrix::random(rows, dim, r).to_bytes()
}

fn rt_embedding(b: &[u8]) -> packet2vec::Result<Vec<u8>> {
    EmbeddingMatrix::from_bytes(b).map(|m| m.to_bytes())
}

fn random_features(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> FeatureMatrix {
    let data = (0..rows * cols)
        .map(|_| r.random_range(-1.0..1.0))
        .collect();
    FeatureMatrix::new("fuzz", rows, cols, data).unwrap()
}

fn gen_features(r: &mut ChaCha8Rng) -> Vec<u8> {
    let (rows, cols) = (r.random_range(0..20), r.random_range(1..10));
    random_features(r, rows, cols).to_bytes()
}

fn rt_features(b: &[u8]) -> packet2vec::Result<Vec<u8>> {
    FeatureMatrix::from_bytes(b, "fuzz").map(|x| x.to_bytes())
}

fn gen_model(r: &mut ChaCha8Rng) -> Vec<u8> {
    let kind = if r.random_bool(0.5) {
        ClassifierKind::RandomForest
    } else {
        ClassifierKind::GaussianNb
    };
    let params = ForestParams {
        n_est_per_file: r.random_range(1..4),
        max_depth: r.random_bool(0.5).then(|| r.random_range(1..5)),
        seed: r.random(),
        ..ForestParams::default()
    };
    let mut model = Classifier::new(kind, params).unwrap();
    let cols = r.random_range(1..5);
    for _ in 0..r.random_range(1..3) {
        let rows = r.random_range(2..30);
        let x = random_features(r, rows, cols);
        let mut y: Vec<u8> = (0..rows).map(|_| u8::from(r.random_bool(0.3))).collect();
        y[0] = 1;
        y[1] = 0;
        model
            .fit_file(&x, &LabelVector::new("fuzz", y).unwrap())
            .unwrap();
    }
    model_to_bytes(&model)
}

fn rt_model(b: &[u8]) -> packet2vec::Result<Vec<u8>> {
    model_from_bytes(b).map(|m| model_to_bytes(&m))
}

pub const FORMATS: [Format; 7] = [
    Format {
        name: "pcap",
        magic_len: 4,
        prefix_valid: true,
        generate: gen_pcap,
        roundtrip: rt_pcap,
    },
    Format {
        name: "dictionary",
        magic_len: 8,
        prefix_valid: false,
        generate: gen_dictionary,
        roundtrip: rt_dictionary,
    },
    Format {
        name: "flat tokens",
        magic_len: 8,
        prefix_valid: false,
        generate: gen_flat,
        roundtrip: rt_flat,
    },
    Format {
        name: "packet tokens",
        magic_len: 7,
        prefix_valid: false,
        generate: gen_packets,
        roundtrip: rt_packets,
    },
    Format {
        name: "embeddings",
        magic_len: 7,
        prefix_valid: false,
        generate: gen_embedding,
        roundtrip: rt_embedding,
    },
    Format {
        name: "features",
        magic_len: 8,
        prefix_valid: false,
        generate: gen_features,
        roundtrip: rt_features,
    },
    Format {
        name: "model",
        magic_len: 8,
        prefix_valid: false,
        generate: gen_model,
        roundtrip: rt_model,
    },
];

/// The label format has no header, so a truncation can parse as a shorter
/// file. That file is caught by the row-count check against its features.
pub fn fuzz_labels(instances: usize, seed: u64) -> Check {
    run_cases(instances, seed, |r| {
        let len = r.random_range(1..60);
        let y: Vec<u8> = (0..len).map(|_| u8::from(r.random_bool(0.3))).collect();
        let labels = LabelVector::new("l", y.clone()).unwrap();
        let text = labels.to_text();
        let back = LabelVector::from_text(&text, "l").map_err(|e| e.to_string())?;
        ensure(back.labels() == y.as_slice(), || {
            "round trip changed labels".into()
        })?;

        let cut = r.random_range(0..text.len());
        let x = random_features(r, len, 3);
        if let Ok(short) = LabelVector::from_text(&text[..cut], "l") {
            ensure(y.starts_with(short.labels()), || {
                "truncation is not a prefix".into()
            })?;
            if short.len() < len {
                let mut m =
                    Classifier::new(ClassifierKind::GaussianNb, ForestParams::default()).unwrap();
                ensure(
                    matches!(m.fit_file(&x, &short), Err(Error::Dimension(_))),
                    || "short label file not rejected by the classifier".into(),
                )?;
            }
        }

        let mut bytes = text.into_bytes();
        let line = r.random_range(0..len);
        bytes[2 * line] = [b'2', b'x', b' ', b'-', 0xff][r.random_range(0..5)];
        let mutated = String::from_utf8_lossy(&bytes);
        ensure(
            matches!(
                LabelVector::from_text(&mutated, "l"),
                Err(Error::Format { .. })
            ),
            || format!("non-binary line {line} accepted"),
        )
    })
}
