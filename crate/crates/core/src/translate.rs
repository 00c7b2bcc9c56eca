//! Captures to integer token streams, plus their on-disk forms.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::codec::{read_file, write_file, ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::packet_io::CaptureFile;
use crate::tokenize::{ngram_count, ngrams, NGram};
use crate::vocab::Vocabulary;

const FLAT_MAGIC: &[u8; 8] = b"P2VFLAT1";
const PACKETS_MAGIC: &[u8; 7] = b"P2VPKT1";

/// A capture as token ids: one flat stream, sliced per packet.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenizedCapture {
    pub source: PathBuf,
    flat: Vec<u32>,
    // packet i spans flat[offsets[i]..offsets[i + 1]]
    offsets: Vec<usize>,
}

impl TokenizedCapture {
    pub fn from_packets<I, P>(source: impl Into<PathBuf>, packets: I) -> Self
    where
        I: IntoIterator<Item = P>,
        P: AsRef<[u32]>,
    {
        let mut flat = Vec::new();
        let mut offsets = vec![0];
        for p in packets {
            flat.extend_from_slice(p.as_ref());
            offsets.push(flat.len());
        }
        Self {
            source: source.into(),
            flat,
            offsets,
        }
    }

    /// The whole capture's ids in packet order.
    pub fn flat(&self) -> &[u32] {
        &self.flat
    }

    pub fn packet_count(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    pub fn packet(&self, i: usize) -> &[u32] {
        &self.flat[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn per_packet(&self) -> impl ExactSizeIterator<Item = &[u32]> + '_ {
        self.offsets.windows(2).map(|w| &self.flat[w[0]..w[1]])
    }

    pub fn max_id(&self) -> Option<u32> {
        self.flat.iter().copied().max()
    }

    pub fn flat_bytes(&self, n: usize) -> Vec<u8> {
        encode_flat(n, &self.flat)
    }

    pub fn packets_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::with_capacity(15 + 4 * (self.flat.len() + self.packet_count()));
        w.bytes(PACKETS_MAGIC).u64(self.packet_count() as u64);
        for p in self.per_packet() {
            w.u32(p.len() as u32).u32_slice(p);
        }
        w.into_inner()
    }

    pub fn from_packets_bytes(bytes: &[u8], source: impl Into<PathBuf>) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "packet token file");
        r.magic(PACKETS_MAGIC)?;
        let count = r.len_prefix_u64(4)?;
        let mut flat = Vec::with_capacity(r.remaining() / 4);
        let mut offsets = Vec::with_capacity(count + 1);
        offsets.push(0);
        for _ in 0..count {
            let len = r.len_prefix_u32(4)?;
            flat.extend(r.u32_vec(len)?);
            offsets.push(flat.len());
        }
        r.finish()?;
        Ok(Self {
            source: source.into(),
            flat,
            offsets,
        })
    }
}

/// The embedding-training view of a capture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatTokens {
    pub n: usize,
    pub ids: Vec<u32>,
}

fn encode_flat(n: usize, ids: &[u32]) -> Vec<u8> {
    let mut w = ByteWriter::with_capacity(20 + 4 * ids.len());
    w.bytes(FLAT_MAGIC)
        .u32(n as u32)
        .u64(ids.len() as u64)
        .u32_slice(ids);
    w.into_inner()
}

impl FlatTokens {
    pub fn to_bytes(&self) -> Vec<u8> {
        encode_flat(self.n, &self.ids)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "flat token file");
        r.magic(FLAT_MAGIC)?;
        let n = r.u32()? as usize;
        if n == 0 {
            return Err(r.error("n-gram length is zero"));
        }
        let count = r.len_prefix_u64(4)?;
        let ids = r.u32_vec(count)?;
        r.finish()?;
        Ok(Self { n, ids })
    }
}

/// Step one of translation: n-gram every packet, in parallel.
pub fn ngram_capture(capture: &CaptureFile, n: usize) -> Vec<Vec<NGram>> {
    capture
        .packets
        .par_iter()
        .map(|p| ngrams(&p.content, n).collect())
        .collect()
}

/// Step two: map pre-computed n-grams to ids.
pub fn translate_ngrams(
    source: impl Into<PathBuf>,
    grams: &[Vec<NGram>],
    vocab: &Vocabulary,
) -> TokenizedCapture {
    let lens = grams.iter().map(Vec::len);
    fill_parallel(source.into(), lens, |i, out| {
        for (slot, g) in out.iter_mut().zip(&grams[i]) {
            *slot = vocab.id(g);
        }
    })
}

/// Translates every packet of `capture`, out-of-vocabulary n-grams to id 0.
pub fn translate_capture(capture: &CaptureFile, vocab: &Vocabulary) -> TokenizedCapture {
    let n = vocab.n();
    let lens = capture
        .packets
        .iter()
        .map(|p| ngram_count(p.content.len(), n));
    fill_parallel(capture.path.clone(), lens, |i, out| {
        for (slot, g) in out.iter_mut().zip(ngrams(&capture.packets[i].content, n)) {
            *slot = vocab.id(&g);
        }
    })
}

/// Lays out one flat buffer from per-packet lengths and lets workers fill
/// disjoint per-packet slices.
fn fill_parallel<F>(source: PathBuf, lens: impl Iterator<Item = usize>, fill: F) -> TokenizedCapture
where
    F: Fn(usize, &mut [u32]) + Sync,
{
    let mut offsets = vec![0usize];
    for len in lens {
        offsets.push(offsets.last().unwrap() + len);
    }
    let mut flat = vec![0u32; *offsets.last().unwrap()];
    let mut slices = Vec::with_capacity(offsets.len() - 1);
    let mut rest = flat.as_mut_slice();
    for w in offsets.windows(2) {
        let (head, tail) = rest.split_at_mut(w[1] - w[0]);
        slices.push(head);
        rest = tail;
    }
    slices
        .into_par_iter()
        .enumerate()
        .for_each(|(i, out)| fill(i, out));
    TokenizedCapture {
        source,
        flat,
        offsets,
    }
}

pub fn save_tokens(
    tokens: &TokenizedCapture,
    n: usize,
    flat_path: impl AsRef<Path>,
    packets_path: impl AsRef<Path>,
) -> Result<()> {
    write_file(flat_path.as_ref(), &tokens.flat_bytes(n))?;
    write_file(packets_path.as_ref(), &tokens.packets_bytes())
}

pub fn load_flat(path: impl AsRef<Path>) -> Result<FlatTokens> {
    FlatTokens::from_bytes(&read_file(path.as_ref())?)
}

pub fn load_packets(path: impl AsRef<Path>) -> Result<TokenizedCapture> {
    let path = path.as_ref();
    TokenizedCapture::from_packets_bytes(&read_file(path)?, path)
}

/// Fails unless every id is addressable in a table of `rows` entries.
pub fn check_id_range(tokens: &TokenizedCapture, rows: usize) -> Result<()> {
    match tokens.max_id() {
        Some(id) if id as usize >= rows => Err(Error::Consistency(format!(
            "token id {id} out of range for {rows} embedding rows"
        ))),
        _ => Ok(()),
    }
}
