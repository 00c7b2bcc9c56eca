//! Frequency-ranked n-gram dictionary.

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;

use crate::codec::{read_file, write_file, ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::packet_io::CaptureFile;
use crate::tokenize::{check_ngram_len, ngram_count, ngrams, NGram};

/// Id shared by every n-gram outside the vocabulary.
pub const OOV_ID: u32 = 0;

pub const DEFAULT_VOCAB_SIZE: usize = 65536;

const DICT_MAGIC: &[u8; 8] = b"P2VDICT1";
const DICT_FORMAT: &str = "dictionary file";

/// Corpus-wide n-gram occurrence counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramCounts {
    n: usize,
    counts: HashMap<NGram, u64>,
}

impl NGramCounts {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            counts: HashMap::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn add_content(&mut self, content: &[u8]) {
        for g in ngrams(content, self.n) {
            *self.counts.entry(g).or_insert(0) += 1;
        }
    }

    /// Counts one capture, splitting its packets over the current rayon pool.
    pub fn add_capture(&mut self, capture: &CaptureFile) {
        let n = self.n;
        let partial = capture
            .packets
            .par_iter()
            .fold(
                || NGramCounts::new(n),
                |mut acc, p| {
                    acc.add_content(&p.content);
                    acc
                },
            )
            .reduce(|| NGramCounts::new(n), NGramCounts::merged);
        self.merge(partial);
    }

    pub fn merge(&mut self, other: NGramCounts) {
        debug_assert_eq!(self.n, other.n);
        if self.counts.len() < other.counts.len() {
            let mine = std::mem::replace(&mut self.counts, other.counts);
            for (k, v) in mine {
                *self.counts.entry(k).or_insert(0) += v;
            }
        } else {
            for (k, v) in other.counts {
                *self.counts.entry(k).or_insert(0) += v;
            }
        }
    }

    fn merged(mut self, other: NGramCounts) -> Self {
        self.merge(other);
        self
    }

    pub fn get(&self, gram: &NGram) -> u64 {
        self.counts.get(gram).copied().unwrap_or(0)
    }

    /// Number of distinct n-grams seen.
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&NGram, &u64)> {
        self.counts.iter()
    }
}

/// Tallies every n-gram across `captures`. Captures are consumed one at a
/// time, so callers can stream them from disk.
pub fn count_ngrams<C>(captures: impl IntoIterator<Item = C>, n: usize) -> NGramCounts
where
    C: std::borrow::Borrow<CaptureFile>,
{
    let mut counts = NGramCounts::new(n);
    for c in captures {
        counts.add_capture(c.borrow());
    }
    counts
}

/// Expected number of n-gram occurrences in a capture.
pub fn expected_ngram_total(capture: &CaptureFile, n: usize) -> u64 {
    capture
        .packets
        .iter()
        .map(|p| ngram_count(p.content.len(), n) as u64)
        .sum()
}

#[derive(Debug, Clone)]
enum Lookup {
    /// Direct table indexed by the n-gram's integer value (n <= 2).
    Dense(Vec<u32>),
    Sparse(HashMap<NGram, u32>),
}

/// Bidirectional map between n-grams and ids `1..=len()`, id 0 being OOV.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    n: usize,
    vocab_size: usize,
    // by_id[i] / counts[i] describe id i + 1
    by_id: Vec<NGram>,
    counts: Vec<u64>,
    lookup: Lookup,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.vocab_size == other.vocab_size
            && self.by_id == other.by_id
            && self.counts == other.counts
    }
}

impl Eq for Vocabulary {}

impl Vocabulary {
    fn from_ranked(n: usize, vocab_size: usize, ranked: Vec<(NGram, u64)>) -> Self {
        let (by_id, counts): (Vec<_>, Vec<_>) = ranked.into_iter().unzip();
        let lookup = if n <= 2 {
            let mut table = vec![OOV_ID; 1 << (8 * n)];
            for (i, g) in by_id.iter().enumerate() {
                table[g.dense_index()] = i as u32 + 1;
            }
            Lookup::Dense(table)
        } else {
            Lookup::Sparse(
                by_id
                    .iter()
                    .enumerate()
                    .map(|(i, g)| (*g, i as u32 + 1))
                    .collect(),
            )
        };
        Self {
            n,
            vocab_size,
            by_id,
            counts,
            lookup,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Configured cap |V|.
    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    /// Number of ids actually assigned.
    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    /// Rows an embedding matrix for this vocabulary needs (OOV included).
    pub fn embedding_rows(&self) -> usize {
        self.len() + 1
    }

    pub fn id(&self, gram: &NGram) -> u32 {
        debug_assert_eq!(gram.len(), self.n);
        match &self.lookup {
            Lookup::Dense(table) => table[gram.dense_index()],
            Lookup::Sparse(map) => map.get(gram).copied().unwrap_or(OOV_ID),
        }
    }

    pub fn ngram(&self, id: u32) -> Option<NGram> {
        (id as usize)
            .checked_sub(1)
            .and_then(|i| self.by_id.get(i).copied())
    }

    pub fn count(&self, id: u32) -> Option<u64> {
        (id as usize)
            .checked_sub(1)
            .and_then(|i| self.counts.get(i).copied())
    }

    /// `(ngram, id, count)` in id order.
    pub fn entries(&self) -> impl Iterator<Item = (NGram, u32, u64)> + '_ {
        self.by_id
            .iter()
            .zip(&self.counts)
            .enumerate()
            .map(|(i, (g, c))| (*g, i as u32 + 1, *c))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::with_capacity(20 + self.len() * (self.n + 12));
        w.bytes(DICT_MAGIC)
            .u32(self.n as u32)
            .u32(self.vocab_size as u32)
            .u32(self.len() as u32);
        for (g, id, count) in self.entries() {
            w.bytes(g.as_bytes()).u32(id).u64(count);
        }
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes, DICT_FORMAT);
        r.magic(DICT_MAGIC)?;
        let n = r.u32()? as usize;
        check_ngram_len(n).map_err(|e| r.error(e.to_string()))?;
        let vocab_size = r.u32()? as usize;
        if vocab_size == 0 {
            return Err(r.error("vocabulary size is zero"));
        }
        let entry_count = r.len_prefix_u32(n + 12)?;
        if entry_count > vocab_size {
            return Err(r.error(format!(
                "{entry_count} entries exceed vocabulary size {vocab_size}"
            )));
        }
        let mut slots: Vec<Option<(NGram, u64)>> = vec![None; entry_count];
        let mut seen = HashMap::with_capacity(entry_count);
        for _ in 0..entry_count {
            let at = r.offset();
            let gram = NGram::new(r.bytes(n)?);
            let id = r.u32()? as usize;
            let count = r.u64()?;
            if id == 0 || id > entry_count {
                return Err(Error::format(
                    DICT_FORMAT,
                    at,
                    format!("id {id} out of range"),
                ));
            }
            if slots[id - 1].is_some() {
                return Err(Error::format(DICT_FORMAT, at, format!("duplicate id {id}")));
            }
            if seen.insert(gram, id).is_some() {
                return Err(Error::format(
                    DICT_FORMAT,
                    at,
                    format!("duplicate n-gram {gram:?}"),
                ));
            }
            slots[id - 1] = Some((gram, count));
        }
        r.finish()?;
        let ranked: Vec<(NGram, u64)> = slots.into_iter().map(|s| s.unwrap()).collect();
        if let Some(i) = ranked.windows(2).position(|w| w[0].1 < w[1].1) {
            return Err(r.error(format!("id {} has a lower count than id {}", i + 1, i + 2)));
        }
        Ok(Self::from_ranked(n, vocab_size, ranked))
    }
}

/// Assigns ids `1..` to the `vocab_size` most frequent n-grams. Equal counts
/// are ordered by ascending bytes so the result is fully deterministic.
pub fn build_vocabulary(counts: &NGramCounts, vocab_size: usize) -> Result<Vocabulary> {
    if vocab_size == 0 {
        return Err(Error::InvalidParameter(
            "vocabulary size must be >= 1".into(),
        ));
    }
    if vocab_size > u32::MAX as usize {
        return Err(Error::InvalidParameter(format!(
            "vocabulary size {vocab_size} does not fit a u32 id"
        )));
    }
    check_ngram_len(counts.n())?;
    let mut ranked: Vec<(NGram, u64)> = counts.iter().map(|(g, c)| (*g, *c)).collect();
    ranked.par_sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(vocab_size);
    Ok(Vocabulary::from_ranked(counts.n(), vocab_size, ranked))
}

pub fn save_vocabulary(vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &vocab.to_bytes())
}

pub fn load_vocabulary(path: impl AsRef<Path>) -> Result<Vocabulary> {
    Vocabulary::from_bytes(&read_file(path.as_ref())?)
}
