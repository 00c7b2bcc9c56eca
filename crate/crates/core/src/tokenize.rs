//! Sliding-window byte n-grams.

use std::fmt;

use crate::error::{Error, Result};

/// Longest supported n-gram. Token ids are `u32`, and keys are packed into a
/// fixed inline array.
pub const MAX_NGRAM_LEN: usize = 8;

pub const DEFAULT_NGRAM_LEN: usize = 2;

/// A fixed-length byte tuple. Ordering is byte-lexicographic.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NGram {
    // Unused tail bytes stay zero so derived Eq/Ord/Hash agree with the
    // logical byte slice for equal lengths.
    bytes: [u8; MAX_NGRAM_LEN],
    len: u8,
}

impl NGram {
    pub fn new(bytes: &[u8]) -> Self {
        assert!(
            !bytes.is_empty() && bytes.len() <= MAX_NGRAM_LEN,
            "n-gram length {} outside 1..={MAX_NGRAM_LEN}",
            bytes.len()
        );
        let mut packed = [0u8; MAX_NGRAM_LEN];
        packed[..bytes.len()].copy_from_slice(bytes);
        Self {
            bytes: packed,
            len: bytes.len() as u8,
        }
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes[..self.len as usize]
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Big-endian integer value of the bytes, used as a dense table index.
    pub fn dense_index(&self) -> usize {
        self.as_bytes()
            .iter()
            .fold(0usize, |acc, b| (acc << 8) | usize::from(*b))
    }
}

impl fmt::Debug for NGram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NGram(")?;
        for b in self.as_bytes() {
            write!(f, "{b:02x}")?;
        }
        write!(f, ")")
    }
}

pub fn check_ngram_len(n: usize) -> Result<()> {
    if n == 0 || n > MAX_NGRAM_LEN {
        return Err(Error::InvalidParameter(format!(
            "n-gram length {n} outside 1..={MAX_NGRAM_LEN}"
        )));
    }
    Ok(())
}

/// Lazily yields the stride-1 n-grams of `content`.
pub fn ngrams(content: &[u8], n: usize) -> impl Iterator<Item = NGram> + '_ {
    content.windows(n).map(NGram::new)
}

pub fn ngram(content: &[u8], n: usize) -> Vec<NGram> {
    ngrams(content, n).collect()
}

pub fn ngram_count(content_len: usize, n: usize) -> usize {
    (content_len + 1).saturating_sub(n)
}
