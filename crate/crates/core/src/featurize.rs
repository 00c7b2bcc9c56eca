//! Per-packet feature vectors: the mean embedding of the packet's tokens.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::codec::{read_file, write_file, ByteReader, ByteWriter};
use crate::embedding::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::translate::{check_id_range, TokenizedCapture};

const FEAT_MAGIC: &[u8; 8] = b"P2VFEAT1";

/// Row-major `rows x cols` matrix, one row per packet.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub source: PathBuf,
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl FeatureMatrix {
    pub fn new(
        source: impl Into<PathBuf>,
        rows: usize,
        cols: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::Dimension(format!(
                "{} values cannot form a {rows} x {cols} matrix",
                data.len()
            )));
        }
        Ok(Self {
            source: source.into(),
            rows,
            cols,
            data,
        })
    }

    pub fn from_rows<R: AsRef<[f32]>>(
        source: impl Into<PathBuf>,
        cols: usize,
        rows: &[R],
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.as_ref().len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} values, expected {cols}",
                    r.as_ref().len()
                )));
            }
            data.extend_from_slice(r.as_ref());
        }
        Self::new(source, rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::with_capacity(20 + 4 * self.data.len());
        w.bytes(FEAT_MAGIC)
            .u64(self.rows as u64)
            .u32(self.cols as u32)
            .f32_slice(&self.data);
        w.into_inner()
    }

    pub fn from_bytes(bytes: &[u8], source: impl Into<PathBuf>) -> Result<Self> {
        let mut r = ByteReader::new(bytes, "feature file");
        r.magic(FEAT_MAGIC)?;
        let rows = usize::try_from(r.u64()?).map_err(|_| r.error("row count overflows"))?;
        let cols = r.u32()? as usize;
        if cols == 0 {
            return Err(r.error("zero feature columns"));
        }
        let cells = rows
            .checked_mul(cols)
            .ok_or_else(|| r.error("shape overflows"))?;
        let data = r.f32_vec(cells)?;
        r.finish()?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(r.error("non-finite feature value"));
        }
        Self::new(source, rows, cols, data)
    }
}

/// Mean of the embedding rows of `tokens`, accumulated in f64. OOV tokens
/// add row 0 (zeros) but still count in the denominator; no tokens give the
/// zero vector.
pub fn featurize_packet_f64(tokens: &[u32], e: &EmbeddingMatrix) -> Vec<f64> {
    let mut acc = vec![0.0f64; e.dim()];
    if tokens.is_empty() {
        return acc;
    }
    for id in tokens {
        for (a, v) in acc.iter_mut().zip(e.row(*id)) {
            *a += f64::from(*v);
        }
    }
    let len = tokens.len() as f64;
    acc.iter_mut().for_each(|a| *a /= len);
    acc
}

pub fn featurize_packet(tokens: &[u32], e: &EmbeddingMatrix) -> Vec<f32> {
    featurize_packet_f64(tokens, e)
        .into_iter()
        .map(|v| v as f32)
        .collect()
}

fn featurize_into(tokens: &[u32], e: &EmbeddingMatrix, out: &mut [f32]) {
    let mean = featurize_packet_f64(tokens, e);
    for (o, m) in out.iter_mut().zip(mean) {
        *o = m as f32;
    }
}

/// One feature row per packet, computed in parallel into disjoint rows.
pub fn featurize_capture(t: &TokenizedCapture, e: &EmbeddingMatrix) -> Result<FeatureMatrix> {
    check_id_range(t, e.vocab_rows())?;
    let cols = e.dim();
    let rows = t.packet_count();
    let mut data = vec![0.0f32; rows * cols];
    data.par_chunks_mut(cols)
        .enumerate()
        .for_each(|(i, out)| featurize_into(t.packet(i), e, out));
    FeatureMatrix::new(t.source.clone(), rows, cols, data)
}

pub fn save_features(x: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &x.to_bytes())
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    FeatureMatrix::from_bytes(&read_file(path)?, path)
}
