//! Little-endian binary encoding shared by every on-disk artifact.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Cursor over a byte buffer that reports the failing offset on error.
pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
    format: &'static str,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8], format: &'static str) -> Self {
        Self {
            buf,
            pos: 0,
            format,
        }
    }

    pub fn offset(&self) -> u64 {
        self.pos as u64
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn error(&self, reason: impl Into<String>) -> Error {
        Error::format(self.format, self.offset(), reason)
    }

    pub fn bytes(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.remaining() < len {
            return Err(self.error(format!(
                "unexpected end of data: need {len} bytes, {} left",
                self.remaining()
            )));
        }
        let out = &self.buf[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    pub fn magic(&mut self, expected: &[u8]) -> Result<()> {
        let found = self
            .bytes(expected.len())
            .map_err(|_| self.error("file too short for magic"))?;
        if found != expected {
            self.pos -= expected.len();
            return Err(self.error(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(found),
                String::from_utf8_lossy(expected)
            )));
        }
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    pub fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }

    /// Reads a length prefix and checks that `len * elem_size` bytes could
    /// still follow, so corrupt headers cannot trigger huge allocations.
    pub fn len_prefix_u32(&mut self, elem_size: usize) -> Result<usize> {
        let len = self.u32()? as usize;
        self.check_fits(len, elem_size)?;
        Ok(len)
    }

    pub fn len_prefix_u64(&mut self, elem_size: usize) -> Result<usize> {
        let len = self.u64()?;
        let len = usize::try_from(len).map_err(|_| self.error("length overflows usize"))?;
        self.check_fits(len, elem_size)?;
        Ok(len)
    }

    pub fn check_fits(&self, count: usize, elem_size: usize) -> Result<()> {
        match count.checked_mul(elem_size) {
            Some(total) if total <= self.remaining() => Ok(()),
            _ => Err(self.error(format!(
                "declared {count} elements of {elem_size} bytes, only {} bytes left",
                self.remaining()
            ))),
        }
    }

    pub fn f32_vec(&mut self, count: usize) -> Result<Vec<f32>> {
        self.check_fits(count, 4)?;
        let raw = self.bytes(count * 4)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn u32_vec(&mut self, count: usize) -> Result<Vec<u32>> {
        self.check_fits(count, 4)?;
        let raw = self.bytes(count * 4)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn finish(&self) -> Result<()> {
        if self.remaining() != 0 {
            return Err(self.error(format!("{} trailing bytes", self.remaining())));
        }
        Ok(())
    }
}

#[derive(Default)]
pub(crate) struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn with_capacity(cap: usize) -> Self {
        Self {
            buf: Vec::with_capacity(cap),
        }
    }

    pub fn bytes(&mut self, b: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(b);
        self
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.bytes(&v.to_le_bytes())
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.bytes(&v.to_le_bytes())
    }

    pub fn i64(&mut self, v: i64) -> &mut Self {
        self.bytes(&v.to_le_bytes())
    }

    pub fn f32(&mut self, v: f32) -> &mut Self {
        self.bytes(&v.to_le_bytes())
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.bytes(&v.to_le_bytes())
    }

    pub fn f32_slice(&mut self, vs: &[f32]) -> &mut Self {
        self.buf.reserve(vs.len() * 4);
        for v in vs {
            self.f32(*v);
        }
        self
    }

    pub fn u32_slice(&mut self, vs: &[u32]) -> &mut Self {
        self.buf.reserve(vs.len() * 4);
        for v in vs {
            self.u32(*v);
        }
        self
    }

    pub fn into_inner(self) -> Vec<u8> {
        self.buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reader_reports_offset_of_short_read() {
        let mut r = ByteReader::new(&[1, 0, 0, 0, 7], "test");
        assert_eq!(r.u32().unwrap(), 1);
        match r.u32() {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn length_prefix_rejects_impossible_sizes() {
        let mut w = ByteWriter::default();
        w.u64(u64::MAX / 2);
        let buf = w.into_inner();
        let mut r = ByteReader::new(&buf, "test");
        assert!(r.len_prefix_u64(4).is_err());
    }
}
