//! Little-endian framing shared by the model and ciphertext formats.

use nalgebra::DMatrix;

use crate::{Error, Result};

#[derive(Default)]
pub(crate) struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn string(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.bytes(s.as_bytes());
    }

    /// Row-major.
    pub fn matrix(&mut self, m: &DMatrix<f64>) {
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                self.f64(m[(i, j)]);
            }
        }
    }
}

pub(crate) struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Reader { data, pos: 0 }
    }

    pub fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| Error::Malformed(format!("truncated {what}")))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    pub fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub fn usize(&mut self, what: &str) -> Result<usize> {
        usize::try_from(self.u64(what)?)
            .map_err(|_| Error::Malformed(format!("{what} does not fit in memory")))
    }

    pub fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub fn string(&mut self, what: &str) -> Result<String> {
        let len = self.usize(what)?;
        let raw = self.take(len, what)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| Error::Malformed(format!("{what} is not UTF-8")))
    }

    /// Row-major; checks the remaining length before allocating.
    pub fn matrix(&mut self, rows: usize, cols: usize, what: &str) -> Result<DMatrix<f64>> {
        let count = rows
            .checked_mul(cols)
            .and_then(|c| c.checked_mul(8))
            .ok_or_else(|| Error::Malformed(format!("{what} dimensions overflow")))?;
        let raw = self.take(count, what)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        Ok(DMatrix::from_row_iterator(rows, cols, values))
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn finish(&self, what: &str) -> Result<()> {
        if self.remaining() != 0 {
            return Err(Error::Malformed(format!(
                "{} trailing bytes after {what}",
                self.remaining()
            )));
        }
        Ok(())
    }
}

/// Reads magic, version and the four reserved zero bytes.
pub(crate) fn read_preamble(r: &mut Reader<'_>, magic: &[u8; 4], version: u8) -> Result<()> {
    if r.take(4, "magic")? != magic {
        return Err(Error::Malformed(format!(
            "bad magic; expected {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    let v = r.u8("version")?;
    if v != version {
        return Err(Error::Malformed(format!("unsupported version {v}")));
    }
    if r.take(4, "reserved bytes")? != [0u8; 4] {
        return Err(Error::Malformed("reserved bytes must be zero".into()));
    }
    Ok(())
}

pub(crate) fn write_preamble(w: &mut Writer, magic: &[u8; 4], version: u8) {
    w.bytes(magic);
    w.u8(version);
    w.bytes(&[0; 4]);
}
