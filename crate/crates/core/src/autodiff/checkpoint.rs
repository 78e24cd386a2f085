//! Named-tensor checkpoint files.
//!
//! Byte layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  b"EOCSATNS"
//! version  u32      1
//! count    u32      number of tensors
//! repeated count times:
//!   name_len u32, name (UTF-8, name_len bytes)
//!   ndim     u32, dims (u64 × ndim)
//!   data     f64 × product(dims), row-major
//! ```

use std::path::Path;

use super::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"EOCSATNS";
const VERSION: u32 = 1;

pub fn encode(tensors: &[(String, Tensor)]) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
        for &d in t.shape() {
            buf.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for v in t.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4).map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8).map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<Vec<(String, Tensor)>> {
    let bad = |m: &str| Error::Format {
        path: path.to_path_buf(),
        message: m.to_string(),
    };
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8) != Some(MAGIC.as_slice()) {
        return Err(bad("bad magic"));
    }
    if r.u32() != Some(VERSION) {
        return Err(bad("unsupported version"));
    }
    let count = r.u32().ok_or_else(|| bad("truncated header"))?;
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = r.u32().ok_or_else(|| bad("truncated name"))? as usize;
        let name = std::str::from_utf8(r.take(len).ok_or_else(|| bad("truncated name"))?)
            .map_err(|_| bad("name is not UTF-8"))?
            .to_string();
        let ndim = r.u32().ok_or_else(|| bad("truncated shape"))? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(r.u64().ok_or_else(|| bad("truncated shape"))? as usize);
        }
        let n: usize = shape.iter().product();
        let raw = r
            .take(n.checked_mul(8).ok_or_else(|| bad("shape overflow"))?)
            .ok_or_else(|| bad("truncated data"))?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push((name, Tensor::new(shape, data).map_err(|e| bad(&e.to_string()))?));
    }
    if r.pos != bytes.len() {
        return Err(bad("trailing bytes"));
    }
    Ok(out)
}

pub fn save(path: &Path, tensors: &[(String, Tensor)]) -> Result<()> {
    crate::data::write_atomic(path, &encode(tensors))
}

pub fn load(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}
