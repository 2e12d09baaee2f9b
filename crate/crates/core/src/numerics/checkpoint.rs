//! Binary archive of named tensors.
//!
//! ```text
//! magic     10 bytes  "ABSA-CKPT\0"
//! version   u8        1
//! count     u32 LE    number of records
//! record:
//!   name_len  u32 LE
//!   name      name_len bytes, UTF-8
//!   rank      u8      0..=3
//!   dims      rank × u32 LE
//!   values    product(dims) × f32 LE, row-major
//! ```
//!
//! Used for model parameters and for cached transfer embeddings (one record
//! per sentence id).

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 10] = b"ABSA-CKPT\0";
pub const FORMAT_VERSION: u8 = 1;

pub fn encode<'a, I>(records: I) -> Vec<u8>
where
    I: IntoIterator<Item = (&'a str, &'a Tensor)>,
{
    let records: Vec<_> = records.into_iter().collect();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&(records.len() as u32).to_le_bytes());
    for (name, t) in records {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.rank() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint(format!(
                "truncated at byte {} (need {} more)",
                self.pos, n
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<(String, Tensor)>> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(MAGIC.len())? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = c.take(1)?[0];
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", version)));
    }
    let count = c.u32()? as usize;
    let mut out = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let len = c.u32()? as usize;
        let name = std::str::from_utf8(c.take(len)?)
            .map_err(|e| Error::Checkpoint(format!("record name: {}", e)))?
            .to_string();
        let rank = c.take(1)?[0] as usize;
        if rank > 3 {
            return Err(Error::Checkpoint(format!("{}: rank {}", name, rank)));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(c.u32()? as usize);
        }
        let n: usize = shape.iter().product();
        let raw = c.take(n * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        out.push((name, Tensor::new(shape, data)?));
    }
    if c.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes",
            bytes.len() - c.pos
        )));
    }
    Ok(out)
}

pub fn write_archive<'a, I>(path: &Path, records: I) -> Result<()>
where
    I: IntoIterator<Item = (&'a str, &'a Tensor)>,
{
    let bytes = encode(records);
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_archive(path: &Path) -> Result<Vec<(String, Tensor)>> {
    let mut buf = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| Error::io(path, e))?;
    decode(&buf)
}

pub fn save_store(store: &ParamStore, path: &Path) -> Result<()> {
    write_archive(path, store.named_values())
}

/// Loads every record into the matching store entry. Records must cover the store exactly.
pub fn load_store(store: &mut ParamStore, path: &Path) -> Result<()> {
    let records = read_archive(path)?;
    if records.len() != store.len() {
        return Err(Error::Checkpoint(format!(
            "{} records for a store of {} entries",
            records.len(),
            store.len()
        )));
    }
    store.load_values(records.iter().map(|(n, t)| (n.as_str(), t)))?;
    Ok(())
}
