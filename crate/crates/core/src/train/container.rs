//! Binary container shared by checkpoints and dataset files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic        4 bytes
//! version      u32
//! meta_len     u64, then meta_len bytes of UTF-8 JSON
//! count        u32
//! count × {
//!   name_len   u32, then name_len bytes of UTF-8
//!   kind       u8   (0 = real, 1 = complex)
//!   ndims      u32, then ndims × u64 extents
//!   data       f64 values; complex entries as (re, im) pairs
//! }
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::diffengine::{Complex64, ComplexTensor, Tensor, Value};
use crate::error::{Error, Result};

pub const VERSION: u32 = 1;

pub fn encode(magic: &[u8; 4], meta: &serde_json::Value, arrays: &[(String, &Value)]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(magic);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let meta = serde_json::to_vec(meta).map_err(|e| Error::Format(e.to_string()))?;
    out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta);
    out.extend_from_slice(&(arrays.len() as u32).to_le_bytes());
    for (name, value) in arrays {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        let (kind, shape): (u8, &[usize]) = match value {
            Value::Real(t) => (0, t.shape()),
            Value::Complex(c) => (1, c.shape()),
            Value::Spectrum(_) => return Err(Error::Format(format!("{name}: spectra are not stored"))),
        };
        out.push(kind);
        out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        match value {
            Value::Real(t) => t.data().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            Value::Complex(c) => c.data().iter().for_each(|z| {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }),
            Value::Spectrum(_) => unreachable!(),
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::Corrupt(format!("file ends at byte {} while {n} more were expected", self.bytes.len()))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Corrupt("length overflows".into()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Corrupt("length overflows".into()))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }
}

pub type Decoded = (serde_json::Value, Vec<(String, Value)>);

pub fn decode(magic: &[u8; 4], bytes: &[u8]) -> Result<Decoded> {
    if bytes.len() < 4 || &bytes[..4] != magic {
        return Err(Error::Format(format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&bytes[..bytes.len().min(4)])
        )));
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Version(version));
    }
    let meta_len = r.len()?;
    let meta = serde_json::from_slice(r.take(meta_len)?).map_err(|e| Error::Corrupt(format!("metadata: {e}")))?;
    let count = r.u32()? as usize;
    let mut arrays = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec()).map_err(|e| Error::Corrupt(e.to_string()))?;
        let kind = r.take(1)?[0];
        let ndims = r.u32()? as usize;
        let shape = (0..ndims).map(|_| r.len()).collect::<Result<Vec<usize>>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Corrupt(format!("{name}: extents overflow")))?;
        let value = match kind {
            0 => Value::Real(Tensor::new(shape, r.f64s(n)?).map_err(|e| Error::Corrupt(e.to_string()))?),
            1 => {
                let flat = r.f64s(2 * n)?;
                let data = flat.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
                Value::Complex(ComplexTensor::new(shape, data).map_err(|e| Error::Corrupt(e.to_string()))?)
            }
            k => return Err(Error::Corrupt(format!("{name}: unknown array kind {k}"))),
        };
        arrays.push((name, value));
    }
    if r.pos != bytes.len() {
        return Err(Error::Corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok((meta, arrays))
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("partial");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
