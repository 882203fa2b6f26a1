//! Named-tensor container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes  "LGCCKPT\0"
//! version u32      1
//! count   u32      number of entries
//! entry*  name_len u32, name (UTF-8), ndim u32, dims u64 * ndim,
//!         values f64 * prod(dims)   (row-major, IEEE-754 bit patterns)
//! ```
//!
//! Values are stored as raw bit patterns, so a write/read cycle is bit-exact.

use std::io::{Read, Write};
use std::path::Path;

use indexmap::IndexMap;

use crate::error::{AutodiffError, Result};
use crate::tensor::Tensor;

const MAGIC: &[u8; 8] = b"LGCCKPT\0";
const VERSION: u32 = 1;

pub fn write_to<W: Write>(mut w: W, entries: &IndexMap<String, Tensor>) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(entries.len() as u32).to_le_bytes())?;
    for (name, t) in entries {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.ndim() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in t.data() {
            w.write_all(&v.to_bits().to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_from<R: Read>(mut r: R) -> Result<IndexMap<String, Tensor>> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(AutodiffError::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(AutodiffError::Checkpoint(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut r)?;
    let mut out = IndexMap::new();
    for _ in 0..count {
        let name_len = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| AutodiffError::Checkpoint("entry name is not UTF-8".into()))?;
        let ndim = read_u32(&mut r)? as usize;
        let shape = (0..ndim)
            .map(|_| read_u64(&mut r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| read_u64(&mut r).map(f64::from_bits))
            .collect::<Result<Vec<_>>>()?;
        if out.insert(name.clone(), Tensor::new(shape, data)?).is_some() {
            return Err(AutodiffError::Checkpoint(format!("duplicate entry {name}")));
        }
    }
    Ok(out)
}

pub fn save(path: impl AsRef<Path>, entries: &IndexMap<String, Tensor>) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_to(std::io::BufWriter::new(f), entries)
}

pub fn load(path: impl AsRef<Path>) -> Result<IndexMap<String, Tensor>> {
    let f = std::fs::File::open(path)?;
    read_from(std::io::BufReader::new(f))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
