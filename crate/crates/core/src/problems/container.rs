//! Binary container for named dense matrices.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   8 bytes  b"LRMATS\0\x01"
//! count   u32
//! count times:
//!   name_len u16, name (UTF-8, name_len bytes)
//!   rows u64, cols u64
//!   rows * cols f64 values, row-major
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const MAGIC: &[u8; 8] = b"LRMATS\0\x01";

pub fn write<W: Write>(mut w: W, entries: &[(&str, &Matrix)]) -> Result<()> {
    w.write_all(MAGIC)?;
    let count = u32::try_from(entries.len()).map_err(|_| Error::Format("too many entries".into()))?;
    w.write_all(&count.to_le_bytes())?;
    for (name, m) in entries {
        let len = u16::try_from(name.len()).map_err(|_| Error::Format(format!("name too long: {name}")))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(m.nrows() as u64).to_le_bytes())?;
        w.write_all(&(m.ncols() as u64).to_le_bytes())?;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                w.write_all(&m[(i, j)].to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn read_exact<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Format(format!("truncated container: {e}")))?;
    Ok(buf)
}

pub fn read<R: Read>(mut r: R) -> Result<Vec<(String, Matrix)>> {
    if &read_exact::<8, _>(&mut r)? != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let count = u32::from_le_bytes(read_exact(&mut r)?);
    let mut out = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let len = u16::from_le_bytes(read_exact(&mut r)?) as usize;
        let mut name = vec![0u8; len];
        r.read_exact(&mut name)
            .map_err(|e| Error::Format(format!("truncated name: {e}")))?;
        let name = String::from_utf8(name).map_err(|e| Error::Format(e.to_string()))?;
        let rows = u64::from_le_bytes(read_exact(&mut r)?) as usize;
        let cols = u64::from_le_bytes(read_exact(&mut r)?) as usize;
        let total = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Format("dimension overflow".into()))?;
        let mut data = Vec::with_capacity(total);
        for _ in 0..total {
            data.push(f64::from_le_bytes(read_exact(&mut r)?));
        }
        out.push((name, Matrix::from_row_slice(rows, cols, &data)));
    }
    Ok(out)
}

pub fn write_file(path: impl AsRef<Path>, entries: &[(&str, &Matrix)]) -> Result<()> {
    write(BufWriter::new(File::create(path)?), entries)
}

pub fn read_file(path: impl AsRef<Path>) -> Result<Vec<(String, Matrix)>> {
    read(BufReader::new(File::open(path)?))
}
