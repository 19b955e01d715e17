//! `.dten` binary tensor files.
//!
//! Layout, all little-endian: magic `DTEN`, version `u32` (= 1), order `u32`,
//! `order` dimensions as `u64`, then the column-major `f64` payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{checked_numel, DenseTensor};
use crate::error::{Error, Result};

pub const DTEN_MAGIC: &[u8; 4] = b"DTEN";
pub const DTEN_VERSION: u32 = 1;

pub fn write_dten_to<W: Write>(w: &mut W, x: &DenseTensor) -> Result<()> {
    w.write_all(DTEN_MAGIC)?;
    w.write_all(&DTEN_VERSION.to_le_bytes())?;
    w.write_all(&(x.order() as u32).to_le_bytes())?;
    for &d in x.dims() {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for &v in x.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn write_dten(path: impl AsRef<Path>, x: &DenseTensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dten_to(&mut w, x)?;
    w.flush()?;
    Ok(())
}

fn read_exact_or(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => {
                return Err(Error::Format(format!(
                    "truncated {what}: expected {} bytes, got {filled}",
                    buf.len()
                )))
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

pub fn read_dten_from<R: Read>(r: &mut R) -> Result<DenseTensor> {
    let mut head = [0u8; 12];
    read_exact_or(r, &mut head, "header")?;
    if &head[..4] != DTEN_MAGIC {
        return Err(Error::Format(format!("bad magic {:?}", &head[..4])));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != DTEN_VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let order = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    if order == 0 {
        return Err(Error::Format("order must be at least 1".into()));
    }
    let mut dim_bytes = vec![0u8; order * 8];
    read_exact_or(r, &mut dim_bytes, "dimension list")?;
    let dims = dim_bytes
        .chunks_exact(8)
        .map(|c| usize::try_from(u64::from_le_bytes(c.try_into().unwrap())))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::Format("dimension does not fit in usize".into()))?;
    if dims.contains(&0) {
        return Err(Error::Format(format!("zero dimension in {dims:?}")));
    }
    let numel = checked_numel(&dims).map_err(|e| Error::Format(e.to_string()))?;
    let bytes = numel
        .checked_mul(8)
        .ok_or_else(|| Error::Format("payload size overflows".into()))?;
    let mut payload = Vec::new();
    r.take(bytes as u64).read_to_end(&mut payload)?;
    if payload.len() != bytes {
        return Err(Error::Format(format!(
            "truncated payload: expected {bytes} bytes, got {}",
            payload.len()
        )));
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(Error::Format("trailing bytes after payload".into()));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DenseTensor::new(dims, data)
}

pub fn read_dten(path: impl AsRef<Path>) -> Result<DenseTensor> {
    let mut r = BufReader::new(File::open(path)?);
    read_dten_from(&mut r)
}
