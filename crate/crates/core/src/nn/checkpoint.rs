//! Parameter checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   b"CAWPARAM"
//! u32     format version (1)
//! u32     header length, then UTF-8 header (JSON encoder config)
//! u32     parameter count
//! per parameter:
//!   u32 name length, name bytes, u32 rows, u32 cols, rows*cols f64 values
//! ```

use std::io::{self, Read, Write};

use thiserror::Error;

use super::params::ParamSet;
use super::tensor::Tensor;

const MAGIC: &[u8; 8] = b"CAWPARAM";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("not a parameter checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("checkpoint text is not valid UTF-8")]
    Utf8,
}

fn write_u32<W: Write>(w: &mut W, v: u32) -> io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_string<R: Read>(r: &mut R) -> Result<String, CheckpointError> {
    let len = read_u32(r)? as usize;
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| CheckpointError::Utf8)
}

pub fn write_checkpoint<W: Write>(mut w: W, header: &str, params: &ParamSet) -> Result<(), CheckpointError> {
    w.write_all(MAGIC)?;
    write_u32(&mut w, VERSION)?;
    write_u32(&mut w, header.len() as u32)?;
    w.write_all(header.as_bytes())?;
    write_u32(&mut w, params.len() as u32)?;
    for p in params.iter() {
        write_u32(&mut w, p.name.len() as u32)?;
        w.write_all(p.name.as_bytes())?;
        write_u32(&mut w, p.value.rows as u32)?;
        write_u32(&mut w, p.value.cols as u32)?;
        for x in &p.value.data {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a checkpoint into a fresh parameter set (moments zeroed).
pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(String, ParamSet), CheckpointError> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let header = read_string(&mut r)?;
    let count = read_u32(&mut r)?;
    let mut params = ParamSet::new();
    for _ in 0..count {
        let name = read_string(&mut r)?;
        let rows = read_u32(&mut r)? as usize;
        let cols = read_u32(&mut r)? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        let mut b = [0u8; 8];
        for _ in 0..rows * cols {
            r.read_exact(&mut b)?;
            data.push(f64::from_le_bytes(b));
        }
        params.add(name, Tensor::from_vec(rows, cols, data));
    }
    Ok((header, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_preserves_bits() {
        let mut ps = ParamSet::new();
        ps.add("a.weight", Tensor::from_vec(2, 2, vec![1.5, -0.0, f64::MIN_POSITIVE, 1e300]));
        ps.add("b", Tensor::row(&[std::f64::consts::PI]));
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, "{\"x\":1}", &ps).unwrap();
        let (header, back) = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(header, "{\"x\":1}");
        for (p, q) in ps.iter().zip(back.iter()) {
            assert_eq!(p.name, q.name);
            assert_eq!(p.value.shape(), q.value.shape());
            let bits = |t: &Tensor| t.data.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&p.value), bits(&q.value));
        }
        assert!(matches!(read_checkpoint(&b"NOTACKPT"[..]), Err(CheckpointError::BadMagic)));
    }
}
