//! `QMAP` binary tensors: 16-byte header (`b"QMAP"`, then `I`, `J`, `K` as
//! little-endian `u32`) followed by `I·J·K` little-endian `f64` values in
//! row-major `(i, j, k)` order.

use std::fs;
use std::path::Path;

use ndarray::Array3;

use crate::error::{Error, Result};

pub const QMAP_MAGIC: &[u8; 4] = b"QMAP";
const HEADER_LEN: usize = 16;

pub fn write_qmap_bytes(tensor: &Array3<f64>) -> Result<Vec<u8>> {
    let (ni, nj, nk) = tensor.dim();
    let dim = |n: usize| {
        u32::try_from(n).map_err(|_| Error::invalid(format!("dimension {n} exceeds u32")))
    };
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * tensor.len());
    out.extend_from_slice(QMAP_MAGIC);
    for n in [ni, nj, nk] {
        out.extend_from_slice(&dim(n)?.to_le_bytes());
    }
    // `iter` walks in logical row-major order regardless of memory layout.
    for v in tensor.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn read_qmap_bytes(bytes: &[u8]) -> Result<Array3<f64>> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != QMAP_MAGIC {
        return Err(Error::Format("missing QMAP header".into()));
    }
    let dim = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let (ni, nj, nk) = (dim(4), dim(8), dim(12));
    let count = ni
        .checked_mul(nj)
        .and_then(|v| v.checked_mul(nk))
        .ok_or_else(|| Error::Format("QMAP dimensions overflow".into()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != count * 8 {
        return Err(Error::Format(format!(
            "QMAP body has {} bytes, expected {} for {ni}x{nj}x{nk}",
            body.len(),
            count * 8
        )));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Array3::from_shape_vec((ni, nj, nk), data).expect("length checked"))
}

pub fn write_qmap(path: impl AsRef<Path>, tensor: &Array3<f64>) -> Result<()> {
    fs::write(path, write_qmap_bytes(tensor)?)?;
    Ok(())
}

pub fn read_qmap(path: impl AsRef<Path>) -> Result<Array3<f64>> {
    read_qmap_bytes(&fs::read(path)?)
}
