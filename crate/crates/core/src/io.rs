//! Serialization of dense operators and states.
//!
//! JSON stores complex numbers as `[re, im]` pairs in row-major order. The
//! binary format is the 8-byte magic `CDYNDNS1`, then `rows` and `cols` as
//! little-endian `u64`, then `rows * cols` little-endian `(re, im)` `f64` pairs
//! in row-major order.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix, CVector};

pub const BINARY_MAGIC: &[u8; 8] = b"CDYNDNS1";

/// Flat row-major list of `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComplexArray(pub Vec<[f64; 2]>);

impl ComplexArray {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let mut out = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                let z = m[(i, j)];
                out.push([z.re, z.im]);
            }
        }
        ComplexArray(out)
    }

    pub fn from_vector(v: &CVector) -> Self {
        ComplexArray(v.iter().map(|z| [z.re, z.im]).collect())
    }

    /// Square matrix whose side is inferred from the entry count.
    pub fn to_square_matrix(&self) -> Result<CMatrix> {
        let n = (self.0.len() as f64).sqrt().round() as usize;
        if n * n != self.0.len() || n == 0 {
            return Err(Error::Format(format!("{} entries do not form a square matrix", self.0.len())));
        }
        self.to_matrix(n, n)
    }

    pub fn to_matrix(&self, rows: usize, cols: usize) -> Result<CMatrix> {
        if rows * cols != self.0.len() {
            return Err(Error::Format(format!("{} entries for a {rows}x{cols} matrix", self.0.len())));
        }
        Ok(CMatrix::from_row_iterator(rows, cols, self.0.iter().map(|p| c64(p[0], p[1]))))
    }

    pub fn to_vector(&self) -> CVector {
        CVector::from_iterator(self.0.len(), self.0.iter().map(|p| c64(p[0], p[1])))
    }
}

pub fn write_binary(m: &CMatrix, mut w: impl Write) -> Result<()> {
    w.write_all(BINARY_MAGIC)?;
    w.write_all(&(m.nrows() as u64).to_le_bytes())?;
    w.write_all(&(m.ncols() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(16 * m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let z = m[(i, j)];
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_binary(mut r: impl Read) -> Result<CMatrix> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::Format("bad magic header".into()));
    }
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let rows = u64::from_le_bytes(word) as usize;
    r.read_exact(&mut word)?;
    let cols = u64::from_le_bytes(word) as usize;
    let len = rows
        .checked_mul(cols)
        .filter(|&l| l <= 1 << 32)
        .ok_or_else(|| Error::Format("implausible matrix size".into()))?;
    let mut bytes = vec![0u8; 16 * len];
    r.read_exact(&mut bytes)?;
    let values = bytes.chunks_exact(16).map(|c| {
        let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
        let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
        c64(re, im)
    });
    Ok(CMatrix::from_row_iterator(rows, cols, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let m = CMatrix::from_fn(3, 3, |i, j| c64(i as f64, -(j as f64) / 3.0));
        let text = serde_json::to_string(&ComplexArray::from_matrix(&m)).unwrap();
        let back: ComplexArray = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_square_matrix().unwrap(), m);
        assert!(ComplexArray(vec![[0.0, 0.0]; 3]).to_square_matrix().is_err());
    }

    #[test]
    fn binary_round_trip_and_layout() {
        let m = CMatrix::from_fn(2, 3, |i, j| c64(i as f64 + 0.25, j as f64 - 1.0 / 3.0));
        let mut buf = Vec::new();
        write_binary(&m, &mut buf).unwrap();
        assert_eq!(&buf[..8], BINARY_MAGIC);
        assert_eq!(buf.len(), 8 + 16 + 16 * 6);
        assert_eq!(f64::from_le_bytes(buf[24..32].try_into().unwrap()), 0.25);
        assert_eq!(read_binary(&buf[..]).unwrap(), m);
        buf[0] = b'X';
        assert!(read_binary(&buf[..]).is_err());
    }
}
