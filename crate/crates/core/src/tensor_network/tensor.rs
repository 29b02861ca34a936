//! Row-major dense complex tensors (last index fastest).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::ComplexArray;
use crate::linalg::{self, c64, CMatrix, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor {
    shape: Vec<usize>,
    data: Vec<C64>,
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut out = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        out[k] = out[k + 1] * shape[k + 1];
    }
    out
}

impl DenseTensor {
    pub fn new(shape: Vec<usize>, data: Vec<C64>) -> Result<Self> {
        let size: usize = shape.iter().product();
        if size != data.len() {
            return Err(Error::DimensionMismatch(format!("shape {shape:?} needs {size} entries, got {}", data.len())));
        }
        if shape.contains(&0) {
            return Err(Error::DimensionMismatch(format!("shape {shape:?} has a zero extent")));
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let size = shape.iter().product();
        DenseTensor { shape, data: vec![c64(0.0, 0.0); size] }
    }

    /// Entry `f(index)` at each multi-index.
    pub fn from_fn(shape: Vec<usize>, mut f: impl FnMut(&[usize]) -> C64) -> Self {
        let size: usize = shape.iter().product();
        let mut idx = vec![0; shape.len()];
        let mut data = Vec::with_capacity(size);
        for _ in 0..size {
            data.push(f(&idx));
            for k in (0..shape.len()).rev() {
                idx[k] += 1;
                if idx[k] < shape[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        DenseTensor { shape, data }
    }

    /// Rank-0 tensor holding `z`.
    pub fn scalar(z: C64) -> Self {
        DenseTensor { shape: Vec::new(), data: vec![z] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn offset(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.shape.len());
        strides(&self.shape).iter().zip(index).map(|(s, i)| s * i).sum()
    }

    pub fn get(&self, index: &[usize]) -> C64 {
        self.data[self.offset(index)]
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        DenseTensor::new(shape, self.data)
    }

    /// Axis `k` of the result is axis `axes[k]` of `self`.
    pub fn permute(&self, axes: &[usize]) -> Self {
        assert_eq!(axes.len(), self.rank(), "permutation length");
        let src = strides(&self.shape);
        let shape: Vec<usize> = axes.iter().map(|&a| self.shape[a]).collect();
        let moved: Vec<usize> = axes.iter().map(|&a| src[a]).collect();
        let mut offset = 0usize;
        let mut idx = vec![0; shape.len()];
        let mut data = Vec::with_capacity(self.data.len());
        for _ in 0..self.data.len() {
            data.push(self.data[offset]);
            for k in (0..shape.len()).rev() {
                idx[k] += 1;
                offset += moved[k];
                if idx[k] < shape[k] {
                    break;
                }
                offset -= moved[k] * shape[k];
                idx[k] = 0;
            }
        }
        DenseTensor { shape, data }
    }

    /// Row-major matrix with the first `split` axes as rows.
    pub fn to_matrix(&self, split: usize) -> CMatrix {
        let rows: usize = self.shape[..split].iter().product();
        let cols: usize = self.shape[split..].iter().product();
        CMatrix::from_row_slice(rows, cols, &self.data)
    }

    pub fn from_matrix(m: &CMatrix, shape: Vec<usize>) -> Result<Self> {
        let mut data = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            data.extend(m.row(i).iter().copied());
        }
        DenseTensor::new(shape, data)
    }

    /// Sums `self[.., a_k, ..] other[.., b_k, ..]` over paired axes; free axes of
    /// `self` come first, then those of `other`, each in original order.
    pub fn contract(&self, other: &DenseTensor, pairs: &[(usize, usize)]) -> Result<Self> {
        for &(a, b) in pairs {
            if self.shape.get(a) != other.shape.get(b) || self.shape.get(a).is_none() {
                return Err(Error::DimensionMismatch(format!("cannot pair axis {a} of {:?} with axis {b} of {:?}", self.shape, other.shape)));
            }
        }
        let free_a: Vec<usize> = (0..self.rank()).filter(|k| !pairs.iter().any(|p| p.0 == *k)).collect();
        let free_b: Vec<usize> = (0..other.rank()).filter(|k| !pairs.iter().any(|p| p.1 == *k)).collect();
        let perm_a: Vec<usize> = free_a.iter().copied().chain(pairs.iter().map(|p| p.0)).collect();
        let perm_b: Vec<usize> = pairs.iter().map(|p| p.1).chain(free_b.iter().copied()).collect();
        let ma = self.permute(&perm_a).to_matrix(free_a.len());
        let mb = other.permute(&perm_b).to_matrix(pairs.len());
        let shape: Vec<usize> =
            free_a.iter().map(|&k| self.shape[k]).chain(free_b.iter().map(|&k| other.shape[k])).collect();
        DenseTensor::from_matrix(&linalg::mul(&ma, &mb), shape)
    }

    pub fn scale(mut self, z: C64) -> Self {
        self.data.iter_mut().for_each(|x| *x *= z);
        self
    }

    pub fn sub(&self, other: &DenseTensor) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::DimensionMismatch(format!("shapes {:?} and {:?}", self.shape, other.shape)));
        }
        Ok(DenseTensor { shape: self.shape.clone(), data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorFile {
    pub shape: Vec<usize>,
    pub data: ComplexArray,
}

impl From<&DenseTensor> for TensorFile {
    fn from(t: &DenseTensor) -> Self {
        TensorFile { shape: t.shape.clone(), data: ComplexArray(t.data.iter().map(|z| [z.re, z.im]).collect()) }
    }
}

impl TryFrom<&TensorFile> for DenseTensor {
    type Error = Error;

    fn try_from(f: &TensorFile) -> Result<Self> {
        DenseTensor::new(f.shape.clone(), f.data.0.iter().map(|&[re, im]| c64(re, im)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(shape: Vec<usize>) -> DenseTensor {
        let mut k = 0.0f64;
        DenseTensor::from_fn(shape, |_| {
            k += 1.0;
            c64(k.sin(), (2.0 * k).cos())
        })
    }

    #[test]
    fn permute_moves_entries() {
        let t = sample(vec![2, 3, 4]);
        let p = t.permute(&[2, 0, 1]);
        assert_eq!(p.shape(), &[4, 2, 3]);
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..4 {
                    assert_eq!(p.get(&[k, i, j]), t.get(&[i, j, k]));
                }
            }
        }
    }

    #[test]
    fn contraction_matches_loops() {
        let a = sample(vec![2, 3, 4]);
        let b = sample(vec![4, 5, 2]);
        let c = a.contract(&b, &[(2, 0), (0, 2)]).unwrap();
        assert_eq!(c.shape(), &[3, 5]);
        for j in 0..3 {
            for m in 0..5 {
                let mut acc = c64(0.0, 0.0);
                for i in 0..2 {
                    for k in 0..4 {
                        acc += a.get(&[i, j, k]) * b.get(&[k, m, i]);
                    }
                }
                assert!((c.get(&[j, m]) - acc).norm() < 1e-12);
            }
        }
        assert!(a.contract(&b, &[(1, 0)]).is_err());
    }

    #[test]
    fn file_round_trip() {
        let t = sample(vec![2, 2, 3]);
        let f = TensorFile::from(&t);
        assert_eq!(DenseTensor::try_from(&f).unwrap(), t);
        assert!(DenseTensor::new(vec![2, 2], vec![c64(0.0, 0.0); 3]).is_err());
    }
}
