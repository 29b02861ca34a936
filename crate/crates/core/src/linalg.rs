//! Dense complex linear algebra used by the exact oracle and the witness code.
//!
//! Tensor products are big-endian: the first factor carries the most
//! significant digit of the composite index.

use faer::complex_native::c64 as FaerC64;
use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Relative Hermiticity tolerance for Hamiltonian terms.
pub const TERM_HERMITIAN_TOL: f64 = 1e-12;
/// Relative Hermiticity tolerance for observables and states.
pub const HERMITIAN_TOL: f64 = 1e-10;

const FAST_MUL_THRESHOLD: usize = 1 << 15;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

fn split(m: &CMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
    (m.map(|z| z.re), m.map(|z| z.im))
}

// Dense factorizations and large products go through faer, whose complex
// kernels are both faster and more accurate than nalgebra's.
fn to_faer(m: &CMatrix) -> Mat<FaerC64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| {
        let z = m[(i, j)];
        FaerC64::new(z.re, z.im)
    })
}

fn from_faer(m: faer::MatRef<'_, FaerC64>) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        let z = m.read(i, j);
        c64(z.re, z.im)
    })
}

pub fn mul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.ncols(), b.nrows(), "matrix product shape mismatch");
    if a.nrows() * a.ncols() * b.ncols() < FAST_MUL_THRESHOLD {
        return a * b;
    }
    let p = to_faer(a) * to_faer(b);
    from_faer(p.as_ref())
}

pub fn mul_vec(a: &CMatrix, v: &CVector) -> CVector {
    assert_eq!(a.ncols(), v.len(), "matrix-vector shape mismatch");
    if a.nrows() * a.ncols() < FAST_MUL_THRESHOLD {
        return a * v;
    }
    let (ar, ai) = split(a);
    let vr = v.map(|z| z.re);
    let vi = v.map(|z| z.im);
    let re = &ar * &vr - &ai * &vi;
    let im = &ar * &vi + &ai * &vr;
    CVector::from_fn(re.len(), |i, _| c64(re[i], im[i]))
}

/// `a b a†`.
pub fn conjugate(a: &CMatrix, b: &CMatrix) -> CMatrix {
    mul(&mul(a, b), &a.adjoint())
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    mul(a, b) - mul(b, a)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Largest entry of `|m - m†|`.
pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Rejects `m` unless it is Hermitian up to `tol` relative to its largest entry.
pub fn ensure_hermitian(m: &CMatrix, tol: f64, context: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!("{context}: matrix is {}x{}", m.nrows(), m.ncols())));
    }
    let deviation = hermitian_deviation(m);
    let scale = 1.0 + m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if deviation > tol * scale {
        return Err(Error::NotHermitian { context: context.to_string(), deviation });
    }
    Ok(())
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c64(0.5, 0.0)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct Spectral {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl Spectral {
    pub fn of_hermitian(m: &CMatrix) -> Self {
        let n = m.nrows();
        if n == 0 {
            return Spectral { values: Vec::new(), vectors: CMatrix::zeros(0, 0) };
        }
        let eig = to_faer(&hermitian_part(m)).selfadjoint_eigendecomposition(Side::Lower);
        let s = eig.s().column_vector();
        let raw: Vec<f64> = (0..n).map(|i| s.read(i).re).collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| raw[i].total_cmp(&raw[j]));
        let u = eig.u();
        let values = order.iter().map(|&i| raw[i]).collect();
        let vectors = CMatrix::from_fn(n, n, |r, c| {
            let z = u.read(r, order[c]);
            c64(z.re, z.im)
        });
        Spectral { values, vectors }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// `f(m)` for a scalar function applied to the spectrum.
    pub fn apply(&self, f: impl Fn(f64) -> C64) -> CMatrix {
        let mut scaled = self.vectors.clone();
        for (c, &lambda) in self.values.iter().enumerate() {
            let w = f(lambda);
            for z in scaled.column_mut(c).iter_mut() {
                *z *= w;
            }
        }
        mul(&scaled, &self.vectors.adjoint())
    }

    /// `exp(-i theta m)`.
    pub fn exp_minus_i(&self, theta: f64) -> CMatrix {
        self.apply(|lambda| C64::from_polar(1.0, -lambda * theta))
    }

    /// Orthogonal projector onto eigenvectors with eigenvalue below `threshold`.
    pub fn projector_below(&self, threshold: f64) -> CMatrix {
        self.apply(|lambda| if lambda < threshold { c64(1.0, 0.0) } else { c64(0.0, 0.0) })
    }
}

pub fn exp_minus_i_hermitian(h: &CMatrix, theta: f64) -> CMatrix {
    Spectral::of_hermitian(h).exp_minus_i(theta)
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> =
        to_faer(&hermitian_part(m)).selfadjoint_eigenvalues(Side::Lower).into_iter().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn hermitian_op_norm(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    to_faer(m).singular_values()
}

/// Thin SVD `m = U diag(s) V^†` with descending `s`.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

impl Svd {
    pub fn of(m: &CMatrix) -> Self {
        let (r, c) = m.shape();
        if r == 0 || c == 0 {
            let k = r.min(c);
            return Svd { u: CMatrix::zeros(r, k), s: Vec::new(), v: CMatrix::zeros(c, k) };
        }
        let svd = to_faer(m).thin_svd();
        let s: Vec<f64> = svd.s_diagonal().iter().map(|z| z.re).collect();
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
        let (fu, fv) = (svd.u(), svd.v());
        let u = CMatrix::from_fn(r, s.len(), |i, k| {
            let z = fu.read(i, order[k]);
            c64(z.re, z.im)
        });
        let v = CMatrix::from_fn(c, s.len(), |i, k| {
            let z = fv.read(i, order[k]);
            c64(z.re, z.im)
        });
        Svd { u, s: order.iter().map(|&k| s[k]).collect(), v }
    }

    /// Keeps the leading `rank` singular triples.
    pub fn truncated(self, rank: usize) -> Self {
        let rank = rank.min(self.s.len());
        Svd { u: self.u.columns(0, rank).into_owned(), s: self.s[..rank].to_vec(), v: self.v.columns(0, rank).into_owned() }
    }

    /// Number of singular values above `rel * s_max`, at least one.
    pub fn rank_above(&self, rel: f64) -> usize {
        let max = self.s.first().copied().unwrap_or(0.0);
        self.s.iter().filter(|&&x| x > rel * max).count().max(1).min(self.s.len())
    }
}

/// Largest singular value.
pub fn op_norm(m: &CMatrix) -> f64 {
    singular_values(m).into_iter().fold(0.0, f64::max)
}

pub fn trace_norm(m: &CMatrix) -> f64 {
    singular_values(m).into_iter().sum()
}

pub fn frobenius_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn pauli(label: char) -> Option<CMatrix> {
    let o = c64(0.0, 0.0);
    let l = c64(1.0, 0.0);
    let i = c64(0.0, 1.0);
    let entries = match label {
        'I' => [l, o, o, l],
        'X' => [o, l, l, o],
        'Y' => [o, -i, i, o],
        'Z' => [l, o, o, -l],
        _ => return None,
    };
    Some(CMatrix::from_row_slice(2, 2, &entries))
}

/// Tensor product of single-qubit Paulis named by `labels`, e.g. `"XZ"`.
pub fn pauli_string(labels: &str) -> Option<CMatrix> {
    let mut out = CMatrix::identity(1, 1);
    for ch in labels.chars() {
        out = kron(&out, &pauli(ch)?);
    }
    Some(out)
}

/// Index bookkeeping for a subsystem embedded in a tensor product space.
///
/// `index[r * sub_dim + s]` is the composite index whose subsystem digit is
/// `s` and whose complement digit is `r`, both big-endian in site order.
#[derive(Clone, Debug)]
pub struct Subsystems {
    sub_dim: usize,
    rest_dim: usize,
    index: Vec<usize>,
}

impl Subsystems {
    /// `positions` must be strictly increasing factor indices into `dims`.
    pub fn new(dims: &[usize], positions: &[usize]) -> Self {
        assert!(positions.windows(2).all(|w| w[0] < w[1]), "positions must increase");
        assert!(positions.iter().all(|&p| p < dims.len()), "position out of range");
        let total: usize = dims.iter().product();
        let mut in_sub = vec![false; dims.len()];
        for &p in positions {
            in_sub[p] = true;
        }
        let sub_dim: usize = positions.iter().map(|&p| dims[p]).product();
        let rest_dim = total / sub_dim;
        let mut index = vec![0usize; total];
        let mut digits = vec![0usize; dims.len()];
        for f in 0..total {
            let mut rem = f;
            for k in (0..dims.len()).rev() {
                digits[k] = rem % dims[k];
                rem /= dims[k];
            }
            let (mut s, mut r) = (0usize, 0usize);
            for k in 0..dims.len() {
                if in_sub[k] {
                    s = s * dims[k] + digits[k];
                } else {
                    r = r * dims[k] + digits[k];
                }
            }
            index[r * sub_dim + s] = f;
        }
        Subsystems { sub_dim, rest_dim, index }
    }

    pub fn sub_dim(&self) -> usize {
        self.sub_dim
    }

    pub fn rest_dim(&self) -> usize {
        self.rest_dim
    }

    pub fn total_dim(&self) -> usize {
        self.sub_dim * self.rest_dim
    }

    #[inline]
    pub fn full_index(&self, rest: usize, sub: usize) -> usize {
        self.index[rest * self.sub_dim + sub]
    }

    /// `op ⊗ 1` in the composite ordering.
    pub fn embed(&self, op: &CMatrix) -> CMatrix {
        assert_eq!(op.nrows(), self.sub_dim);
        let n = self.total_dim();
        let mut out = CMatrix::zeros(n, n);
        for r in 0..self.rest_dim {
            for a in 0..self.sub_dim {
                let fa = self.full_index(r, a);
                for b in 0..self.sub_dim {
                    let v = op[(a, b)];
                    if v != C64::new(0.0, 0.0) {
                        out[(fa, self.full_index(r, b))] = v;
                    }
                }
            }
        }
        out
    }

    /// Trace over the complement of the subsystem.
    pub fn partial_trace(&self, m: &CMatrix) -> CMatrix {
        assert_eq!(m.nrows(), self.total_dim());
        let mut out = CMatrix::zeros(self.sub_dim, self.sub_dim);
        for r in 0..self.rest_dim {
            for a in 0..self.sub_dim {
                let fa = self.full_index(r, a);
                for b in 0..self.sub_dim {
                    out[(a, b)] += m[(fa, self.full_index(r, b))];
                }
            }
        }
        out
    }

    /// `(op ⊗ 1) m` without forming the embedded operator.
    pub fn apply_left(&self, op: &CMatrix, m: &CMatrix) -> CMatrix {
        assert_eq!(op.nrows(), self.sub_dim);
        assert_eq!(m.nrows(), self.total_dim());
        let cols = m.ncols();
        let mut out = CMatrix::zeros(m.nrows(), cols);
        let mut block = CMatrix::zeros(self.sub_dim, cols);
        for r in 0..self.rest_dim {
            for s in 0..self.sub_dim {
                block.row_mut(s).copy_from(&m.row(self.full_index(r, s)));
            }
            let image = mul(op, &block);
            for s in 0..self.sub_dim {
                out.row_mut(self.full_index(r, s)).copy_from(&image.row(s));
            }
        }
        out
    }

    /// `m (op ⊗ 1)` without forming the embedded operator.
    pub fn apply_right(&self, m: &CMatrix, op: &CMatrix) -> CMatrix {
        self.apply_left(&op.adjoint(), &m.adjoint()).adjoint()
    }

    pub fn apply_left_vec(&self, op: &CMatrix, v: &CVector) -> CVector {
        assert_eq!(v.len(), self.total_dim());
        let mut out = CVector::zeros(v.len());
        for r in 0..self.rest_dim {
            for a in 0..self.sub_dim {
                let mut acc = C64::new(0.0, 0.0);
                for b in 0..self.sub_dim {
                    acc += op[(a, b)] * v[self.full_index(r, b)];
                }
                out[self.full_index(r, a)] = acc;
            }
        }
        out
    }

    /// `(u ⊗ 1) m (u† ⊗ 1)`.
    pub fn conjugate(&self, u: &CMatrix, m: &CMatrix) -> CMatrix {
        self.apply_right(&self.apply_left(u, m), &u.adjoint())
    }
}
