//! Direct integration of the correction equation
//! `∂_x V(x) = i L(x) V(x)`, `V(t) = 1`, `L(x) = U^G_tx A(x) U^G_xt`,
//! from `x = t` down to `x = s`, with the fourth-order commutator-free Magnus
//! scheme on Gauss nodes. Used to cross-check the closed form
//! `V' = U^G_ts U^{G-A}_st`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact_engine::Evolver;
use crate::hamiltonian::LocalHamiltonian;
use crate::linalg::{self, c64, CMatrix, Spectral};
use crate::metric_lattice::Region;

/// Target for the Richardson error estimate per constant segment.
pub const MAGNUS_TOL: f64 = 1e-10;
/// Unitarity drift beyond this is a step-size failure.
const DRIFT_FAIL: f64 = 1e-8;
/// Drift beyond this triggers polar re-projection.
const DRIFT_PROJECT: f64 = 1e-10;
const MAX_STEPS: usize = 1 << 14;

#[derive(Clone, Debug, Serialize)]
pub struct MagnusSolution {
    #[serde(skip)]
    pub v: CMatrix,
    pub steps: usize,
    pub error_estimate: f64,
    pub drift: f64,
    pub reprojected: bool,
}

/// `exp(i theta M)` for Hermitian `M`.
fn exp_i(m: &CMatrix, theta: f64) -> CMatrix {
    linalg::exp_minus_i_hermitian(&linalg::hermitian_part(m), -theta)
}

struct Generator<'a> {
    g: Evolver,
    a: &'a LocalHamiltonian,
    bar_r: &'a Region,
    t: f64,
}

impl Generator<'_> {
    /// Gauss nodes lie strictly inside a constant segment, so `A(x)` is unambiguous.
    fn at(&self, x: f64) -> CMatrix {
        linalg::conjugate(&self.g.u(self.t, x), &self.a.dense_on(self.bar_r, x))
    }

    /// `n` Magnus steps across `[x0, x1]` (in either direction).
    fn sweep(&self, x0: f64, x1: f64, n: usize) -> CMatrix {
        let root3 = 3f64.sqrt();
        let (c1, c2) = (0.5 - root3 / 6.0, 0.5 + root3 / 6.0);
        let (w1, w2) = (0.25 + root3 / 6.0, 0.25 - root3 / 6.0);
        let h = (x1 - x0) / n as f64;
        let dim = self.g.dim();
        let mut v = CMatrix::identity(dim, dim);
        for k in 0..n {
            let x = x0 + k as f64 * h;
            let l1 = self.at(x + c1 * h);
            let l2 = self.at(x + c2 * h);
            let first = exp_i(&(&l1 * c64(w1, 0.0) + &l2 * c64(w2, 0.0)), h);
            let second = exp_i(&(&l1 * c64(w2, 0.0) + &l2 * c64(w1, 0.0)), h);
            v = linalg::mul(&second, &linalg::mul(&first, &v));
        }
        v
    }
}

fn unitarity_drift(v: &CMatrix) -> f64 {
    let n = v.nrows();
    linalg::op_norm(&(linalg::mul(&v.adjoint(), v) - CMatrix::identity(n, n)))
}

/// Nearest unitary `v (v* v)^{-1/2}`.
fn polar_unitary(v: &CMatrix) -> CMatrix {
    let gram = Spectral::of_hermitian(&linalg::mul(&v.adjoint(), v));
    linalg::mul(v, &gram.apply(|l| c64(1.0 / l.max(f64::MIN_POSITIVE).sqrt(), 0.0)))
}

/// Integrates the correction for `A` (the terms of `a`) against the terms of
/// `g` inside `bar_r`. Step counts double per segment until the
/// Richardson estimate is at most `tol`.
pub fn magnus_correction(
    g: &LocalHamiltonian,
    a: &LocalHamiltonian,
    bar_r: &Region,
    t: f64,
    s: f64,
    tol: f64,
) -> Result<MagnusSolution> {
    let gen = Generator { g: Evolver::new(g, bar_r)?, a, bar_r, t };
    let dim = gen.g.dim();
    let (lo, hi) = (s.min(t), s.max(t));
    let mut cuts: Vec<f64> =
        g.breakpoints().into_iter().chain(a.breakpoints()).filter(|&b| b > lo && b < hi).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    // Segment endpoints ordered from t toward s.
    let mut points = vec![t];
    if t >= s {
        points.extend(cuts.iter().rev());
    } else {
        points.extend(cuts.iter());
    }
    points.push(s);

    let mut v = CMatrix::identity(dim, dim);
    let mut steps = 0;
    let mut error_estimate = 0.0f64;
    for w in points.windows(2) {
        if w[0] == w[1] {
            continue;
        }
        let mut n = 4;
        let mut coarse = gen.sweep(w[0], w[1], n);
        loop {
            let fine = gen.sweep(w[0], w[1], 2 * n);
            let diff = &fine - &coarse;
            let est = linalg::op_norm(&diff) / 15.0;
            if est <= tol {
                v = linalg::mul(&(fine + diff * c64(1.0 / 15.0, 0.0)), &v);
                steps += 2 * n;
                error_estimate += est;
                break;
            }
            n *= 2;
            if n > MAX_STEPS {
                return Err(Error::Numerical(format!(
                    "Magnus integration did not reach tolerance {tol:e} on [{}, {}] (estimate {est:e})",
                    w[1], w[0]
                )));
            }
            coarse = fine;
        }
    }
    let drift = unitarity_drift(&v);
    if drift > DRIFT_FAIL {
        return Err(Error::Numerical(format!("correction drifted from unitarity by {drift:e}")));
    }
    let reprojected = drift > DRIFT_PROJECT;
    if reprojected {
        v = polar_unitary(&v);
    }
    Ok(MagnusSolution { v, steps, error_estimate, drift, reprojected })
}
