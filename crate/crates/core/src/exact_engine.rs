//! Dense exact simulation: propagators, Heisenberg-picture evolution, norms,
//! fidelities and the interaction picture.
//!
//! States and operators on a region use the big-endian tensor order of the
//! region's sorted site ids. Evolution of observables is `X -> U_ts X U_st`.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::hamiltonian::LocalHamiltonian;
use crate::linalg::{self, c64, CMatrix, CVector, Spectral, Subsystems, C64};
use crate::metric_lattice::Region;

pub const DEFAULT_DIM_CAP: usize = 1 << 14;
/// Environment variable overriding [`DEFAULT_DIM_CAP`].
pub const DIM_CAP_ENV: &str = "CERTDYN_DIM_CAP";

/// Largest Hilbert-space dimension the dense engine will allocate.
pub fn dim_cap() -> usize {
    static CAP: OnceLock<usize> = OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var(DIM_CAP_ENV).ok().and_then(|v| v.trim().parse().ok()).unwrap_or(DEFAULT_DIM_CAP)
    })
}

pub fn check_dim(dim: usize) -> Result<()> {
    let cap = dim_cap();
    if dim > cap {
        return Err(Error::DimensionCap { dim, cap });
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    pub amplitudes: CVector,
}

impl DenseState {
    pub fn new(amplitudes: CVector) -> Self {
        DenseState { amplitudes }
    }

    /// Computational basis state `|index>`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = CVector::zeros(dim);
        v[index] = c64(1.0, 0.0);
        DenseState { amplitudes: v }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= 1e-10
    }

    pub fn density_matrix(&self) -> CMatrix {
        &self.amplitudes * self.amplitudes.adjoint()
    }
}

/// Matrix acting on the sites of `support`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    pub matrix: CMatrix,
    pub support: Region,
}

impl DenseOperator {
    pub fn new(matrix: CMatrix, support: Region) -> Self {
        DenseOperator { matrix, support }
    }

    pub fn is_unitary(&self) -> bool {
        let n = self.matrix.nrows();
        let gram = linalg::mul(&self.matrix.adjoint(), &self.matrix);
        linalg::op_norm(&(gram - CMatrix::identity(n, n))) <= 1e-9
    }

    pub fn is_hermitian(&self) -> bool {
        linalg::ensure_hermitian(&self.matrix, linalg::HERMITIAN_TOL, "operator").is_ok()
    }
}

fn subsystem_of(op_support: &Region, target: &Region, dims: &[usize]) -> Result<Subsystems> {
    let positions = op_support.positions_in(target).ok_or_else(|| {
        Error::DimensionMismatch(format!("support {op_support} is not inside target region {target}"))
    })?;
    let target_dims: Vec<usize> = target.iter().map(|x| dims[x]).collect();
    Ok(Subsystems::new(&target_dims, &positions))
}

/// `op ⊗ 1` on `target`, which must contain the operator's support.
pub fn embed(op: &DenseOperator, local_dims: &[usize], target: &Region) -> Result<DenseOperator> {
    let sys = subsystem_of(&op.support, target, local_dims)?;
    if op.matrix.nrows() != sys.sub_dim() || op.matrix.ncols() != sys.sub_dim() {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{} but its support has dimension {}",
            op.matrix.nrows(),
            op.matrix.ncols(),
            sys.sub_dim()
        )));
    }
    check_dim(sys.total_dim())?;
    Ok(DenseOperator::new(sys.embed(&op.matrix), target.clone()))
}

/// Reduced operator `Tr_{target \ keep}(m) / dim(target \ keep)`.
pub fn reduce(m: &DenseOperator, local_dims: &[usize], keep: &Region) -> Result<DenseOperator> {
    let sys = subsystem_of(keep, &m.support, local_dims)?;
    let reduced = sys.partial_trace(&m.matrix) * c64(1.0 / sys.rest_dim() as f64, 0.0);
    Ok(DenseOperator::new(reduced, keep.clone()))
}

/// Distance from `m` to the nearest operator of the form `x ⊗ 1` with `x` on
/// `keep`, measured through the partial-trace projection (zero iff `m` acts
/// trivially outside `keep`).
pub fn outside_action(m: &DenseOperator, local_dims: &[usize], keep: &Region) -> Result<f64> {
    let keep = keep.intersection(&m.support);
    let sys = subsystem_of(&keep, &m.support, local_dims)?;
    let reduced = sys.partial_trace(&m.matrix) * c64(1.0 / sys.rest_dim() as f64, 0.0);
    Ok(linalg::op_norm(&(&m.matrix - sys.embed(&reduced))))
}

struct Segment {
    start: f64,
    end: f64,
    spectral: Spectral,
}

/// Propagator factory for the terms of `H` inside a fixed region.
///
/// The Hamiltonian is constant between consecutive breakpoints, so each
/// segment is diagonalized once and reused for every time pair.
pub struct Evolver {
    region: Region,
    dim: usize,
    segments: Vec<Segment>,
}

impl Evolver {
    pub fn new(h: &LocalHamiltonian, region: &Region) -> Result<Self> {
        h.lattice().check_region(region)?;
        let dim = h.dim_of(region);
        check_dim(dim)?;
        let local: Vec<f64> = h
            .restrict(region)
            .breakpoints()
            .into_iter()
            .collect();
        let mut bounds = vec![f64::NEG_INFINITY];
        bounds.extend(local);
        bounds.push(f64::INFINITY);
        let segments = bounds
            .windows(2)
            .map(|w| {
                let sample = match (w[0].is_finite(), w[1].is_finite()) {
                    (true, true) => w[0],
                    (true, false) => w[0],
                    (false, true) => w[1] - 1.0,
                    (false, false) => 0.0,
                };
                Segment { start: w[0], end: w[1], spectral: Spectral::of_hermitian(&h.dense_on(region, sample)) }
            })
            .collect();
        Ok(Evolver { region: region.clone(), dim, segments })
    }

    pub fn whole(h: &LocalHamiltonian) -> Result<Self> {
        Self::new(h, &h.lattice().all_sites())
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Spectrum of the constant segment containing `t`.
    pub fn spectral_at(&self, t: f64) -> &Spectral {
        &self.segments.iter().find(|s| s.start <= t && t < s.end).expect("segments cover the line").spectral
    }

    /// `U_ts`, solving `d/dt U_ts = -i H(t) U_ts` with `U_ss = 1`.
    pub fn u(&self, t: f64, s: f64) -> CMatrix {
        if t < s {
            return self.u(s, t).adjoint();
        }
        let mut out = CMatrix::identity(self.dim, self.dim);
        for seg in &self.segments {
            let lo = seg.start.max(s);
            let hi = seg.end.min(t);
            if hi > lo {
                out = linalg::mul(&seg.spectral.exp_minus_i(hi - lo), &out);
            }
        }
        out
    }

    /// `U_ts X U_st` for an operator on (a subset of) the evolver's region.
    pub fn evolve(&self, x: &DenseOperator, local_dims: &[usize], t: f64, s: f64) -> Result<DenseOperator> {
        let u = self.u(t, s);
        let sys = subsystem_of(&x.support, &self.region, local_dims)?;
        let left = sys.apply_right(&u, &x.matrix);
        Ok(DenseOperator::new(linalg::mul(&left, &u.adjoint()), self.region.clone()))
    }

    pub fn evolve_state(&self, psi: &CVector, t: f64, s: f64) -> CVector {
        linalg::mul_vec(&self.u(t, s), psi)
    }
}

pub fn propagator(h: &LocalHamiltonian, t: f64, s: f64) -> Result<DenseOperator> {
    let ev = Evolver::whole(h)?;
    Ok(DenseOperator::new(ev.u(t, s), ev.region.clone()))
}

/// `U_ts A U_st` on the whole lattice.
pub fn heisenberg_evolve(h: &LocalHamiltonian, a: &DenseOperator, t: f64, s: f64) -> Result<DenseOperator> {
    Evolver::whole(h)?.evolve(a, h.local_dims(), t, s)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatorNorms {
    pub op_norm: f64,
    pub trace_norm: f64,
}

pub fn norms(m: &CMatrix) -> Result<OperatorNorms> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!("norms of a {}x{} matrix", m.nrows(), m.ncols())));
    }
    Ok(OperatorNorms { op_norm: linalg::op_norm(m), trace_norm: linalg::trace_norm(m) })
}

/// `<psi|rho|psi>`.
pub fn fidelity(psi: &CVector, rho: &CMatrix) -> f64 {
    psi.dotc(&linalg::mul_vec(rho, psi)).re
}

/// `1 - <psi|rho|psi>`.
pub fn infidelity(psi: &CVector, rho: &CMatrix) -> f64 {
    1.0 - fidelity(psi, rho)
}

pub fn overlap(psi: &CVector, phi: &CVector) -> C64 {
    psi.dotc(phi)
}

/// `||psi psi* - phi phi*||_1 = 2 sqrt(1 - |<psi|phi>|^2)` for unit vectors.
pub fn pure_trace_distance(psi: &CVector, phi: &CVector) -> f64 {
    2.0 * (1.0 - overlap(psi, phi).norm_sqr()).max(0.0).sqrt()
}

/// Trace-norm bound `2 eps` on `psi psi* - phi phi*` from `||psi - phi|| <= eps <= sqrt 2`.
pub fn trace_bound_from_vector_distance(eps: f64) -> Result<f64> {
    if !(0.0..=std::f64::consts::SQRT_2).contains(&eps) {
        return Err(Error::InvalidParameter(format!("vector distance {eps} outside [0, sqrt 2]")));
    }
    Ok(2.0 * eps)
}

/// From `1 - |<psi|phi>| = eps <= 1`: the phase-optimized vector distance
/// `sqrt(2 eps)` and the trace-norm bound `2 sqrt(2 eps)`.
pub fn bounds_from_overlap(eps: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!("overlap defect {eps} outside [0, 1]")));
    }
    let d = (2.0 * eps).sqrt();
    Ok((d, 2.0 * d))
}

/// Interaction picture for `H = F + G` with reference time `r`.
pub struct DiracPicture {
    f: Evolver,
    h: Evolver,
    g: LocalHamiltonian,
    r: f64,
    all: Region,
}

impl DiracPicture {
    pub fn new(h: &LocalHamiltonian, f: &LocalHamiltonian, g: &LocalHamiltonian, r: f64) -> Result<Self> {
        let all = h.lattice().all_sites();
        let mut times = h.breakpoints();
        times.extend(f.breakpoints());
        times.extend(g.breakpoints());
        times.sort_by(f64::total_cmp);
        times.dedup();
        let mut samples = vec![times.first().map_or(0.0, |t| t - 1.0)];
        samples.extend(times.iter().copied());
        samples.extend(times.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        for t in samples {
            let diff = h.dense_on(&all, t) - f.dense_on(&all, t) - g.dense_on(&all, t);
            if linalg::frobenius_norm(&diff) > 1e-10 {
                return Err(Error::InvalidHamiltonian(format!("F + G differs from H at t = {t}")));
            }
        }
        Ok(DiracPicture { f: Evolver::whole(f)?, h: Evolver::whole(h)?, g: g.clone(), r, all })
    }

    /// `U^F_rt U^H_ts U^F_sr`.
    pub fn u_d(&self, t: f64, s: f64) -> CMatrix {
        linalg::mul(&linalg::mul(&self.f.u(self.r, t), &self.h.u(t, s)), &self.f.u(s, self.r))
    }

    /// `U^F_rt G(t) U^F_tr`.
    pub fn tilde_g(&self, t: f64) -> CMatrix {
        linalg::conjugate(&self.f.u(self.r, t), &self.g.dense_on(&self.all, t))
    }

    /// `U^F_rt A U^F_tr`.
    pub fn observable(&self, a: &CMatrix, t: f64) -> CMatrix {
        linalg::conjugate(&self.f.u(self.r, t), a)
    }

    /// `U^F_rt U^H_tr psi(r)`.
    pub fn state(&self, psi_r: &CVector, t: f64) -> CVector {
        linalg::mul_vec(&linalg::mul(&self.f.u(self.r, t), &self.h.u(t, self.r)), psi_r)
    }

    /// `|| d/dt U_D(t,s) + i G~(t) U_D(t,s) ||` with a central difference of step `step`.
    pub fn ode_residual(&self, t: f64, s: f64, step: f64) -> f64 {
        let derivative = (self.u_d(t + step, s) - self.u_d(t - step, s)) * c64(0.5 / step, 0.0);
        let rhs = linalg::mul(&self.tilde_g(t), &self.u_d(t, s)) * c64(0.0, 1.0);
        linalg::op_norm(&(derivative + rhs))
    }
}
