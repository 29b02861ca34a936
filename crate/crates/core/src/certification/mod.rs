//! Fidelity witnesses for time-evolved product states.
//!
//! For a product state `|φ>` and a partition `Y_1..Y_Γ` of the lattice, the
//! parent witness is `G = Σ_i g_i` with `g_i(0) = 1 - |φ_Yi><φ_Yi|`. Its
//! spectrum is `{0, 1, .., Γ}` with a non-degenerate zero eigenvalue, and
//! conjugating by the propagator keeps that spectrum while moving the ground
//! state to `|ψ(t)>`. The truncated witness evolves each `g_i(0)` only under
//! the terms inside `bar R_i`, so it can be measured on `bar R_i` alone.

pub mod measurement;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact_engine::{self, DenseOperator, Evolver};
use crate::hamiltonian::{LocalHamiltonian, StructuralParams};
use crate::io::ComplexArray;
use crate::linalg::{self, c64, CMatrix, CVector, Subsystems};
use crate::lr_bounds;
use crate::metric_lattice::{Cube, Lattice, Region};

pub use measurement::{simulate_measurements, MeasurementEstimate, MeasurementScheme};

/// Tolerance on the norm of each site vector.
pub const STATE_NORM_TOL: f64 = 1e-10;
/// Tolerance on the trace and smallest eigenvalue of a density matrix.
pub const DENSITY_TOL: f64 = 1e-9;

/// Per-site unit vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductState {
    sites: Vec<CVector>,
}

impl ProductState {
    pub fn new(sites: Vec<CVector>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::InvalidState("product state has no sites".into()));
        }
        for (x, v) in sites.iter().enumerate() {
            if v.len() < 2 {
                return Err(Error::InvalidState(format!("site {x} has dimension {} below 2", v.len())));
            }
            if (v.norm() - 1.0).abs() > STATE_NORM_TOL {
                return Err(Error::InvalidState(format!("site {x} vector has norm {}", v.norm())));
            }
        }
        Ok(ProductState { sites })
    }

    /// `|0...0>` on `n` qubits.
    pub fn all_zero(n: usize) -> Result<Self> {
        Self::new(vec![CVector::from_vec(vec![c64(1.0, 0.0), c64(0.0, 0.0)]); n])
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn site(&self, x: usize) -> &CVector {
        &self.sites[x]
    }

    pub fn local_dims(&self) -> Vec<usize> {
        self.sites.iter().map(CVector::len).collect()
    }

    /// Tensor product over the sorted sites of `region`.
    pub fn on_region(&self, region: &Region) -> CVector {
        region.iter().fold(CVector::from_vec(vec![c64(1.0, 0.0)]), |acc, x| acc.kronecker(&self.sites[x]))
    }

    pub fn dense(&self) -> CVector {
        self.on_region(&Region::range(0, self.n_sites()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductStateFile {
    /// One `[re, im]` list per site.
    pub sites: Vec<ComplexArray>,
}

impl ProductStateFile {
    pub fn build(&self) -> Result<ProductState> {
        ProductState::new(self.sites.iter().map(ComplexArray::to_vector).collect())
    }

    pub fn from_state(state: &ProductState) -> Self {
        ProductStateFile { sites: state.sites.iter().map(ComplexArray::from_vector).collect() }
    }
}

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    pub fn new(m: CMatrix) -> Result<Self> {
        linalg::ensure_hermitian(&m, linalg::HERMITIAN_TOL, "density matrix")
            .map_err(|e| Error::InvalidState(e.to_string()))?;
        let tr = linalg::trace(&m);
        if (tr.re - 1.0).abs() > DENSITY_TOL || tr.im.abs() > DENSITY_TOL {
            return Err(Error::InvalidState(format!("density matrix has trace {tr}")));
        }
        let min = linalg::hermitian_eigenvalues(&m).first().copied().unwrap_or(0.0);
        if min < -DENSITY_TOL {
            return Err(Error::InvalidState(format!("density matrix has eigenvalue {min}")));
        }
        Ok(DensityMatrix(m))
    }

    pub fn pure(psi: &CVector) -> Result<Self> {
        Self::new(psi * psi.adjoint())
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// Checks that `partition` is disjoint, non-empty and covers `0..n`.
pub fn validate_partition(partition: &[Region], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for (i, y) in partition.iter().enumerate() {
        if y.is_empty() {
            return Err(Error::InvalidParameter(format!("block {i} is empty")));
        }
        for x in y.iter() {
            if x >= n {
                return Err(Error::UnknownSite { site: x, n_sites: n });
            }
            if std::mem::replace(&mut seen[x], true) {
                return Err(Error::InvalidParameter(format!("site {x} lies in two blocks")));
            }
        }
    }
    match seen.iter().position(|s| !s) {
        Some(x) => Err(Error::InvalidParameter(format!("site {x} is not covered by the partition"))),
        None => Ok(()),
    }
}

pub fn singleton_partition(n: usize) -> Vec<Region> {
    (0..n).map(Region::singleton).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct WitnessSpec {
    pub state: ProductState,
    pub partition: Vec<Region>,
    /// `R_i ⊇ Y_i`; `bar R_i` is the extension of `R_i`.
    pub regions: Vec<Region>,
    pub t: f64,
}

impl WitnessSpec {
    pub fn new(state: ProductState, partition: Vec<Region>, regions: Vec<Region>, t: f64) -> Result<Self> {
        let n = state.n_sites();
        validate_partition(&partition, n)?;
        if regions.len() != partition.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} regions for {} blocks",
                regions.len(),
                partition.len()
            )));
        }
        for (i, (y, r)) in partition.iter().zip(&regions).enumerate() {
            if !y.is_subset(r) {
                return Err(Error::InvalidParameter(format!("block {i} = {y} is not inside its region {r}")));
            }
            if let Some(x) = r.max_site().filter(|&x| x >= n) {
                return Err(Error::UnknownSite { site: x, n_sites: n });
            }
        }
        if !t.is_finite() {
            return Err(Error::InvalidParameter(format!("time {t} is not finite")));
        }
        Ok(WitnessSpec { state, partition, regions, t })
    }

    /// Every `R_i = Λ`, so the truncated witness is exact.
    pub fn untruncated(state: ProductState, partition: Vec<Region>, t: f64) -> Result<Self> {
        let all = Region::range(0, state.n_sites());
        let regions = vec![all; partition.len()];
        Self::new(state, partition, regions, t)
    }

    pub fn gamma_count(&self) -> usize {
        self.partition.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WitnessKind {
    Exact,
    Truncated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WitnessTerm {
    /// The block `Y_i` this term was built from.
    pub block: Region,
    pub operator: DenseOperator,
}

/// `G = Σ_i g_i` with each term stored on its own support.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub kind: WitnessKind,
    pub local_dims: Vec<usize>,
    pub terms: Vec<WitnessTerm>,
}

impl Witness {
    pub fn gamma_count(&self) -> usize {
        self.terms.len()
    }

    pub fn n_sites(&self) -> usize {
        self.local_dims.len()
    }

    /// `G` on the full lattice.
    pub fn dense(&self) -> Result<CMatrix> {
        let all = Region::range(0, self.n_sites());
        let dim: usize = self.local_dims.iter().product();
        exact_engine::check_dim(dim)?;
        let mut out = CMatrix::zeros(dim, dim);
        for term in &self.terms {
            out += exact_engine::embed(&term.operator, &self.local_dims, &all)?.matrix;
        }
        Ok(out)
    }

    /// `Tr(ρ g_i)` per term, from the marginal of `ρ` on each support.
    pub fn expectations(&self, rho: &DensityMatrix) -> Result<Vec<f64>> {
        let dim: usize = self.local_dims.iter().product();
        if rho.dim() != dim {
            return Err(Error::DimensionMismatch(format!("density matrix of dimension {} for {dim}", rho.dim())));
        }
        self.terms
            .iter()
            .map(|term| {
                let marginal = marginal(rho, &self.local_dims, &term.operator.support);
                Ok(linalg::trace(&linalg::mul(&marginal, &term.operator.matrix)).re)
            })
            .collect()
    }

    pub fn expectation(&self, rho: &DensityMatrix) -> Result<f64> {
        Ok(self.expectations(rho)?.iter().sum())
    }

    /// Largest support size.
    pub fn max_support(&self) -> usize {
        self.terms.iter().map(|t| t.operator.support.len()).max().unwrap_or(0)
    }
}

/// Reduced density matrix of `rho` on `region`.
pub fn marginal(rho: &DensityMatrix, local_dims: &[usize], region: &Region) -> CMatrix {
    let positions: Vec<usize> = region.iter().collect();
    Subsystems::new(local_dims, &positions).partial_trace(rho.matrix())
}

/// `g_i(0) = 1 - |φ_Yi><φ_Yi|` for every block.
pub fn product_parent(state: &ProductState, partition: &[Region]) -> Result<Witness> {
    validate_partition(partition, state.n_sites())?;
    let terms = partition
        .iter()
        .map(|y| {
            let phi = state.on_region(y);
            let projector = CMatrix::identity(phi.len(), phi.len()) - &phi * phi.adjoint();
            WitnessTerm { block: y.clone(), operator: DenseOperator::new(projector, y.clone()) }
        })
        .collect();
    Ok(Witness { kind: WitnessKind::Exact, local_dims: state.local_dims(), terms })
}

fn check_dims(spec: &WitnessSpec, h: &LocalHamiltonian) -> Result<()> {
    if spec.state.local_dims() != h.local_dims() {
        return Err(Error::DimensionMismatch("product state and Hamiltonian local dimensions differ".into()));
    }
    Ok(())
}

/// `g_i(t) = U_t0 g_i(0) U_0t` on the full lattice.
pub fn exact_witness(spec: &WitnessSpec, h: &LocalHamiltonian) -> Result<Witness> {
    check_dims(spec, h)?;
    let initial = product_parent(&spec.state, &spec.partition)?;
    let evolver = Evolver::whole(h)?;
    let terms = initial
        .terms
        .into_iter()
        .map(|term| {
            let operator = evolver.evolve(&term.operator, h.local_dims(), spec.t, 0.0)?;
            Ok(WitnessTerm { block: term.block, operator })
        })
        .collect::<Result<_>>()?;
    Ok(Witness { kind: WitnessKind::Exact, local_dims: initial.local_dims, terms })
}

/// `g'_i(t)`: `g_i(0)` evolved by the terms inside `bar R_i`, supported on `bar R_i`.
pub fn truncated_witness(spec: &WitnessSpec, h: &LocalHamiltonian) -> Result<Witness> {
    check_dims(spec, h)?;
    let initial = product_parent(&spec.state, &spec.partition)?;
    let terms = initial
        .terms
        .into_par_iter()
        .zip(spec.regions.par_iter())
        .map(|(term, r)| {
            let bar_r = h.extension(r).union(r);
            let operator = Evolver::new(h, &bar_r)?.evolve(&term.operator, h.local_dims(), spec.t, 0.0)?;
            Ok(WitnessTerm { block: term.block, operator })
        })
        .collect::<Result<_>>()?;
    Ok(Witness { kind: WitnessKind::Truncated, local_dims: initial.local_dims, terms })
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvolvedWitness {
    pub exact: Witness,
    pub truncated: Witness,
}

pub fn evolved_witness(spec: &WitnessSpec, h: &LocalHamiltonian) -> Result<EvolvedWitness> {
    Ok(EvolvedWitness { exact: exact_witness(spec, h)?, truncated: truncated_witness(spec, h)? })
}

/// `β = (E_ρ - E_0)/(E_1 - E_0)`, an upper bound on `1 - <ψ|ρ|ψ>`.
pub fn infidelity_bound(e_rho: f64, e0: f64, e1: f64) -> Result<f64> {
    if !(e1 > e0) {
        return Err(Error::InvalidParameter(format!("gap nonpositive: E1 = {e1}, E0 = {e0}")));
    }
    Ok((e_rho - e0) / (e1 - e0))
}

/// Worst case of `β` over states at trace-norm distance `trace_distance`
/// from the ground state: `||ρ - ψ||_1 ||G|| / (E_1 - E_0)`.
pub fn worst_case_infidelity_bound(trace_distance: f64, g_norm: f64, e0: f64, e1: f64) -> Result<f64> {
    if !(e1 > e0) {
        return Err(Error::InvalidParameter(format!("gap nonpositive: E1 = {e1}, E0 = {e0}")));
    }
    Ok(trace_distance * g_norm / (e1 - e0))
}

/// `δ = (I - Γγ)/2`, the admissible `||G - G'||`.
pub fn delta(infidelity: f64, gamma: f64, gamma_count: usize) -> Result<f64> {
    let slack = infidelity - gamma_count as f64 * gamma;
    if !(slack >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance infeasible: {gamma_count} blocks x gamma {gamma} exceeds I = {infidelity}"
        )));
    }
    Ok(slack / 2.0)
}

/// `δ' = (I - γΓ)/(2(1 + I))`.
pub fn delta_prime(infidelity: f64, gamma: f64, gamma_count: usize) -> Result<f64> {
    Ok(delta(infidelity, gamma, gamma_count)? / (1.0 + infidelity))
}

/// Bound on `1 - <ψ'|ρ|ψ'>` for the ground state `ψ'` of `G'`.
pub fn psi_prime_certificate(e_rho: f64, delta_prime: f64) -> Result<f64> {
    check_delta_prime(delta_prime)?;
    Ok((e_rho + delta_prime) / (1.0 - 2.0 * delta_prime))
}

fn check_delta_prime(delta_prime: f64) -> Result<()> {
    if !(0.0..0.5).contains(&delta_prime) {
        return Err(Error::InvalidParameter(format!(
            "delta' = {delta_prime} must lie in [0, 1/2); the ground state may be degenerate"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasurementStats {
    pub shots_per_term: usize,
    pub e_rho_hat: f64,
    pub std_error: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    /// `Tr(ρ G')`.
    #[serde(rename = "E_rho")]
    pub e_rho: f64,
    #[serde(rename = "E0")]
    pub e0: f64,
    #[serde(rename = "E1")]
    pub e1: f64,
    pub beta: f64,
    pub delta: f64,
    #[serde(rename = "I_target")]
    pub i_target: f64,
    /// Bound on `1 - <ψ(t)|ρ|ψ(t)>`: `Tr(ρG') + δ`.
    pub bound: f64,
    pub within_target: bool,
    /// Bound on `1 - <ψ'|ρ|ψ'>` with `ψ'` the ground state of `G'`.
    pub psi_prime_bound: Option<f64>,
    pub measurement: Option<MeasurementStats>,
}

/// Certificate from the truncated witness; `δ` is the promised `||G - G'||`.
pub fn certify_state(rho: &DensityMatrix, truncated: &Witness, delta: f64, i_target: f64) -> Result<Certificate> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("delta {delta} must be non-negative")));
    }
    let e_rho = truncated.expectation(rho)?;
    let bound = e_rho + delta;
    let dp = delta / (1.0 + i_target);
    Ok(Certificate {
        e_rho,
        e0: 0.0,
        e1: 1.0,
        beta: infidelity_bound(e_rho, 0.0, 1.0)?,
        delta,
        i_target,
        bound,
        within_target: bound <= i_target,
        psi_prime_bound: psi_prime_certificate(e_rho, dp).ok(),
        measurement: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WitnessAnalysis {
    pub delta_prime: f64,
    /// Dense `||G - G'||`.
    pub measured_distance: f64,
    pub e0_prime: f64,
    pub e1_prime: f64,
    pub gap: f64,
    pub gap_bound: f64,
    /// `|<ψ(t)|ψ'>|`.
    pub overlap: f64,
    pub overlap_bound: f64,
    /// `||ψ(t) - ψ'||_1`.
    pub trace_distance: f64,
    pub trace_bound: f64,
    /// Largest shift between matched sorted eigenvalues of `G` and `G'`.
    pub max_eigenvalue_shift: f64,
    pub ground_state: Vec<[f64; 2]>,
}

impl WitnessAnalysis {
    pub fn all_hold(&self) -> bool {
        let tol = 1e-10;
        self.measured_distance <= self.delta_prime + tol
            && self.e0_prime.abs() <= self.delta_prime + tol
            && (self.e1_prime - 1.0).abs() <= self.delta_prime + tol
            && self.gap >= self.gap_bound - tol
            && self.overlap >= self.overlap_bound - tol
            && self.trace_distance <= self.trace_bound + tol
            && self.max_eigenvalue_shift <= self.delta_prime + tol
    }

    /// Bound on `1 - <ψ'|ρ|ψ'>` from `Tr(ρG')`.
    pub fn certificate(&self, e_rho: f64) -> Result<f64> {
        psi_prime_certificate(e_rho, self.delta_prime)
    }
}

/// Dense spectral comparison of `G` and `G'` given `||G - G'|| <= δ' < 1/2`.
///
/// `psi` is the ground state of `G`. Eigenvalues of `G'` lie within `δ'` of
/// those of `G`, so `E0' <= δ'` and `E1' >= 1 - δ'`.
pub fn approx_witness_analysis(exact: &Witness, truncated: &Witness, psi: &CVector, delta_prime: f64) -> Result<WitnessAnalysis> {
    check_delta_prime(delta_prime)?;
    let g = exact.dense()?;
    let g_prime = truncated.dense()?;
    if psi.len() != g.nrows() {
        return Err(Error::DimensionMismatch(format!("state of dimension {} for witness {}", psi.len(), g.nrows())));
    }
    let measured_distance = linalg::op_norm(&(&g - &g_prime));
    let exact_values = linalg::hermitian_eigenvalues(&g);
    let spectral = linalg::Spectral::of_hermitian(&g_prime);
    let max_eigenvalue_shift = exact_values
        .iter()
        .zip(&spectral.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let (e0_prime, e1_prime) = (spectral.values[0], spectral.values[1]);
    let ground: CVector = spectral.vectors.column(0).into_owned();
    let overlap = exact_engine::overlap(psi, &ground).norm();
    Ok(WitnessAnalysis {
        delta_prime,
        measured_distance,
        e0_prime,
        e1_prime,
        gap: e1_prime - e0_prime,
        gap_bound: 1.0 - 2.0 * delta_prime,
        overlap,
        overlap_bound: 1.0 - delta_prime / (1.0 - delta_prime),
        trace_distance: exact_engine::pure_trace_distance(psi, &ground),
        trace_bound: 4.0 * delta_prime.sqrt(),
        max_eigenvalue_shift,
        ground_state: ComplexArray::from_vector(&ground).0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "style", rename_all = "lowercase")]
pub enum PartitionStyle {
    /// `Y_i = {i}`.
    Singleton,
    /// Cubes of edge `⌊D a⌋` on a Chebyshev hypercube.
    Cubes,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegionPlan {
    pub partition: Vec<Region>,
    pub regions: Vec<Region>,
    pub extended_regions: Vec<Region>,
    pub gamma: f64,
    pub delta: f64,
    /// Length scale fixing the block size (cubes) or the radius (singletons).
    #[serde(rename = "D")]
    pub d: f64,
    /// Scaled distance from each block to the outside of its region.
    pub d_a: f64,
    pub radius: f64,
    pub cube_edge: Option<usize>,
    pub max_extended_size: usize,
    /// Whether every block meets the quasilocality precondition.
    pub precondition_holds: bool,
}

impl RegionPlan {
    pub fn gamma_count(&self) -> usize {
        self.partition.len()
    }

    pub fn witness_spec(&self, state: ProductState, t: f64) -> Result<WitnessSpec> {
        WitnessSpec::new(state, self.partition.clone(), self.regions.clone(), t)
    }
}

/// Blocks of edge `omega` tiling a hypercube of edge `edge`.
pub fn cube_blocks(lattice: &Lattice, omega: usize) -> Result<Vec<Region>> {
    let (edge, eta) = lattice
        .hypercube_shape()
        .ok_or_else(|| Error::InvalidLattice("cube blocks need a hypercubic lattice".into()))?;
    if omega == 0 {
        return Err(Error::InvalidParameter("cube edge must be positive".into()));
    }
    let per_axis = edge.div_ceil(omega);
    let count = per_axis.pow(eta as u32);
    (0..count)
        .map(|idx| {
            let mut rest = idx;
            let mut lower = Vec::with_capacity(eta);
            let mut upper = Vec::with_capacity(eta);
            for _ in 0..eta {
                let b = (rest % per_axis) as i64;
                rest /= per_axis;
                lower.push(b * omega as i64 + 1);
                upper.push(((b + 1) * omega as i64).min(edge as i64));
            }
            lattice.cube_region(&Cube::new(lower, upper)?)
        })
        .collect()
}

/// Blocks and regions such that the truncated witness is within
/// `δ = (I - Γγ)/2` of the exact one.
///
/// `gamma` defaults to `I/(2n)`. Regions are `R_i = B^o_r(Y_i)` with
/// `r = d_a a`, where `d_a` is the smallest large-enough scaled distance with
/// per-term error at most `δ/Γ`.
pub fn plan_regions(
    h: &LocalHamiltonian,
    params: &StructuralParams,
    t: f64,
    infidelity: f64,
    gamma: Option<f64>,
    style: PartitionStyle,
    q: f64,
) -> Result<RegionPlan> {
    if !(infidelity > 0.0) {
        return Err(Error::InvalidParameter(format!("target infidelity {infidelity} must be positive")));
    }
    let lattice = h.lattice();
    let n = lattice.n_sites();
    let gamma = gamma.unwrap_or(infidelity / (2.0 * n as f64));
    let (partition, d, cube_edge) = match style {
        PartitionStyle::Singleton => {
            let req = lr_bounds::approx_observable_requirement(n, gamma, infidelity, params, t)?;
            (crate::certification::singleton_partition(n), req.d_min, None)
        }
        PartitionStyle::Cubes => {
            if !lattice.is_chebyshev_hypercube() {
                return Err(Error::InvalidLattice("cube partitions need a hypercube with the max metric".into()));
            }
            let (edge, eta) = lattice.hypercube_shape().expect("hypercube");
            let f = lr_bounds::cube_partition_f(params.a, eta);
            let d = lr_bounds::approx_observable_requirement_with_f(n, gamma, infidelity, params, t, f)?;
            let omega = ((d * params.a + 1e-12).floor().max(1.0) as usize).min(edge);
            (cube_blocks(lattice, omega)?, d, Some(omega))
        }
    };
    let delta = delta(infidelity, gamma, partition.len())?;
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter("tolerance infeasible: delta is zero".into()));
    }
    let req = lr_bounds::required_distance(params, 1.0, t, delta / partition.len() as f64, q)?;
    let radius = req.d_a_min * params.a;
    let regions = partition.iter().map(|y| lattice.open_ball(y, radius)).collect::<Result<Vec<_>>>()?;
    let extended_regions: Vec<Region> = regions.iter().map(|r| h.extension(r).union(r)).collect();
    let precondition_holds = partition.iter().zip(&regions).all(|(y, r)| {
        lr_bounds::TruncationPlan::new(h, params, y, r, q).map_or(false, |p| {
            p.d_a.is_infinite() || lr_bounds::precondition_holds(p.d_a, params.kappa)
        })
    });
    Ok(RegionPlan {
        max_extended_size: extended_regions.iter().map(Region::len).max().unwrap_or(0),
        partition,
        regions,
        extended_regions,
        gamma,
        delta,
        d,
        d_a: req.d_a_min,
        radius,
        cube_edge,
        precondition_holds,
    })
}
