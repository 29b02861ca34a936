//! Local Hamiltonians `H(t) = sum_Z h_Z(t)` on a finite lattice, their
//! structural parameters, and restrictions and splittings of them.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::ComplexArray;
use crate::linalg::{self, c64, CMatrix, Subsystems};
use crate::metric_lattice::{self, Lattice, LatticeSpec, Region, SiteId, DIST_TOL};

/// Constant interval of a piecewise-constant schedule, `[start, end)`.
#[derive(Clone, Debug)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    pub matrix: CMatrix,
}

/// Time dependence of a term. Outside every piece a piecewise term is zero.
#[derive(Clone, Debug)]
pub enum Schedule {
    Constant(CMatrix),
    Piecewise(Vec<Piece>),
}

impl Schedule {
    pub fn at(&self, t: f64) -> Option<&CMatrix> {
        match self {
            Schedule::Constant(m) => Some(m),
            Schedule::Piecewise(pieces) => pieces.iter().find(|p| p.start <= t && t < p.end).map(|p| &p.matrix),
        }
    }

    pub fn matrices(&self) -> Vec<&CMatrix> {
        match self {
            Schedule::Constant(m) => vec![m],
            Schedule::Piecewise(pieces) => pieces.iter().map(|p| &p.matrix).collect(),
        }
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Schedule::Constant(_) => Vec::new(),
            Schedule::Piecewise(pieces) => pieces.iter().flat_map(|p| [p.start, p.end]).collect(),
        }
    }

    fn map(&self, f: impl Fn(&CMatrix) -> CMatrix) -> Schedule {
        match self {
            Schedule::Constant(m) => Schedule::Constant(f(m)),
            Schedule::Piecewise(pieces) => Schedule::Piecewise(
                pieces.iter().map(|p| Piece { start: p.start, end: p.end, matrix: f(&p.matrix) }).collect(),
            ),
        }
    }

    fn validate(&self, dim: usize, context: &str) -> Result<()> {
        if let Schedule::Piecewise(pieces) = self {
            for p in pieces {
                if !(p.start.is_finite() && p.end.is_finite() && p.start < p.end) {
                    return Err(Error::InvalidSchedule(format!("{context}: bad interval [{}, {})", p.start, p.end)));
                }
            }
            if pieces.windows(2).any(|w| w[0].end > w[1].start) {
                return Err(Error::InvalidSchedule(format!("{context}: intervals overlap or are unsorted")));
            }
        }
        for m in self.matrices() {
            if m.nrows() != dim || m.ncols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "{context}: matrix is {}x{}, support needs {dim}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            linalg::ensure_hermitian(m, linalg::TERM_HERMITIAN_TOL, context)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct LocalTerm {
    pub support: Region,
    pub schedule: Schedule,
}

impl LocalTerm {
    pub fn constant(support: impl Into<Region>, matrix: CMatrix) -> Self {
        LocalTerm { support: support.into(), schedule: Schedule::Constant(matrix) }
    }

    pub fn piecewise(support: impl Into<Region>, pieces: Vec<Piece>) -> Self {
        LocalTerm { support: support.into(), schedule: Schedule::Piecewise(pieces) }
    }

    pub fn at(&self, t: f64) -> Option<&CMatrix> {
        self.schedule.at(t)
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.schedule, Schedule::Constant(_))
    }
}

/// Distinct support together with the terms living on it.
#[derive(Clone, Debug)]
pub struct SupportGroup {
    pub support: Region,
    pub terms: Vec<usize>,
    /// `sup_t ||sum of the group's terms at t||`.
    pub sup_norm: f64,
}

/// Group sums below this norm count as absent.
const ZERO_TERM_NORM: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct LocalHamiltonian {
    lattice: Arc<Lattice>,
    local_dims: Vec<usize>,
    terms: Vec<LocalTerm>,
    groups: Vec<SupportGroup>,
}

impl LocalHamiltonian {
    /// Validated Hamiltonian in which every site is touched by a non-zero term.
    pub fn new(lattice: Arc<Lattice>, local_dims: Vec<usize>, terms: Vec<LocalTerm>) -> Result<Self> {
        let h = Self::partial(lattice, local_dims, terms)?;
        let covered = h.supports().iter().fold(Region::empty(), |acc, z| acc.union(z));
        if covered.len() != h.n_sites() {
            let missing = h.lattice.all_sites().difference(&covered);
            return Err(Error::InvalidHamiltonian(format!("sites {missing} carry no non-zero term")));
        }
        Ok(h)
    }

    pub fn qubits(lattice: Arc<Lattice>, terms: Vec<LocalTerm>) -> Result<Self> {
        let n = lattice.n_sites();
        Self::new(lattice, vec![2; n], terms)
    }

    /// Validated Hamiltonian without the site-coverage requirement, as produced
    /// by restrictions and splittings.
    pub fn partial(lattice: Arc<Lattice>, local_dims: Vec<usize>, terms: Vec<LocalTerm>) -> Result<Self> {
        if local_dims.len() != lattice.n_sites() {
            return Err(Error::DimensionMismatch(format!(
                "{} local dimensions for {} sites",
                local_dims.len(),
                lattice.n_sites()
            )));
        }
        if let Some(x) = local_dims.iter().position(|&d| d < 2) {
            return Err(Error::InvalidHamiltonian(format!("site {x} has local dimension below 2")));
        }
        for (k, term) in terms.iter().enumerate() {
            if term.support.is_empty() {
                return Err(Error::InvalidHamiltonian(format!("term {k} has an empty support")));
            }
            lattice.check_region(&term.support)?;
            let dim: usize = term.support.iter().map(|x| local_dims[x]).product();
            term.schedule.validate(dim, &format!("term {k} on {}", term.support))?;
        }
        let groups = build_groups(&terms);
        Ok(LocalHamiltonian { lattice, local_dims, terms, groups })
    }

    fn derived(&self, terms: Vec<LocalTerm>) -> Self {
        let groups = build_groups(&terms);
        LocalHamiltonian { lattice: Arc::clone(&self.lattice), local_dims: self.local_dims.clone(), terms, groups }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn lattice_arc(&self) -> Arc<Lattice> {
        Arc::clone(&self.lattice)
    }

    pub fn n_sites(&self) -> usize {
        self.lattice.n_sites()
    }

    pub fn local_dims(&self) -> &[usize] {
        &self.local_dims
    }

    pub fn terms(&self) -> &[LocalTerm] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn dims_of(&self, region: &Region) -> Vec<usize> {
        region.iter().map(|x| self.local_dims[x]).collect()
    }

    pub fn dim_of(&self, region: &Region) -> usize {
        region.iter().map(|x| self.local_dims[x]).product()
    }

    pub fn total_dim(&self) -> usize {
        self.local_dims.iter().product()
    }

    /// Distinct supports of non-zero terms, sorted.
    pub fn supports(&self) -> Vec<Region> {
        self.groups.iter().map(|g| g.support.clone()).collect()
    }

    pub fn support_groups(&self) -> &[SupportGroup] {
        &self.groups
    }

    /// Union of the supports of non-zero terms meeting `r`.
    pub fn extension(&self, r: &Region) -> Region {
        metric_lattice::extension(self.groups.iter().map(|g| &g.support), r)
    }

    pub fn is_time_independent(&self) -> bool {
        self.terms.iter().all(LocalTerm::is_constant)
    }

    /// Sorted, deduplicated schedule breakpoints of all terms.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self.terms.iter().flat_map(|t| t.schedule.breakpoints()).collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }

    /// `H_V`: the terms whose support lies inside `v`.
    pub fn restrict(&self, v: &Region) -> Self {
        self.derived(self.terms.iter().filter(|t| t.support.is_subset(v)).cloned().collect())
    }

    pub fn select(&self, keep: impl Fn(&LocalTerm) -> bool) -> Self {
        self.derived(self.terms.iter().filter(|t| keep(t)).cloned().collect())
    }

    pub fn with_terms(&self, terms: Vec<LocalTerm>) -> Result<Self> {
        Self::partial(Arc::clone(&self.lattice), self.local_dims.clone(), terms)
    }

    /// Single-site terms and the remaining interactions.
    pub fn interaction_split(&self) -> Result<InteractionSplit> {
        let f = self.select(|t| t.support.len() == 1);
        let g = self.select(|t| t.support.len() >= 2);
        if g.is_empty() {
            return Err(Error::InvalidHamiltonian("no interactions: every term is single-site".into()));
        }
        Ok(InteractionSplit { f, g })
    }

    /// Moves the single-site content of every multi-site term into separate
    /// single-site terms.
    ///
    /// Each multi-site term keeps only its component that is trace-orthogonal
    /// to operators of the form `o_x ⊗ 1`; the dense Hamiltonian is unchanged.
    pub fn without_single_site_parts(&self) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            if term.support.len() < 2 {
                terms.push(term.clone());
                continue;
            }
            let dims = self.dims_of(&term.support);
            let total: usize = dims.iter().product();
            let mut shifts = Vec::new();
            for (pos, x) in term.support.iter().enumerate() {
                let sys = Subsystems::new(&dims, &[pos]);
                let d_rest = (total / dims[pos]) as f64;
                let shift = term.schedule.map(|m| {
                    let reduced = sys.partial_trace(m) * c64(1.0 / d_rest, 0.0);
                    let tr = linalg::trace(&reduced) / c64(dims[pos] as f64, 0.0);
                    reduced - CMatrix::identity(dims[pos], dims[pos]) * tr
                });
                shifts.push((x, pos, sys, shift));
            }
            let mut reduced = term.schedule.clone();
            for (_, _, sys, shift) in &shifts {
                reduced = match (&reduced, shift) {
                    (Schedule::Constant(m), Schedule::Constant(s)) => Schedule::Constant(m - sys.embed(s)),
                    (Schedule::Piecewise(ps), Schedule::Piecewise(ss)) => Schedule::Piecewise(
                        ps.iter()
                            .zip(ss)
                            .map(|(p, s)| Piece { start: p.start, end: p.end, matrix: &p.matrix - sys.embed(&s.matrix) })
                            .collect(),
                    ),
                    _ => unreachable!("shift shares the schedule shape"),
                };
            }
            terms.push(LocalTerm { support: term.support.clone(), schedule: reduced });
            for (x, _, _, shift) in shifts {
                terms.push(LocalTerm { support: Region::singleton(x), schedule: shift });
            }
        }
        self.derived(terms)
    }

    /// Dense `H(t)` for the terms inside `region`, on the space of `region`.
    pub fn dense_on(&self, region: &Region, t: f64) -> CMatrix {
        let dims = self.dims_of(region);
        let dim: usize = dims.iter().product();
        let mut out = CMatrix::zeros(dim, dim);
        for term in &self.terms {
            let Some(m) = term.at(t) else { continue };
            let Some(positions) = term.support.positions_in(region) else { continue };
            out += Subsystems::new(&dims, &positions).embed(m);
        }
        out
    }
}

fn build_groups(terms: &[LocalTerm]) -> Vec<SupportGroup> {
    let mut by_support: BTreeMap<Region, Vec<usize>> = BTreeMap::new();
    for (k, t) in terms.iter().enumerate() {
        by_support.entry(t.support.clone()).or_default().push(k);
    }
    by_support
        .into_iter()
        .filter_map(|(support, idx)| {
            let mut times: Vec<f64> = idx.iter().flat_map(|&k| terms[k].schedule.breakpoints()).collect();
            times.sort_by(f64::total_cmp);
            times.dedup();
            let samples: Vec<f64> = if times.is_empty() {
                vec![0.0]
            } else {
                let mut s = vec![times[0] - 1.0, times[times.len() - 1] + 1.0];
                s.extend(times.windows(2).map(|w| 0.5 * (w[0] + w[1])));
                s
            };
            let dim = terms[idx[0]].schedule.matrices()[0].nrows();
            let sup_norm = samples
                .iter()
                .map(|&t| {
                    let mut sum = CMatrix::zeros(dim, dim);
                    for &k in &idx {
                        if let Some(m) = terms[k].at(t) {
                            sum += m;
                        }
                    }
                    linalg::hermitian_op_norm(&sum)
                })
                .fold(0.0, f64::max);
            (sup_norm > ZERO_TERM_NORM).then_some(SupportGroup { support, terms: idx, sup_norm })
        })
        .collect()
}

/// `H = F + G` with `F` the single-site terms.
#[derive(Clone, Debug)]
pub struct InteractionSplit {
    pub f: LocalHamiltonian,
    pub g: LocalHamiltonian,
}

/// Structural constants entering the Lieb-Robinson bounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StructuralParams {
    /// Twice the largest term norm.
    #[serde(rename = "J")]
    pub j: f64,
    /// Interaction range: largest support diameter.
    pub a: f64,
    /// Largest number of supports meeting a given support, itself included.
    #[serde(rename = "Z")]
    pub z: usize,
    /// Shell-count prefactor: `|R_{r,y}| <= M r^kappa`.
    #[serde(rename = "M")]
    pub m: f64,
    pub kappa: f64,
    /// Largest number of sites in a support.
    #[serde(rename = "Y")]
    pub y: usize,
    /// Lieb-Robinson velocity `J Z e`.
    pub v: f64,
    /// Largest innermost shell `|R_{0,y}|`, which the fit of `M` skips when `kappa > 0`.
    pub zero_shell_max: usize,
    /// Largest shell index included in the fit.
    pub r_max: usize,
}

impl StructuralParams {
    /// `ln(2M/Z)`.
    pub fn c1(&self) -> f64 {
        (2.0 * self.m / self.z as f64).ln()
    }
}

#[derive(Clone, Debug, Default)]
pub struct ParamOptions {
    /// Shell exponent; defaults to `eta - 1` on hypercubes and 0 on graphs.
    pub kappa: Option<f64>,
    /// Largest shell index to fit; defaults to the outermost non-empty shell.
    pub r_max: Option<usize>,
}

pub fn velocity(j: f64, z: usize) -> f64 {
    j * z as f64 * std::f64::consts::E
}

pub fn default_kappa(lattice: &Lattice) -> f64 {
    lattice.hypercube_shape().map_or(0.0, |(_, eta)| eta as f64 - 1.0)
}

/// Computes `J`, `a`, `Z`, `Y` by enumeration and fits the smallest `M` for the
/// chosen `kappa`. The shell `R_{r,y}` holds the supports `Z` with
/// `d(y, Z)/a` in `[r, r+1)`; the fit covers `r >= 1`, and also `r = 0` when
/// `kappa = 0`. `M` is at least 1.
pub fn structural_params(h: &LocalHamiltonian, opts: &ParamOptions) -> Result<StructuralParams> {
    let groups = h.support_groups();
    if groups.is_empty() {
        return Err(Error::InvalidHamiltonian("Hamiltonian has no non-zero terms".into()));
    }
    let lattice = h.lattice();
    let kappa = opts.kappa.unwrap_or_else(|| default_kappa(lattice));
    if !(kappa >= 0.0) {
        return Err(Error::InvalidParameter(format!("shell exponent kappa = {kappa} must be non-negative")));
    }
    let j = 2.0 * groups.iter().map(|g| g.sup_norm).fold(0.0, f64::max);
    let supports: Vec<&Region> = groups.iter().map(|g| &g.support).collect();
    let a = supports.iter().map(|z| lattice.diameter(z)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    let z = supports.iter().map(|s| supports.iter().filter(|o| o.intersects(s)).count()).max().unwrap_or(1);
    let y = supports.iter().map(|s| s.len()).max().unwrap_or(1);
    if a <= 0.0 {
        return Err(Error::InvalidHamiltonian(
            "every support is a single site, so the interaction range is zero and shells are undefined".into(),
        ));
    }
    // shells[y][r] = |R_{r,y}|
    let mut shells: Vec<Vec<usize>> = Vec::with_capacity(lattice.n_sites());
    for site in 0..lattice.n_sites() {
        let mut counts = Vec::new();
        for s in &supports {
            let r = (lattice.dist_to_region(site, s) / a + DIST_TOL).floor() as usize;
            if counts.len() <= r {
                counts.resize(r + 1, 0);
            }
            counts[r] += 1;
        }
        shells.push(counts);
    }
    let outermost = shells.iter().map(|c| c.len() - 1).max().unwrap_or(0);
    let r_max = opts.r_max.unwrap_or(outermost);
    let first = if kappa == 0.0 { 0 } else { 1 };
    let mut m = 1.0f64;
    for counts in &shells {
        for (r, &count) in counts.iter().enumerate().take(r_max + 1).skip(first) {
            let weight = if r == 0 { 1.0 } else { (r as f64).powf(kappa) };
            m = m.max(count as f64 / weight);
        }
    }
    let zero_shell_max = shells.iter().map(|c| c[0]).max().unwrap_or(0);
    Ok(StructuralParams { j, a, z, m, kappa, y, v: velocity(j, z), zero_shell_max, r_max })
}

/// Shell counts `|R_{r,y}|` for a single site, indexed by `r`.
pub fn shell_counts(h: &LocalHamiltonian, site: SiteId, a: f64) -> Vec<usize> {
    let lattice = h.lattice();
    let mut counts = Vec::new();
    for g in h.support_groups() {
        let r = (lattice.dist_to_region(site, &g.support) / a + DIST_TOL).floor() as usize;
        if counts.len() <= r {
            counts.resize(r + 1, 0);
        }
        counts[r] += 1;
    }
    counts
}

/// Size argument for the built-in models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelSize {
    Chain(usize),
    Grid { edge_length: usize, eta: usize },
}

/// `(XX + YY + ZZ) / 3`, whose operator norm is 1.
pub fn heisenberg_bond() -> CMatrix {
    let xx = linalg::pauli_string("XX").expect("pauli");
    let yy = linalg::pauli_string("YY").expect("pauli");
    let zz = linalg::pauli_string("ZZ").expect("pauli");
    (xx + yy + zz) * c64(1.0 / 3.0, 0.0)
}

fn nn_model(lattice: Lattice, bond: CMatrix, field: Option<CMatrix>) -> Result<LocalHamiltonian> {
    let lattice = Arc::new(lattice);
    let mut terms: Vec<LocalTerm> =
        lattice.edges().into_iter().map(|(x, y)| LocalTerm::constant([x, y], bond.clone())).collect();
    if let Some(f) = field {
        terms.extend((0..lattice.n_sites()).map(|x| LocalTerm::constant([x], f.clone())));
    }
    LocalHamiltonian::qubits(lattice, terms)
}

fn chain_lattice(n: usize) -> Result<Lattice> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("chain length {n} is below 2")));
    }
    Lattice::chain(n)
}

/// Isotropic Heisenberg chain whose bond terms have norm `bond_norm`.
pub fn heisenberg_chain(n: usize, bond_norm: f64) -> Result<LocalHamiltonian> {
    nn_model(chain_lattice(n)?, heisenberg_bond() * c64(bond_norm, 0.0), None)
}

/// `sum_j coupling Z_j Z_{j+1}`.
pub fn ising_chain_zz(n: usize, coupling: f64) -> Result<LocalHamiltonian> {
    nn_model(chain_lattice(n)?, linalg::pauli_string("ZZ").expect("pauli") * c64(coupling, 0.0), None)
}

/// `sum_j coupling Z_j Z_{j+1} + field sum_j X_j`.
pub fn ising_transverse(n: usize, coupling: f64, field: f64) -> Result<LocalHamiltonian> {
    nn_model(
        chain_lattice(n)?,
        linalg::pauli_string("ZZ").expect("pauli") * c64(coupling, 0.0),
        Some(linalg::pauli('X').expect("pauli") * c64(field, 0.0)),
    )
}

/// Nearest-neighbour Heisenberg model on `[1:L]^eta`.
pub fn heisenberg_grid(edge_length: usize, eta: usize, bond_norm: f64) -> Result<LocalHamiltonian> {
    if edge_length < 2 {
        return Err(Error::InvalidParameter(format!("edge length {edge_length} is below 2")));
    }
    nn_model(Lattice::hypercube(edge_length, eta)?, heisenberg_bond() * c64(bond_norm, 0.0), None)
}

/// Builds a named model. Couplings default to 1 when omitted.
pub fn build_model(kind: &str, size: ModelSize, couplings: &[f64]) -> Result<LocalHamiltonian> {
    let c = |k: usize| couplings.get(k).copied().unwrap_or(1.0);
    match (kind, size) {
        ("heisenberg_chain", ModelSize::Chain(n)) => heisenberg_chain(n, c(0)),
        ("ising_chain_zz", ModelSize::Chain(n)) => ising_chain_zz(n, c(0)),
        ("ising_transverse", ModelSize::Chain(n)) => ising_transverse(n, c(0), c(1)),
        ("heisenberg_grid", ModelSize::Grid { edge_length, eta }) => heisenberg_grid(edge_length, eta, c(0)),
        ("heisenberg_chain" | "ising_chain_zz" | "ising_transverse" | "heisenberg_grid", _) => {
            Err(Error::InvalidParameter(format!("model {kind} does not accept size {size:?}")))
        }
        _ => Err(Error::InvalidParameter(format!("unknown model kind {kind:?}"))),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PieceFile {
    pub start: f64,
    pub end: f64,
    pub matrix: ComplexArray,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermFile {
    pub support: Vec<SiteId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<ComplexArray>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Vec<PieceFile>>,
}

/// On-disk Hamiltonian description. Local dimensions default to 2.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HamiltonianFile {
    pub lattice: LatticeSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_dims: Option<Vec<usize>>,
    pub terms: Vec<TermFile>,
}

impl HamiltonianFile {
    pub fn build(&self) -> Result<LocalHamiltonian> {
        let lattice = Arc::new(Lattice::from_spec(&self.lattice)?);
        let dims = self.local_dims.clone().unwrap_or_else(|| vec![2; lattice.n_sites()]);
        let mut terms = Vec::with_capacity(self.terms.len());
        for (k, t) in self.terms.iter().enumerate() {
            let schedule = match (&t.matrix, &t.schedule) {
                (Some(m), None) => Schedule::Constant(m.to_square_matrix()?),
                (None, Some(pieces)) => Schedule::Piecewise(
                    pieces
                        .iter()
                        .map(|p| Ok(Piece { start: p.start, end: p.end, matrix: p.matrix.to_square_matrix()? }))
                        .collect::<Result<_>>()?,
                ),
                _ => return Err(Error::Format(format!("term {k} needs exactly one of matrix or schedule"))),
            };
            terms.push(LocalTerm { support: Region::from(t.support.clone()), schedule });
        }
        LocalHamiltonian::new(lattice, dims, terms)
    }

    pub fn from_hamiltonian(h: &LocalHamiltonian) -> Self {
        let terms = h
            .terms()
            .iter()
            .map(|t| match &t.schedule {
                Schedule::Constant(m) => TermFile {
                    support: t.support.sites().to_vec(),
                    matrix: Some(ComplexArray::from_matrix(m)),
                    schedule: None,
                },
                Schedule::Piecewise(ps) => TermFile {
                    support: t.support.sites().to_vec(),
                    matrix: None,
                    schedule: Some(
                        ps.iter()
                            .map(|p| PieceFile { start: p.start, end: p.end, matrix: ComplexArray::from_matrix(&p.matrix) })
                            .collect(),
                    ),
                },
            })
            .collect();
        HamiltonianFile { lattice: h.lattice().spec(), local_dims: Some(h.local_dims().to_vec()), terms }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius_norm, pauli};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CMatrix {
        let m = CMatrix::from_fn(n, n, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        linalg::hermitian_part(&m) * c64(scale, 0.0)
    }

    #[test]
    fn model_term_counts() {
        assert_eq!(heisenberg_chain(2, 1.0).unwrap().terms().len(), 1);
        let ising = ising_chain_zz(3, 1.0).unwrap();
        assert_eq!(ising.terms().len(), 2);
        let (a, b) = (ising.terms()[0].at(0.0).unwrap(), ising.terms()[1].at(0.0).unwrap());
        let ea = Subsystems::new(&[2, 2, 2], &[0, 1]).embed(a);
        let eb = Subsystems::new(&[2, 2, 2], &[1, 2]).embed(b);
        assert!(frobenius_norm(&linalg::commutator(&ea, &eb)) < 1e-14);
        // A 3x3 grid has 2 directions x 3 rows x 2 bonds.
        assert_eq!(heisenberg_grid(3, 2, 1.0).unwrap().terms().len(), 12);
        assert!(heisenberg_chain(1, 1.0).is_err());
        assert!(build_model("potts", ModelSize::Chain(4), &[]).is_err());
        assert!(build_model("heisenberg_grid", ModelSize::Chain(4), &[]).is_err());
    }

    #[test]
    fn heisenberg_chain_parameters() {
        let h = heisenberg_chain(6, 1.0).unwrap();
        let p = structural_params(&h, &ParamOptions::default()).unwrap();
        assert!((p.j - 2.0).abs() < 1e-12);
        assert_eq!(p.a, 1.0);
        assert_eq!(p.z, 3);
        assert_eq!(p.y, 2);
        assert!((p.v - 6.0 * std::f64::consts::E).abs() < 1e-12);
        assert!((p.v - 16.309_690_970_754_27).abs() < 1e-9);
        // Brute-force shell bound check at the fitted M.
        for site in 0..6 {
            for (r, &c) in shell_counts(&h, site, p.a).iter().enumerate() {
                assert!(c as f64 <= p.m * if r == 0 { 1.0 } else { (r as f64).powf(p.kappa) } + 1e-12);
            }
        }
    }

    #[test]
    fn single_term_has_one_neighbour() {
        let lattice = Arc::new(Lattice::chain(2).unwrap());
        let h = LocalHamiltonian::qubits(lattice, vec![LocalTerm::constant([0, 1], heisenberg_bond())]).unwrap();
        assert_eq!(structural_params(&h, &ParamOptions::default()).unwrap().z, 1);
    }

    #[test]
    fn kappa_validation_and_fit() {
        let h = heisenberg_grid(3, 2, 1.0).unwrap();
        assert!(structural_params(&h, &ParamOptions { kappa: Some(-0.5), r_max: None }).is_err());
        let p = structural_params(&h, &ParamOptions::default()).unwrap();
        assert_eq!(p.kappa, 1.0);
        for site in 0..9 {
            for (r, &c) in shell_counts(&h, site, p.a).iter().enumerate().skip(1) {
                assert!(c as f64 <= p.m * r as f64 + 1e-12);
            }
        }
        let p0 = structural_params(&h, &ParamOptions { kappa: Some(0.0), r_max: None }).unwrap();
        assert!(p0.m >= p0.zero_shell_max as f64);
    }

    #[test]
    fn coverage_and_validation() {
        let lattice = Arc::new(Lattice::chain(3).unwrap());
        let bond = heisenberg_bond();
        assert!(LocalHamiltonian::qubits(Arc::clone(&lattice), vec![LocalTerm::constant([0, 1], bond.clone())]).is_err());
        let zero = LocalTerm::constant([1, 2], CMatrix::zeros(4, 4));
        assert!(LocalHamiltonian::qubits(Arc::clone(&lattice), vec![LocalTerm::constant([0, 1], bond.clone()), zero]).is_err());
        let bad = CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)]);
        assert!(matches!(
            LocalHamiltonian::partial(Arc::clone(&lattice), vec![2; 3], vec![LocalTerm::constant([0], bad)]),
            Err(Error::NotHermitian { .. })
        ));
        assert!(LocalHamiltonian::partial(Arc::clone(&lattice), vec![2; 3], vec![LocalTerm::constant([0], bond)]).is_err());
        let overlapping = LocalTerm::piecewise(
            [0],
            vec![
                Piece { start: 0.0, end: 1.0, matrix: pauli('X').unwrap() },
                Piece { start: 0.5, end: 2.0, matrix: pauli('Z').unwrap() },
            ],
        );
        assert!(LocalHamiltonian::partial(lattice, vec![2; 3], vec![overlapping]).is_err());
    }

    #[test]
    fn restriction_examples() {
        let h = heisenberg_chain(5, 1.0).unwrap();
        assert_eq!(h.restrict(&h.lattice().all_sites()).terms().len(), 4);
        let sub = h.restrict(&Region::from([0, 1, 2]));
        assert_eq!(sub.supports(), vec![Region::from([0, 1]), Region::from([1, 2])]);
        assert!(h.restrict(&Region::from([1, 3])).is_empty());
        let again = sub.restrict(&Region::from([0, 1, 2]));
        assert_eq!(again.supports(), sub.supports());
    }

    #[test]
    fn interaction_split_examples() {
        let tfi = ising_transverse(4, 1.0, 0.7).unwrap();
        let split = tfi.interaction_split().unwrap();
        assert_eq!(split.f.terms().len(), 4);
        assert_eq!(split.g.terms().len(), 3);
        let all = tfi.lattice().all_sites();
        let diff = tfi.dense_on(&all, 0.0) - split.f.dense_on(&all, 0.0) - split.g.dense_on(&all, 0.0);
        assert!(frobenius_norm(&diff) < 1e-14);
        let heis = heisenberg_chain(4, 1.0).unwrap();
        let s = heis.interaction_split().unwrap();
        assert!(s.f.is_empty());
        assert_eq!(s.g.terms().len(), 3);
        let fields = LocalHamiltonian::qubits(
            Arc::new(Lattice::chain(2).unwrap()),
            vec![LocalTerm::constant([0], pauli('X').unwrap()), LocalTerm::constant([1], pauli('Z').unwrap())],
        )
        .unwrap();
        assert!(fields.interaction_split().is_err());
    }

    #[test]
    fn single_site_part_removal_preserves_hamiltonian() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lattice = Arc::new(Lattice::chain(3).unwrap());
        let terms = vec![
            LocalTerm::constant([0, 1], random_hermitian(&mut rng, 4, 1.0)),
            LocalTerm::constant([1, 2], random_hermitian(&mut rng, 4, 1.0)),
        ];
        let h = LocalHamiltonian::qubits(lattice, terms).unwrap();
        let reduced = h.without_single_site_parts();
        let all = h.lattice().all_sites();
        assert!(frobenius_norm(&(h.dense_on(&all, 0.0) - reduced.dense_on(&all, 0.0))) < 1e-12);
        // Remaining two-site terms have no single-site content.
        for t in reduced.terms().iter().filter(|t| t.support.len() == 2) {
            let m = t.at(0.0).unwrap();
            for pos in 0..2 {
                let red = Subsystems::new(&[2, 2], &[pos]).partial_trace(m);
                let traceless = &red - CMatrix::identity(2, 2) * (linalg::trace(&red) / c64(2.0, 0.0));
                assert!(frobenius_norm(&traceless) < 1e-12);
            }
        }
    }

    #[test]
    fn file_round_trip() {
        let h = ising_transverse(3, 0.5, 0.25).unwrap();
        let text = serde_json::to_string(&HamiltonianFile::from_hamiltonian(&h)).unwrap();
        let back: HamiltonianFile = serde_json::from_str(&text).unwrap();
        let h2 = back.build().unwrap();
        let all = h.lattice().all_sites();
        assert!(frobenius_norm(&(h.dense_on(&all, 0.0) - h2.dense_on(&all, 0.0))) < 1e-15);
        let json = r#"{"lattice":{"geometry":"graph","edges":[[0,1]]},
            "terms":[{"support":[0,1],"schedule":[{"start":0,"end":1,"matrix":[[1,0],[0,0],[0,0],[0,0],[0,0],[-1,0],[0,0],[0,0],[0,0],[0,0],[-1,0],[0,0],[0,0],[0,0],[0,0],[1,0]]}]}]}"#;
        let f: HamiltonianFile = serde_json::from_str(json).unwrap();
        let h3 = f.build().unwrap();
        assert!(!h3.is_time_independent());
        assert_eq!(h3.breakpoints(), vec![0.0, 1.0]);
    }

    proptest! {
        #[test]
        fn split_norms_do_not_exceed_full(seed in any::<u64>(), field in 0.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lattice = Arc::new(Lattice::chain(4).unwrap());
            let mut terms: Vec<LocalTerm> =
                (0..3).map(|j| LocalTerm::constant([j, j + 1], random_hermitian(&mut rng, 4, 1.0))).collect();
            terms.extend((0..4).map(|j| LocalTerm::constant([j], random_hermitian(&mut rng, 2, field))));
            let h = LocalHamiltonian::qubits(lattice, terms).unwrap();
            let split = h.interaction_split().unwrap();
            let opts = ParamOptions::default();
            let pg = structural_params(&split.g, &opts).unwrap();
            let ph = structural_params(&h, &opts).unwrap();
            prop_assert!(pg.j <= ph.j + 1e-12);
            // Supports count bounded by Z n.
            prop_assert!(h.supports().len() <= ph.z * h.n_sites());
        }
    }
}
