//! Cube and surface decomposition on `Λ = [1:L]^η`.
//!
//! The lattice is cut into cubes `Q_m` of edge `Ω`. Terms inside a cube form
//! `H_Q`; every other term crosses one of the cutting planes `x_i = Ωj + 1/2`
//! and is removed by a correction localized near a surface segment
//! `I_ij × tilde Q_k`. Corrections with the same direction `i` and the same
//! parity vector `lsb(k)` have disjoint supports and form one layer.
//!
//! Indices `i`, `j`, `k` and coordinates are one-based.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::Serialize;

use super::{
    consecutive_layers, correction_in_context, BaseFactor, DecomposedEvolution, DecompositionMode, GrowthEnvelope,
};
use crate::error::{Error, Result};
use crate::exact_engine::{DenseOperator, Evolver};
use crate::hamiltonian::{structural_params, LocalHamiltonian, ParamOptions, StructuralParams};
use crate::lr_bounds::{self, Bound};
use crate::metric_lattice::{self, Cube, Lattice, Region};

/// Direction `i`, plane `j` and surface segment `k` of a coupling set.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SurfaceIndex {
    pub i: usize,
    pub j: usize,
    pub k: Vec<usize>,
}

impl SurfaceIndex {
    /// Sort key `(i, lsb(k), j, k)`; sorting by it groups equal `(i, lsb(k))`.
    fn order_key(&self) -> (usize, Vec<u8>, usize, Vec<usize>) {
        (self.i, lsb(&self.k), self.j, self.k.clone())
    }

    fn layer_tag(&self) -> String {
        let bits: String = lsb(&self.k).iter().map(|b| char::from(b'0' + b)).collect();
        format!("i={} lsb={bits}", self.i)
    }
}

/// Least significant bit of every component.
pub fn lsb(k: &[usize]) -> Vec<u8> {
    k.iter().map(|&x| (x & 1) as u8).collect()
}

/// Count of exhaustive structural checks and the ones that failed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct CombinatoricsReport {
    pub checks: usize,
    pub violations: Vec<String>,
}

impl CombinatoricsReport {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.violations.push(what());
        }
    }

    fn into_result(self, stage: &str) -> Result<Self> {
        match self.violations.first() {
            None => Ok(self),
            Some(first) => Err(Error::InvalidDecomposition(format!(
                "{stage}: {} of {} checks failed, first: {first}",
                self.violations.len(),
                self.checks
            ))),
        }
    }
}

/// Removal step `u` (one-based) of the surface sweep.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CorrectionSite {
    pub u: usize,
    pub index: SurfaceIndex,
    /// Supports in `S'_{ω(u)}`.
    pub terms: Vec<Region>,
    pub y: Region,
    pub r: Region,
    pub bar_r: Region,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypercubicPlan {
    #[serde(rename = "L")]
    pub edge: usize,
    pub eta: usize,
    pub omega: usize,
    pub a: f64,
    /// `⌊a⌋`.
    pub a_dot: i64,
    /// `⌈L / Ω⌉`.
    pub b: usize,
    /// `Ω/2 - 2⌊a⌋`.
    pub r: i64,
    pub cubes: Vec<(Vec<usize>, Region)>,
    /// Supports inside one cube.
    pub sigma0: Vec<Region>,
    /// `S_ij` keyed by `(i, j)`.
    pub s_ij: Vec<((usize, usize), Vec<Region>)>,
    /// `S_ijk` in the order `ω`.
    pub s_ijk: Vec<(SurfaceIndex, Vec<Region>)>,
    /// `S'_ijk` in the order `ω`; position `u - 1` holds `S'_{ω(u)}`.
    pub s_prime: Vec<(SurfaceIndex, Vec<Region>)>,
    pub corrections: Vec<CorrectionSite>,
    pub report: CombinatoricsReport,
}

impl HypercubicPlan {
    /// `Ξ = η (B - 1) B^(η-1)`.
    pub fn xi(&self) -> usize {
        self.eta * (self.b - 1) * self.b.pow(self.eta as u32 - 1)
    }

    /// Every coupling support.
    pub fn coupling_supports(&self) -> BTreeSet<Region> {
        self.s_ij.iter().flat_map(|(_, zs)| zs).cloned().collect()
    }

    fn plane(&self, j: usize) -> i64 {
        (self.omega * j) as i64
    }

    /// `I_ij` along direction `i`.
    fn interval(&self, j: usize) -> (i64, i64) {
        (self.plane(j) - self.a_dot + 1, self.plane(j) + self.a_dot)
    }

    /// Bounds of `tilde Q_k` enlarged by `grow`, one pair per transverse direction.
    fn transverse(&self, k: &[usize], grow: i64) -> Vec<(i64, i64)> {
        let w = self.omega as i64;
        k.iter().map(|&kc| (w * (kc as i64 - 1) + 1 - grow, w * kc as i64 + grow)).collect()
    }
}

/// All of `[1:b]^dim` in lexicographic order.
fn multi_indices(b: usize, dim: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        out = out.into_iter().flat_map(|prefix| (1..=b).map(move |c| [prefix.clone(), vec![c]].concat())).collect();
    }
    out
}

/// Coordinates other than direction `i` (one-based).
fn transverse_coords(c: &[i64], i: usize) -> Vec<i64> {
    c.iter().enumerate().filter(|(p, _)| p + 1 != i).map(|(_, &v)| v).collect()
}

fn within(c: &[i64], bounds: &[(i64, i64)]) -> bool {
    c.iter().zip(bounds).all(|(&x, &(lo, hi))| lo <= x && x <= hi)
}

/// Cubes `Q_m` of edge `Ω` for interaction range `a`.
pub fn hypercubic_partition(lattice: &Lattice, omega: usize, a: f64) -> Result<HypercubicPlan> {
    let (edge, eta) =
        lattice.hypercube_shape().ok_or_else(|| Error::InvalidLattice("cube partition needs a hypercube".into()))?;
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("interaction range {a} must be finite and non-negative")));
    }
    let a_dot = a.floor() as i64;
    if omega == 0 || omega % 2 == 1 {
        return Err(Error::InvalidParameter(format!("cube edge {omega} must be a positive even integer")));
    }
    if (omega as i64) < 4 * a_dot {
        return Err(Error::InvalidParameter(format!("cube edge {omega} is below 4 floor(a) = {}", 4 * a_dot)));
    }
    if omega > edge {
        return Err(Error::InvalidParameter(format!("cube edge {omega} exceeds the lattice edge {edge}")));
    }
    let b = edge.div_ceil(omega);
    let w = omega as i64;
    let mut report = CombinatoricsReport::default();
    let cubes = multi_indices(b, eta)
        .into_iter()
        .map(|m| {
            let lower = m.iter().map(|&mi| w * (mi as i64 - 1) + 1).collect();
            let upper = m.iter().map(|&mi| w * mi as i64).collect();
            let cube = Cube::new(lower, upper)?.clipped(edge);
            Ok((m, lattice.cube_region(&cube)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut count = vec![0usize; lattice.n_sites()];
    cubes.iter().flat_map(|(_, q)| q.iter()).for_each(|x| count[x] += 1);
    for (x, &c) in count.iter().enumerate() {
        report.check(c == 1, || format!("site {x} lies in {c} cubes"));
    }
    let report = report.into_result("cube partition")?;
    Ok(HypercubicPlan {
        edge,
        eta,
        omega,
        a,
        a_dot,
        b,
        r: w / 2 - 2 * a_dot,
        cubes,
        sigma0: Vec::new(),
        s_ij: Vec::new(),
        s_ijk: Vec::new(),
        s_prime: Vec::new(),
        corrections: Vec::new(),
        report,
    })
}

/// Classifies the supports into cube-internal ones and the coupling sets
/// `S_ij`, `S_ijk` and their deduplication `S'_ijk` in the order `ω`.
pub fn coupling_partition(mut plan: HypercubicPlan, lattice: &Lattice, supports: &[Region]) -> Result<HypercubicPlan> {
    let supports: Vec<Region> = supports.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    for z in &supports {
        if lattice.diameter(z)? > plan.a + metric_lattice::DIST_TOL {
            return Err(Error::InvalidParameter(format!("support {z} is wider than the range a = {}", plan.a)));
        }
    }
    let coords: Vec<Vec<Vec<i64>>> = supports
        .iter()
        .map(|z| z.iter().map(|x| lattice.coords(x)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let mut report = std::mem::take(&mut plan.report);
    let w = plan.omega as i64;

    let inside_cube = |c: &[Vec<i64>]| {
        (0..plan.eta).all(|axis| {
            let cell = |x: &Vec<i64>| (x[axis] - 1).div_euclid(w);
            c.iter().all(|x| cell(x) == cell(&c[0]))
        })
    };
    let mut in_sigma0 = vec![false; supports.len()];
    for (n, c) in coords.iter().enumerate() {
        in_sigma0[n] = inside_cube(c);
    }
    let mut s_ij: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for i in 1..=plan.eta {
        for j in 1..plan.b {
            let plane = plan.plane(j);
            let members: Vec<usize> = (0..supports.len())
                .filter(|&n| {
                    coords[n].iter().any(|x| x[i - 1] <= plane) && coords[n].iter().any(|x| x[i - 1] > plane)
                })
                .collect();
            for &n in &members {
                let (lo, hi) = plan.interval(j);
                report.check(coords[n].iter().all(|x| lo <= x[i - 1] && x[i - 1] <= hi), || {
                    format!("support {} in S_{i}{j} leaves I_ij", supports[n])
                });
            }
            s_ij.insert((i, j), members);
        }
    }
    let mut in_s = vec![false; supports.len()];
    s_ij.values().flatten().for_each(|&n| in_s[n] = true);
    for n in 0..supports.len() {
        report.check(in_s[n] != in_sigma0[n], || {
            format!("support {} is in {} of H_Q and H_S", supports[n], if in_s[n] { "both" } else { "neither" })
        });
    }

    let mut indices: Vec<SurfaceIndex> = Vec::new();
    for i in 1..=plan.eta {
        for j in 1..plan.b {
            for k in multi_indices(plan.b, plan.eta - 1) {
                indices.push(SurfaceIndex { i, j, k });
            }
        }
    }
    indices.sort_by_key(SurfaceIndex::order_key);
    report.check(indices.len() == plan.xi(), || format!("{} surface indices, expected {}", indices.len(), plan.xi()));
    // Equal (i, lsb(k)) must be consecutive.
    let mut seen_groups: BTreeSet<(usize, Vec<u8>)> = BTreeSet::new();
    let mut previous: Option<(usize, Vec<u8>)> = None;
    for idx in &indices {
        let group = (idx.i, lsb(&idx.k));
        if previous.as_ref() != Some(&group) {
            report.check(seen_groups.insert(group.clone()), || format!("group {group:?} is not contiguous in ω"));
        }
        previous = Some(group);
    }

    let mut s_ijk = Vec::with_capacity(indices.len());
    let mut s_prime = Vec::with_capacity(indices.len());
    let mut assigned = vec![false; supports.len()];
    let mut covered: BTreeMap<(usize, usize), BTreeSet<usize>> = BTreeMap::new();
    for idx in &indices {
        let (lo, hi) = plan.interval(idx.j);
        let segment = plan.transverse(&idx.k, 0);
        let enlarged = plan.transverse(&idx.k, plan.a_dot);
        let meets = |n: usize| {
            coords[n].iter().any(|x| lo <= x[idx.i - 1] && x[idx.i - 1] <= hi && within(&transverse_coords(x, idx.i), &segment))
        };
        let members: Vec<usize> = s_ij[&(idx.i, idx.j)].iter().copied().filter(|&n| meets(n)).collect();
        for &n in &members {
            report.check(
                coords[n].iter().all(|x| {
                    lo <= x[idx.i - 1] && x[idx.i - 1] <= hi && within(&transverse_coords(x, idx.i), &enlarged)
                }),
                || format!("support {} in S_ijk for {idx:?} leaves I_ij × C_a(tilde Q_k)", supports[n]),
            );
        }
        covered.entry((idx.i, idx.j)).or_default().extend(members.iter().copied());
        let fresh: Vec<usize> = members.iter().copied().filter(|&n| !assigned[n]).collect();
        fresh.iter().for_each(|&n| assigned[n] = true);
        s_ijk.push((idx.clone(), members.iter().map(|&n| supports[n].clone()).collect::<Vec<_>>()));
        s_prime.push((idx.clone(), fresh.iter().map(|&n| supports[n].clone()).collect::<Vec<_>>()));
    }
    for ((i, j), members) in &s_ij {
        let union = covered.get(&(*i, *j)).cloned().unwrap_or_default();
        report.check(members.iter().copied().collect::<BTreeSet<_>>() == union, || {
            format!("S_{i}{j} differs from the union of its S_ijk")
        });
    }
    // S is the disjoint union of the S'.
    let mut multiplicity = vec![0usize; supports.len()];
    let position: BTreeMap<&Region, usize> = supports.iter().enumerate().map(|(n, z)| (z, n)).collect();
    s_prime.iter().flat_map(|(_, zs)| zs).for_each(|z| multiplicity[position[z]] += 1);
    for n in 0..supports.len() {
        let expected = usize::from(in_s[n]);
        report.check(multiplicity[n] == expected, || {
            format!("support {} appears {} times among the S', expected {expected}", supports[n], multiplicity[n])
        });
    }

    plan.sigma0 = (0..supports.len()).filter(|&n| in_sigma0[n]).map(|n| supports[n].clone()).collect();
    plan.s_ij = s_ij.into_iter().map(|(key, ns)| (key, ns.into_iter().map(|n| supports[n].clone()).collect())).collect();
    plan.s_ijk = s_ijk;
    plan.s_prime = s_prime;
    plan.report = report.into_result("coupling partition")?;
    Ok(plan)
}

/// Regions `Y_u`, `R_u = Y_u ∪ B^o_r(Y_u)` and `bar R_u` (extension under the
/// supports of `Σ_u`), with the containment and disjointness checks.
pub fn correction_layout(mut plan: HypercubicPlan, lattice: &Lattice) -> Result<HypercubicPlan> {
    let mut report = std::mem::take(&mut plan.report);
    let mut sigma: Vec<Region> = plan.sigma0.clone();
    let mut corrections = Vec::with_capacity(plan.s_prime.len());
    let half = plan.omega as i64 / 2;
    for (pos, (idx, terms)) in plan.s_prime.iter().enumerate() {
        sigma.extend(terms.iter().cloned());
        let y = terms.iter().fold(Region::empty(), |acc, z| acc.union(z));
        let r = if y.is_empty() || plan.r <= 0 { y.clone() } else { y.union(&lattice.open_ball(&y, plan.r as f64)?) };
        let bar_r = metric_lattice::extension(&sigma, &r).union(&r);
        let (lo, hi) = (plan.plane(idx.j) - half + 1, plan.plane(idx.j) + half);
        let segment = plan.transverse(&idx.k, half);
        for x in bar_r.iter() {
            let c = lattice.coords(x)?;
            report.check(lo <= c[idx.i - 1] && c[idx.i - 1] <= hi && within(&transverse_coords(&c, idx.i), &segment), || {
                format!("site {x} of bar R_u for {idx:?} leaves its slab")
            });
        }
        corrections.push(CorrectionSite { u: pos + 1, index: idx.clone(), terms: terms.clone(), y, r, bar_r });
    }
    for (p, c) in corrections.iter().enumerate() {
        for d in &corrections[p + 1..] {
            if c.index.i != d.index.i {
                continue;
            }
            let claimed = c.index.j != d.index.j || (c.index.k != d.index.k && lsb(&c.index.k) == lsb(&d.index.k));
            if claimed {
                report.check(c.bar_r.is_disjoint(&d.bar_r), || {
                    format!("bar R for {:?} and {:?} overlap", c.index, d.index)
                });
            }
        }
    }
    plan.corrections = corrections;
    plan.report = report.into_result("correction layout")?;
    Ok(plan)
}

/// Distinct term supports of `h`, zero terms included.
fn term_supports(h: &LocalHamiltonian) -> Vec<Region> {
    h.terms().iter().map(|t| t.support.clone()).collect::<BTreeSet<_>>().into_iter().collect()
}

/// Geometry, coupling sets and layout for `h`, with `a` the largest support diameter.
pub fn hypercubic_plan(h: &LocalHamiltonian, omega: usize) -> Result<HypercubicPlan> {
    let lattice = h.lattice();
    let supports = term_supports(h);
    let a = supports.iter().map(|z| lattice.diameter(z)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    let plan = hypercubic_partition(lattice, omega, a)?;
    let plan = coupling_partition(plan, lattice, &supports)?;
    correction_layout(plan, lattice)
}

/// `V = V'_Ξ ... V'_1 U^{H_Q}_ts` for a complete plan of `h`.
pub fn hypercubic_decomposition(
    h: &LocalHamiltonian,
    plan: &HypercubicPlan,
    t: f64,
    s: f64,
    q: f64,
) -> Result<DecomposedEvolution> {
    if plan.corrections.len() != plan.s_prime.len() {
        return Err(Error::InvalidDecomposition("plan has no correction layout".into()));
    }
    let terms_on = |zs: &[Region]| -> Vec<usize> {
        let set: BTreeSet<&Region> = zs.iter().collect();
        h.terms().iter().enumerate().filter(|(_, t)| set.contains(&t.support)).map(|(k, _)| k).collect()
    };
    let base_terms = terms_on(&plan.sigma0);
    let mut classified = base_terms.len();
    let mut context = base_terms.clone();
    let mut steps = Vec::new();
    for site in &plan.corrections {
        let removed = terms_on(&site.terms);
        classified += removed.len();
        context.extend_from_slice(&removed);
        if !removed.is_empty() {
            steps.push((site, context.clone(), removed));
        }
    }
    if classified != h.terms().len() {
        return Err(Error::InvalidDecomposition(format!(
            "plan classifies {classified} of {} terms; it was built for another Hamiltonian",
            h.terms().len()
        )));
    }

    let sigma0_h = h.with_terms(base_terms.iter().map(|&k| h.terms()[k].clone()).collect())?;
    let base = plan
        .cubes
        .par_iter()
        .filter(|(_, q)| plan.sigma0.iter().any(|z| z.is_subset(q)))
        .map(|(m, q)| {
            let u = Evolver::new(&sigma0_h, q)?.u(t, s);
            let label = format!("cube {m:?}");
            Ok(BaseFactor { label, unitary: DenseOperator::new(u, q.clone()) })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut removals = steps
        .par_iter()
        .map(|(site, ctx, removed)| correction_in_context(h, ctx, removed, &site.y, &site.r, t, s, q))
        .collect::<Result<Vec<_>>>()?;
    for (removal, (site, _, _)) in removals.iter_mut().zip(&steps) {
        removal.step = site.u;
        removal.label = format!("u={} i={} j={} k={:?}", site.u, site.index.i, site.index.j, site.index.k);
        if !removal.bar_r.is_subset(&site.bar_r) {
            return Err(Error::InvalidDecomposition(format!("correction {} leaves its planned support", site.u)));
        }
    }

    let mut layers = Vec::new();
    if !base.is_empty() {
        layers.push(super::Layer { tag: "cubes".into(), members: (0..base.len()).collect() });
    }
    let supports: Vec<Region> = removals.iter().map(|r| r.bar_r.clone()).collect();
    let tags: Vec<String> = steps.iter().map(|(site, _, _)| site.index.layer_tag()).collect();
    let offset = base.len();
    layers.extend(consecutive_layers(&supports, &tags).into_iter().map(|mut l| {
        l.members.iter_mut().for_each(|m| *m += offset);
        l
    }));
    let lambda = plan.eta as i64 * (1 << plan.eta) + 1;
    Ok(DecomposedEvolution {
        mode: DecompositionMode::Hypercubic,
        t,
        s,
        base_terms,
        base,
        removals,
        layers,
        envelope: GrowthEnvelope::Cube { r: lambda * plan.omega as i64 },
        parameter: plan.omega as f64,
        a: plan.a,
        claimed_error: match structural_params(h, &ParamOptions::default()) {
            Ok(params) => hypercubic_error_bound(&params, h.n_sites(), plan.omega, t - s, q),
            Err(e) => Bound::NotApplicable(e.to_string()),
        },
    })
}

fn eta_of(params: &StructuralParams) -> f64 {
    params.kappa.round() + 1.0
}

/// `c3 = 2 η a M e / Z` with `η = κ + 1`.
fn c3(params: &StructuralParams) -> f64 {
    2.0 * eta_of(params) * params.a * params.m * std::f64::consts::E / params.z as f64
}

/// Whether `Ω` meets the structural preconditions: `Ω` even, `r = Ω/2 - 2⌊a⌋ > 0`
/// and `⌈r/a⌉` large enough.
fn omega_admissible(params: &StructuralParams, omega: usize, q: f64) -> bool {
    let r = omega as f64 / 2.0 - 2.0 * params.a.floor();
    omega % 2 == 0 && r > 0.0 && lr_bounds::is_large_enough(r / params.a, params.kappa, q)
}

/// `n c3 exp(v|t-s| - (1-q) Ω / (2a))`, when `Ω` satisfies the preconditions.
pub fn hypercubic_error_bound(params: &StructuralParams, n: usize, omega: usize, dt: f64, q: f64) -> Bound {
    if !omega_admissible(params, omega, q) {
        return Bound::NotApplicable(format!(
            "Ω = {omega} gives r = Ω/2 - 2 floor(a) outside the range where the bound holds"
        ));
    }
    let log = (n as f64).ln() + c3(params).ln() + params.v * dt.abs() - (1.0 - q) * omega as f64 / (2.0 * params.a);
    Bound::Applicable(log.exp())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RequiredOmega {
    pub omega_min: usize,
    /// `(2a/(1-q)) [v|t-s| + ln(n/ε) + ln c3]`.
    pub rhs: f64,
    pub c3: f64,
    /// Smallest even `Ω` meeting the structural preconditions.
    pub floor: usize,
}

/// Smallest even `Ω` at or above the error condition and the structural floor.
pub fn required_omega(params: &StructuralParams, n: usize, dt: f64, eps: f64, q: f64) -> Result<RequiredOmega> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {eps} must be positive")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("q = {q} must lie in (0, 1)")));
    }
    let c3 = c3(params);
    let rhs = 2.0 * params.a / (1.0 - q) * (params.v * dt.abs() + (n as f64 / eps).ln() + c3.ln());
    let mut floor = 4 * params.a.floor() as usize + 2;
    while !omega_admissible(params, floor, q) {
        floor += 2;
    }
    let from_rhs = if rhs <= 0.0 { 0 } else { ((rhs - 1e-12).ceil() as usize).next_multiple_of(2) };
    Ok(RequiredOmega { omega_min: from_rhs.max(floor), rhs, c3, floor })
}
