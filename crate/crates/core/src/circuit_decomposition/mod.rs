//! Decompositions of `U^H_ts` into local unitaries.
//!
//! Each construction removes groups of terms one at a time. Removing the terms
//! `A` from `H` is compensated by a correction `V'` that acts on the extension
//! `bar R` of a region `R ⊃ supp A`:
//!
//! `V' = U^G_ts U^{G-A}_st` with `G = H_{bar R}`,
//!
//! which is the solution of `∂_s V'(s) = i U^G_ts A(s) U^G_st V'(s)` with
//! `V'(t) = 1`. The product `V' U^{H-A}_ts` is exact when `bar R` holds every
//! term of `H`; otherwise its error is controlled by a Lieb-Robinson bound on
//! the truncated evolution.
//!
//! Factor lists are stored in application order: the operator is
//! `factors[last] ... factors[1] factors[0]`.

mod hypercubic;
mod magnus;

pub use hypercubic::{
    correction_layout, coupling_partition, hypercubic_decomposition, hypercubic_error_bound, hypercubic_partition,
    hypercubic_plan, lsb, required_omega, CombinatoricsReport, CorrectionSite, HypercubicPlan, RequiredOmega,
    SurfaceIndex,
};
pub use magnus::{magnus_correction, MagnusSolution, MAGNUS_TOL};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact_engine::{self, DenseOperator, Evolver};
use crate::hamiltonian::{structural_params, LocalHamiltonian, ParamOptions, StructuralParams};
use crate::linalg::{self, CMatrix, Subsystems};
use crate::lr_bounds::{self, Bound};
use crate::metric_lattice::{Lattice, Region, SiteId, DIST_TOL};
use crate::tensor_network::{circuit_to_pepo_bound, CircuitBound, Gate, PepsGraph};

/// Slack used when comparing a dense error with an analytic bound.
pub const BOUND_SLACK: f64 = 1e-9;

/// One removal step: the terms `F` leave the Hamiltonian and `V'` compensates.
#[derive(Clone, Debug)]
pub struct PerturbationRemoval {
    pub step: usize,
    pub label: String,
    /// Indices into the full Hamiltonian's term list.
    pub removed: Vec<usize>,
    pub y: Region,
    pub r: Region,
    pub bar_r: Region,
    /// `d(Y, Λ \ R) / a`, measured against the sites the step Hamiltonian touches.
    pub d_a: f64,
    /// `sup_s ||F(s)||` over the evolution interval.
    pub norm_a: f64,
    pub bound: Bound,
    pub v_prime: DenseOperator,
}

/// The terms of `h` selected by index, as a Hamiltonian of their own.
fn sub_hamiltonian(h: &LocalHamiltonian, keep: impl Fn(usize) -> bool) -> Result<LocalHamiltonian> {
    h.with_terms(h.terms().iter().enumerate().filter(|(k, _)| keep(*k)).map(|(_, t)| t.clone()).collect())
}

fn membership(n: usize, idx: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    idx.iter().for_each(|&k| m[k] = true);
    m
}

/// `sup ||A(x)||` for `x` between `s` and `t`, with `A` the sum of `a`'s terms on `y`.
fn sup_norm_on(a: &LocalHamiltonian, y: &Region, t: f64, s: f64) -> f64 {
    let (lo, hi) = (s.min(t), s.max(t));
    let mut cuts: Vec<f64> = a.breakpoints().into_iter().filter(|&b| b > lo && b < hi).collect();
    cuts.insert(0, lo);
    cuts.push(hi);
    let samples: Vec<f64> =
        if hi > lo { cuts.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect() } else { vec![lo] };
    samples.into_iter().map(|x| linalg::hermitian_op_norm(&a.dense_on(y, x))).fold(0.0, f64::max)
}

/// Correction for removing `removed` from the Hamiltonian made of the terms
/// `context` of `h`. Both index lists refer to `h`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn correction_in_context(
    h: &LocalHamiltonian,
    context: &[usize],
    removed: &[usize],
    y: &Region,
    r: &Region,
    t: f64,
    s: f64,
    q: f64,
) -> Result<PerturbationRemoval> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("q = {q} must lie in (0, 1)")));
    }
    h.lattice().check_region(r)?;
    if !y.is_subset(r) {
        return Err(Error::InvalidParameter(format!("Y = {y} is not inside R = {r}")));
    }
    let in_context = membership(h.terms().len(), context);
    let is_removed = membership(h.terms().len(), removed);
    for &k in removed {
        if !in_context[k] {
            return Err(Error::InvalidParameter(format!("removed term {k} is not part of the Hamiltonian")));
        }
        if !h.terms()[k].support.is_subset(y) {
            return Err(Error::InvalidParameter(format!("removed term {k} leaves Y = {y}")));
        }
    }
    let step_h = sub_hamiltonian(h, |k| in_context[k])?;
    let a = sub_hamiltonian(h, |k| is_removed[k])?;
    let bar_r = step_h.extension(r).union(r);
    let norm_a = if y.is_empty() { 0.0 } else { sup_norm_on(&a, y, t, s) };

    let v_prime = if removed.is_empty() || t == s {
        CMatrix::identity(h.dim_of(&bar_r), h.dim_of(&bar_r))
    } else {
        let g = Evolver::new(&step_h, &bar_r)?;
        let rest = sub_hamiltonian(h, |k| in_context[k] && !is_removed[k])?;
        let g_minus_a = Evolver::new(&rest, &bar_r)?;
        linalg::mul(&g.u(t, s), &g_minus_a.u(s, t))
    };

    let touched = step_h.supports().iter().fold(Region::empty(), |acc, z| acc.union(z));
    let untouched = h.lattice().all_sites().difference(&touched);
    let (d_a, bound) = if removed.is_empty() || norm_a == 0.0 {
        (f64::INFINITY, Bound::Applicable(0.0))
    } else {
        step_bound(&step_h, y, &r.union(&untouched), norm_a, t - s, q)?
    };
    Ok(PerturbationRemoval {
        step: 0,
        label: String::new(),
        removed: removed.to_vec(),
        y: y.clone(),
        r: r.clone(),
        bar_r: bar_r.clone(),
        d_a,
        norm_a,
        bound,
        v_prime: DenseOperator::new(v_prime, bar_r),
    })
}

/// `(2 M α_q / (v Z)) |A| exp(v|t-s| - D)` with the constants of `step_h`.
fn step_bound(step_h: &LocalHamiltonian, y: &Region, r: &Region, norm_a: f64, dt: f64, q: f64) -> Result<(f64, Bound)> {
    let params = match structural_params(step_h, &ParamOptions::default()) {
        Ok(p) => p,
        // Only single-site terms: the evolution factorizes and truncation is exact.
        Err(Error::InvalidHamiltonian(_)) => return Ok((f64::INFINITY, Bound::Applicable(0.0))),
        Err(e) => return Err(e),
    };
    let d_a = step_h.lattice().distance_to_complement(y, r)? / params.a;
    if d_a.is_infinite() {
        return Ok((d_a, Bound::Applicable(0.0)));
    }
    if !lr_bounds::is_large_enough(d_a, params.kappa, q) {
        return Ok((
            d_a,
            Bound::NotApplicable(format!(
                "d_a = {d_a} is not large enough for kappa = {} and q = {q}",
                params.kappa
            )),
        ));
    }
    let alpha = lr_bounds::alpha_q(d_a, q);
    let log = params.c1() + alpha.ln() + norm_a.ln() + params.v * dt.abs() - (1.0 - q) * d_a;
    Ok((d_a, Bound::Applicable(log.exp() / params.v)))
}

/// Correction `V'` on `bar R` for removing the terms `removed` (indices into
/// `h`) supported in `y`, with truncation region `r`.
pub fn local_correction(
    h: &LocalHamiltonian,
    removed: &[usize],
    y: &Region,
    r: &Region,
    t: f64,
    s: f64,
    q: f64,
) -> Result<PerturbationRemoval> {
    let all: Vec<usize> = (0..h.terms().len()).collect();
    correction_in_context(h, &all, removed, y, r, t, s, q)
}

/// `||V' U^{H-A}_ts - U^H_ts||` on the whole lattice, where `H` consists of
/// the terms `context` of `h`.
pub fn correction_error(h: &LocalHamiltonian, context: &[usize], removal: &PerturbationRemoval, t: f64, s: f64) -> Result<f64> {
    let in_context = membership(h.terms().len(), context);
    let is_removed = membership(h.terms().len(), &removal.removed);
    let full = Evolver::whole(&sub_hamiltonian(h, |k| in_context[k])?)?.u(t, s);
    let rest = Evolver::whole(&sub_hamiltonian(h, |k| in_context[k] && !is_removed[k])?)?.u(t, s);
    let approx = apply_factor(h.local_dims(), &h.lattice().all_sites(), &removal.v_prime, &rest)?;
    Ok(linalg::op_norm(&(approx - full)))
}

/// `(op ⊗ 1) m` with `m` on `all`.
fn apply_factor(local_dims: &[usize], all: &Region, op: &DenseOperator, m: &CMatrix) -> Result<CMatrix> {
    let positions = op
        .support
        .positions_in(all)
        .ok_or_else(|| Error::DimensionMismatch(format!("factor support {} leaves the lattice", op.support)))?;
    let dims: Vec<usize> = all.iter().map(|x| local_dims[x]).collect();
    Ok(Subsystems::new(&dims, &positions).apply_left(&op.matrix, m))
}

/// Colours with `C(x) = C(y) ⇒ d(x, y) >= radius`, assigned greedily in
/// ascending site order. Colours are `0..n_colors`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Coloring {
    pub colors: Vec<usize>,
    #[serde(rename = "L_colors")]
    pub n_colors: usize,
}

pub fn greedy_coloring(lattice: &Lattice, radius: f64) -> Result<Coloring> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!("colouring radius {radius} must be positive")));
    }
    let n = lattice.n_sites();
    let mut colors = vec![usize::MAX; n];
    for x in 0..n {
        let mut used: Vec<usize> = (0..x)
            .filter(|&y| {
                let d = lattice.dist(x, y);
                d > 0.0 && d < radius - DIST_TOL
            })
            .map(|y| colors[y])
            .collect();
        used.sort_unstable();
        used.dedup();
        colors[x] = used.iter().enumerate().find(|(c, &u)| *c != u).map_or(used.len(), |(c, _)| c);
    }
    let n_colors = colors.iter().max().map_or(0, |c| c + 1);
    Ok(Coloring { colors, n_colors })
}

/// Order in which sites join the growing sub-lattice `Λ_j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SiteOrder {
    Ascending,
    /// Sites sorted by greedy colour at radius `2 a r`, then by id.
    ColorSorted,
    Custom(Vec<SiteId>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DecompositionMode {
    Sequential,
    Hypercubic,
}

/// Exact unitary of a block of the base evolution `U^{H_0}_ts`.
#[derive(Clone, Debug)]
pub struct BaseFactor {
    pub label: String,
    pub unitary: DenseOperator,
}

/// Consecutive factors with pairwise disjoint supports. Indices refer to
/// [`DecomposedEvolution::factors`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Layer {
    pub tag: String,
    pub members: Vec<usize>,
}

/// Closed-form region outside which `V* A V` acts trivially.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GrowthEnvelope {
    /// `B^o_radius(Y)`.
    Ball { radius: f64 },
    /// Union over `x in Y` of the enlarged cube `C_r({x})`.
    Cube { r: i64 },
    Everything,
}

#[derive(Clone, Debug)]
pub struct DecomposedEvolution {
    pub mode: DecompositionMode,
    pub t: f64,
    pub s: f64,
    /// Term indices of `H_0`, whose evolution the base factors represent.
    pub base_terms: Vec<usize>,
    pub base: Vec<BaseFactor>,
    pub removals: Vec<PerturbationRemoval>,
    pub layers: Vec<Layer>,
    pub envelope: GrowthEnvelope,
    /// `r` for the sequential construction, `Ω` for the hypercubic one.
    pub parameter: f64,
    /// Interaction range the construction was planned with.
    pub a: f64,
    /// Analytic error guarantee of the construction for these parameters.
    pub claimed_error: Bound,
}

/// One factor of a decomposition in application order.
#[derive(Clone, Copy, Debug)]
pub struct FactorRef<'a> {
    pub label: &'a str,
    pub operator: &'a DenseOperator,
}

impl DecomposedEvolution {
    pub fn factors(&self) -> Vec<FactorRef<'_>> {
        self.base
            .iter()
            .map(|b| FactorRef { label: &b.label, operator: &b.unitary })
            .chain(self.removals.iter().map(|r| FactorRef { label: &r.label, operator: &r.v_prime }))
            .collect()
    }

    /// Sum of the per-step bounds, when every one of them applies.
    pub fn telescoped_bound(&self) -> Bound {
        let mut total = 0.0;
        for r in &self.removals {
            match &r.bound {
                Bound::Applicable(b) => total += b,
                Bound::NotApplicable(why) => {
                    return Bound::NotApplicable(format!("step {} ({}): {why}", r.step, r.label))
                }
            }
        }
        Bound::Applicable(total)
    }

    /// Dense product on the whole lattice.
    pub fn dense(&self, lattice: &Lattice, local_dims: &[usize]) -> Result<CMatrix> {
        let all = lattice.all_sites();
        let dim: usize = local_dims.iter().product();
        exact_engine::check_dim(dim)?;
        let mut out = CMatrix::identity(dim, dim);
        for f in self.factors() {
            out = apply_factor(local_dims, &all, f.operator, &out)?;
        }
        Ok(out)
    }

    pub fn gates(&self) -> Vec<Gate> {
        self.factors()
            .into_iter()
            .filter(|f| !f.operator.support.is_empty())
            .map(|f| Gate { support: f.operator.support.clone(), unitary: f.operator.matrix.clone() })
            .collect()
    }

    /// Structural bound on the PEPO bond dimensions of the factor list.
    pub fn circuit_bound(&self, lattice: &Lattice, local_dims: &[usize]) -> Result<CircuitBound> {
        let graph = PepsGraph::from_lattice(lattice)?;
        circuit_to_pepo_bound(&self.gates(), &graph, local_dims)
    }

    /// Structural bound of the factor list together with the closed-form
    /// bound of the construction, both as natural logarithms where large.
    pub fn bond_report(&self, lattice: &Lattice, local_dims: &[usize]) -> Result<BondReport> {
        let (circuit, circuit_note) = match self.circuit_bound(lattice, local_dims) {
            Ok(b) => (Some(b), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let ln_d = (local_dims.iter().copied().max().unwrap_or(1) as f64).ln();
        let (ln_bound, ln_bound_published) = match self.mode {
            DecompositionMode::Hypercubic => {
                let eta = lattice.hypercube_shape().map_or(1, |(_, eta)| eta) as i32;
                let w = self.parameter;
                let sites = w.powi(eta) + eta as f64 * 2f64.powi(eta - 1) * w * (2.0 * w).powi(eta - 1);
                (sites * 2.0 * ln_d, Some(eta as f64 * 4f64.powi(eta) * w.powi(eta) * ln_d))
            }
            DecompositionMode::Sequential => {
                let radius = self.a * self.parameter;
                let n_r = (0..lattice.n_sites())
                    .map(|x| lattice.open_ball(&Region::singleton(x), radius).map(|b| b.len()))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .max()
                    .unwrap_or(0);
                (2.0 * (n_r * n_r) as f64 * ln_d, None)
            }
        };
        Ok(BondReport { circuit, circuit_note, ln_bound, ln_bound_published })
    }

    /// Support of `V* A V` for `A` on `a_support`.
    pub fn support_growth(&self, lattice: &Lattice, a_support: &Region) -> Result<SupportGrowth> {
        support_growth(self, lattice, a_support)
    }

    pub fn report(&self) -> DecompositionReport {
        let factors = self.factors();
        let mut layer_of = vec![String::new(); factors.len()];
        for layer in &self.layers {
            for &m in &layer.members {
                layer_of[m] = layer.tag.clone();
            }
        }
        DecompositionReport {
            mode: self.mode,
            t: self.t,
            s: self.s,
            parameter: self.parameter,
            factors: factors
                .iter()
                .zip(layer_of)
                .map(|(f, layer)| FactorReport {
                    label: f.label.to_string(),
                    support: f.operator.support.clone(),
                    layer,
                })
                .collect(),
            n_layers: self.layers.len(),
            step_bounds: self.removals.iter().map(|r| r.bound.clone()).collect(),
            telescoped_bound: self.telescoped_bound(),
            claimed_error: self.claimed_error.clone(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BondReport {
    pub circuit: Option<CircuitBound>,
    /// Why the structural bound is missing, if it is.
    pub circuit_note: Option<String>,
    /// `ln D` of the construction's closed-form bond dimension.
    pub ln_bound: f64,
    /// Looser published envelope `η 4^η Ω^η ln d` for the cube construction.
    pub ln_bound_published: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorReport {
    pub label: String,
    pub support: Region,
    pub layer: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecompositionReport {
    pub mode: DecompositionMode,
    pub t: f64,
    pub s: f64,
    pub parameter: f64,
    pub factors: Vec<FactorReport>,
    pub n_layers: usize,
    pub step_bounds: Vec<Bound>,
    pub telescoped_bound: Bound,
    pub claimed_error: Bound,
}

/// Groups consecutive factors with equal tags into layers, starting a new
/// layer whenever a support would overlap one already in the layer.
pub(crate) fn consecutive_layers(supports: &[Region], tags: &[String]) -> Vec<Layer> {
    let mut layers: Vec<Layer> = Vec::new();
    let mut occupied = Region::empty();
    for (k, (support, tag)) in supports.iter().zip(tags).enumerate() {
        match layers.last_mut() {
            Some(layer) if layer.tag == *tag && !support.intersects(&occupied) => {
                layer.members.push(k);
                occupied = occupied.union(support);
            }
            _ => {
                layers.push(Layer { tag: tag.clone(), members: vec![k] });
                occupied = support.clone();
            }
        }
    }
    layers
}

/// `ε = n exp(v|t-s| + c2 - (1-q) r)` with `c2 = ln(M/(Z e)) + 2(1-q)`,
/// defined when `r` is large enough.
pub fn sequential_error_bound(params: &StructuralParams, n: usize, r: f64, q: f64, dt: f64) -> Bound {
    if !lr_bounds::is_large_enough(r, params.kappa, q) {
        return Bound::NotApplicable(format!("r = {r} is not large enough for kappa = {} and q = {q}", params.kappa));
    }
    let c2 = (params.m / (params.z as f64 * std::f64::consts::E)).ln() + 2.0 * (1.0 - q);
    Bound::Applicable(n as f64 * (params.v * dt.abs() + c2 - (1.0 - q) * r).exp())
}

/// Removes the terms site by site in `order`: step `j` removes the terms
/// inside `Λ_j` that touch the `j`-th site, with truncation region
/// `R_j = Y_j ∪ (B^o_{(r-2)a}(Y_j) ∩ Λ_j)`.
pub fn sequential_decomposition(
    h: &LocalHamiltonian,
    order: &SiteOrder,
    r: f64,
    q: f64,
    t: f64,
    s: f64,
) -> Result<DecomposedEvolution> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("radius parameter r = {r} must be positive")));
    }
    let params = structural_params(h, &ParamOptions::default())?;
    let lattice = h.lattice();
    let n = lattice.n_sites();
    let (sites, tags): (Vec<SiteId>, Vec<String>) = match order {
        SiteOrder::Ascending => ((0..n).collect(), vec![String::from("sequential"); n]),
        SiteOrder::ColorSorted => {
            let coloring = greedy_coloring(lattice, 2.0 * params.a * r)?;
            let mut sites: Vec<SiteId> = (0..n).collect();
            sites.sort_by_key(|&x| (coloring.colors[x], x));
            let tags = sites.iter().map(|&x| format!("colour {}", coloring.colors[x])).collect();
            (sites, tags)
        }
        SiteOrder::Custom(sites) => {
            let mut sorted = sites.clone();
            sorted.sort_unstable();
            if sorted != (0..n).collect::<Vec<_>>() {
                return Err(Error::InvalidParameter("site order must be a permutation of the lattice".into()));
            }
            (sites.clone(), vec![String::from("sequential"); n])
        }
    };

    struct StepPlan {
        site: SiteId,
        tag: String,
        context: Vec<usize>,
        removed: Vec<usize>,
        y: Region,
        r: Region,
    }
    let mut plans = Vec::new();
    let mut lambda = Region::empty();
    for (&x, tag) in sites.iter().zip(&tags) {
        lambda = lambda.union(&Region::singleton(x));
        let context: Vec<usize> =
            h.terms().iter().enumerate().filter(|(_, t)| t.support.is_subset(&lambda)).map(|(k, _)| k).collect();
        let removed: Vec<usize> = context.iter().copied().filter(|&k| h.terms()[k].support.contains(x)).collect();
        if removed.is_empty() {
            continue;
        }
        let y = removed.iter().fold(Region::empty(), |acc, &k| acc.union(&h.terms()[k].support));
        let d = r - 2.0;
        let ball = if d > 0.0 { lattice.open_ball(&y, d * params.a)?.intersection(&lambda) } else { Region::empty() };
        plans.push(StepPlan { site: x, tag: tag.clone(), context, removed, r: y.union(&ball), y });
    }

    let mut removals = plans
        .par_iter()
        .map(|p| correction_in_context(h, &p.context, &p.removed, &p.y, &p.r, t, s, q))
        .collect::<Result<Vec<_>>>()?;
    for (k, (removal, p)) in removals.iter_mut().zip(&plans).enumerate() {
        removal.step = k + 1;
        removal.label = format!("site {}", p.site);
        if r > 2.0 {
            let ball = lattice.open_ball(&Region::singleton(p.site), r * params.a)?;
            let lambda_j: Region = sites[..=sites.iter().position(|&x| x == p.site).expect("site in order")]
                .iter()
                .copied()
                .collect();
            if !removal.bar_r.is_subset(&ball.intersection(&lambda_j)) {
                return Err(Error::InvalidDecomposition(format!(
                    "correction support {} for site {} leaves B^o_ra",
                    removal.bar_r, p.site
                )));
            }
        }
    }
    let supports: Vec<Region> = removals.iter().map(|r| r.bar_r.clone()).collect();
    let layer_tags: Vec<String> = plans.iter().map(|p| p.tag.clone()).collect();
    let layers = consecutive_layers(&supports, &layer_tags);
    let envelope = if r > 2.0 {
        GrowthEnvelope::Ball { radius: 2.0 * params.a * r * layers.len() as f64 }
    } else {
        GrowthEnvelope::Everything
    };
    Ok(DecomposedEvolution {
        mode: DecompositionMode::Sequential,
        t,
        s,
        base_terms: Vec::new(),
        base: Vec::new(),
        removals,
        layers,
        envelope,
        parameter: r,
        a: params.a,
        claimed_error: sequential_error_bound(&params, n, r, q, t - s),
    })
}

/// Dense checks of a decomposition against the exact evolution.
#[derive(Clone, Debug, Serialize)]
pub struct Verification {
    /// `||V - U^H_ts||`.
    pub error: f64,
    /// `||U^{H_u} - V'_u U^{H_{u-1}}||` per removal step.
    pub step_errors: Vec<f64>,
    pub step_bounds: Vec<Bound>,
    /// The error is at most the sum of the per-step errors.
    pub telescoping_holds: bool,
    /// Every step error is within its bound and the error is within their sum;
    /// `None` when some step bound does not apply.
    pub bounds_hold: Option<bool>,
    pub telescoped_bound: Bound,
}

pub fn verify_decomposition(h: &LocalHamiltonian, dec: &DecomposedEvolution) -> Result<Verification> {
    let lattice = h.lattice();
    let dims = h.local_dims();
    let all = lattice.all_sites();
    let exact = Evolver::whole(h)?.u(dec.t, dec.s);
    let v = dec.dense(lattice, dims)?;
    let error = linalg::op_norm(&(&v - &exact));

    // U^{H_u} for u = 0..Ξ.
    let mut contexts = vec![dec.base_terms.clone()];
    for r in &dec.removals {
        let mut next = contexts.last().expect("non-empty").clone();
        next.extend_from_slice(&r.removed);
        contexts.push(next);
    }
    let propagators = contexts
        .par_iter()
        .map(|ctx| {
            let member = membership(h.terms().len(), ctx);
            Ok(Evolver::whole(&sub_hamiltonian(h, |k| member[k])?)?.u(dec.t, dec.s))
        })
        .collect::<Result<Vec<_>>>()?;
    let step_errors = dec
        .removals
        .iter()
        .enumerate()
        .map(|(u, r)| {
            let approx = apply_factor(dims, &all, &r.v_prime, &propagators[u])?;
            Ok(linalg::op_norm(&(&propagators[u + 1] - approx)))
        })
        .collect::<Result<Vec<f64>>>()?;
    let step_sum: f64 = step_errors.iter().sum();
    let telescoping_holds = error <= step_sum + BOUND_SLACK;
    let telescoped_bound = dec.telescoped_bound();
    let bounds_hold = telescoped_bound.value().map(|total| {
        let within = |x: f64, b: f64| x <= b * (1.0 + BOUND_SLACK) + BOUND_SLACK;
        within(error, total)
            && dec.removals.iter().zip(&step_errors).all(|(r, &e)| r.bound.value().is_some_and(|b| within(e, b)))
    });
    Ok(Verification {
        error,
        step_errors,
        step_bounds: dec.removals.iter().map(|r| r.bound.clone()).collect(),
        telescoping_holds,
        bounds_hold,
        telescoped_bound,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SupportGrowth {
    /// Layer-by-layer propagation through the actual factor supports.
    pub structural: Region,
    /// Closed-form envelope of the construction.
    pub envelope: Region,
}

/// Propagates `a_support` through `V* A V`, outermost layer first. Within a
/// layer the factors commute, so only those meeting the current support can
/// enlarge it.
pub fn support_growth(dec: &DecomposedEvolution, lattice: &Lattice, a_support: &Region) -> Result<SupportGrowth> {
    lattice.check_region(a_support)?;
    let factors = dec.factors();
    let mut layered = vec![false; factors.len()];
    let mut groups: Vec<Vec<usize>> = dec.layers.iter().map(|l| l.members.clone()).collect();
    dec.layers.iter().flat_map(|l| &l.members).for_each(|&m| layered[m] = true);
    groups.extend((0..factors.len()).filter(|&m| !layered[m]).map(|m| vec![m]));
    groups.sort_by_key(|g| g.iter().copied().min());
    let mut current = a_support.clone();
    for group in groups.iter().rev() {
        let grown = group
            .iter()
            .map(|&m| &factors[m].operator.support)
            .filter(|z| z.intersects(&current))
            .fold(current.clone(), |acc, z| acc.union(z));
        current = grown;
    }
    let envelope = match &dec.envelope {
        GrowthEnvelope::Everything => lattice.all_sites(),
        GrowthEnvelope::Ball { radius } => {
            if a_support.is_empty() {
                Region::empty()
            } else {
                lattice.open_ball(a_support, *radius)?
            }
        }
        GrowthEnvelope::Cube { r } => {
            let (edge, _) = lattice
                .hypercube_shape()
                .ok_or_else(|| Error::InvalidLattice("cube envelope needs a hypercube".into()))?;
            a_support.iter().try_fold(Region::empty(), |acc, x| {
                let c = lattice.coords(x)?;
                let cube = crate::metric_lattice::Cube::new(c.clone(), c)?.enlarged_clipped(*r, edge);
                Ok::<_, Error>(acc.union(&lattice.cube_region(&cube)?))
            })?
        }
    };
    Ok(SupportGrowth { structural: current, envelope })
}
