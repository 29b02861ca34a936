//! Lieb-Robinson truncation bounds and their check against exact evolution.
//!
//! A plan truncates the evolution of an observable on `Y` to the Hamiltonian
//! restricted to the extension of `R`, where `Y ⊂ R`. The scaled distance is
//! `d_a = d(Y, Λ \ R) / a`.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::exact_engine::{self, DenseOperator, Evolver};
use crate::hamiltonian::{self, LocalHamiltonian, ParamOptions, StructuralParams};
use crate::linalg;
use crate::metric_lattice::Region;

pub const DEFAULT_Q: f64 = 0.5;

/// Either a bound value or the reason the bound does not apply.
#[derive(Clone, Debug, PartialEq)]
pub enum Bound {
    Applicable(f64),
    NotApplicable(String),
}

impl Bound {
    pub fn value(&self) -> Option<f64> {
        match self {
            Bound::Applicable(v) => Some(*v),
            Bound::NotApplicable(_) => None,
        }
    }

    pub fn is_applicable(&self) -> bool {
        matches!(self, Bound::Applicable(_))
    }

    pub fn into_result(self) -> Result<f64> {
        match self {
            Bound::Applicable(v) => Ok(v),
            Bound::NotApplicable(reason) => Err(Error::NotApplicable(reason)),
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Applicable(v) => write!(f, "{v:.16e}"),
            Bound::NotApplicable(_) => write!(f, "n/a"),
        }
    }
}

/// Applicable bounds serialize as numbers, the rest as the string `"n/a"`.
impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Bound::Applicable(v) => s.serialize_f64(*v),
            Bound::NotApplicable(_) => s.serialize_str("n/a"),
        }
    }
}

/// `x^n e^{-a x} <= 1` for every `x` at or above this threshold.
pub fn poly_exp_threshold(n: f64, a: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    (2.0 * n / a * (n / a).ln()).max(0.0)
}

/// Integer ceiling that ignores floating-point noise just above an integer.
fn ceil_scaled(d_a: f64) -> f64 {
    (d_a - 1e-12).ceil().max(0.0)
}

/// `⌈d_a⌉ > 2κ + 1`.
pub fn precondition_holds(d_a: f64, kappa: f64) -> bool {
    ceil_scaled(d_a) > 2.0 * kappa + 1.0
}

/// `⌈d_a⌉ > 2κ + 1` and `⌈d_a⌉ >= (2κ/q) ln(κ/q)`.
pub fn is_large_enough(d_a: f64, kappa: f64, q: f64) -> bool {
    let c = ceil_scaled(d_a);
    c > 2.0 * kappa + 1.0 && c >= poly_exp_threshold(kappa, q)
}

/// Smallest integer `m` such that `⌈d_a⌉ = m` is large enough.
pub fn min_large_enough(kappa: f64, q: f64) -> f64 {
    let above = (2.0 * kappa + 1.0).floor() + 1.0;
    above.max(poly_exp_threshold(kappa, q).ceil())
}

/// `exp(-(1-q)(⌈d_a⌉ - d_a))`.
pub fn alpha_q(d_a: f64, q: f64) -> f64 {
    if d_a.is_infinite() {
        return 1.0;
    }
    (-(1.0 - q) * (ceil_scaled(d_a) - d_a).max(0.0)).exp()
}

fn check_q(q: f64) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("q = {q} must lie in (0, 1)")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncationPlan {
    pub y: Region,
    pub r: Region,
    pub bar_r: Region,
    pub d_a: f64,
    pub q: f64,
    /// `(1 - q) d_a`.
    pub d: f64,
    pub alpha_q: f64,
    pub large_enough: bool,
}

impl TruncationPlan {
    pub fn new(h: &LocalHamiltonian, params: &StructuralParams, y: &Region, r: &Region, q: f64) -> Result<Self> {
        check_q(q)?;
        if y.is_empty() {
            return Err(Error::EmptyRegion("observable support Y".into()));
        }
        h.lattice().check_region(r)?;
        if !y.is_subset(r) {
            return Err(Error::InvalidParameter(format!("Y = {y} is not inside R = {r}")));
        }
        let d_a = h.lattice().distance_to_complement(y, r)? / params.a;
        Ok(TruncationPlan {
            y: y.clone(),
            r: r.clone(),
            bar_r: h.extension(r),
            d_a,
            q,
            d: (1.0 - q) * d_a,
            alpha_q: alpha_q(d_a, q),
            large_enough: is_large_enough(d_a, params.kappa, q),
        })
    }
}

/// `(2M/Z) ||A|| ⌈d_a⌉^κ exp(v|t| - ⌈d_a⌉)`, defined when `⌈d_a⌉ > 2κ + 1`.
pub fn quasilocality_bound(params: &StructuralParams, norm_a: f64, t: f64, plan: &TruncationPlan) -> Bound {
    if !precondition_holds(plan.d_a, params.kappa) {
        return Bound::NotApplicable(format!(
            "ceil(d_a) = {} does not exceed 2 kappa + 1 = {}",
            ceil_scaled(plan.d_a),
            2.0 * params.kappa + 1.0
        ));
    }
    if plan.d_a.is_infinite() || norm_a == 0.0 {
        return Bound::Applicable(0.0);
    }
    let c = ceil_scaled(plan.d_a);
    let log = params.c1() + norm_a.ln() + params.kappa * c.ln() + params.v * t.abs() - c;
    Bound::Applicable(log.exp())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimplifiedBound {
    pub bound: Bound,
    pub alpha_q: f64,
}

/// `(2M α_q / Z) ||A|| exp(v|t| - D)`, defined when `⌈d_a⌉` is large enough.
pub fn simplified_bound(params: &StructuralParams, norm_a: f64, t: f64, plan: &TruncationPlan) -> SimplifiedBound {
    let bound = if !plan.large_enough {
        Bound::NotApplicable(format!(
            "ceil(d_a) = {} is not large enough for kappa = {}, q = {}",
            ceil_scaled(plan.d_a),
            params.kappa,
            plan.q
        ))
    } else if plan.d_a.is_infinite() || norm_a == 0.0 {
        Bound::Applicable(0.0)
    } else {
        Bound::Applicable((params.c1() + plan.alpha_q.ln() + norm_a.ln() + params.v * t.abs() - plan.d).exp())
    };
    SimplifiedBound { bound, alpha_q: plan.alpha_q }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RequiredDistance {
    #[serde(rename = "D_min")]
    pub d_min: f64,
    pub d_a_min: f64,
    pub c1: f64,
    pub v: f64,
}

/// Smallest `D` with simplified bound at most `eps`, and the matching scaled
/// distance that is also large enough.
pub fn required_distance(params: &StructuralParams, norm_a: f64, t: f64, eps: f64, q: f64) -> Result<RequiredDistance> {
    check_q(q)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {eps} must be positive")));
    }
    let c1 = params.c1();
    let d_min = params.v * t.abs() + (1.0 / eps).ln() + norm_a.ln() + c1;
    let d_a_min = (d_min / (1.0 - q)).max(min_large_enough(params.kappa, q));
    Ok(RequiredDistance { d_min, d_a_min, c1, v: params.v })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservableRequirement {
    #[serde(rename = "D_min")]
    pub d_min: f64,
    pub delta: f64,
}

/// Length scale making a sum of `gamma_count` truncated observables accurate
/// to `delta = (I - Γγ)/2`.
pub fn approx_observable_requirement(
    gamma_count: usize,
    gamma: f64,
    infidelity: f64,
    params: &StructuralParams,
    t: f64,
) -> Result<ObservableRequirement> {
    let slack = infidelity - gamma_count as f64 * gamma;
    if !(slack > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance infeasible: {gamma_count} terms x gamma {gamma} is not below I = {infidelity}"
        )));
    }
    let d_min = params.v * t.abs() + (2.0 * gamma_count as f64 / slack).ln() + params.c1();
    Ok(ObservableRequirement { d_min, delta: slack / 2.0 })
}

/// Smallest `D` with `D + ln f(D) >= v|t| + ln(2n/(I - nγ)) + c1`.
///
/// `f` must be non-decreasing with `f <= n/Γ`; values below 1 are raised to 1.
pub fn approx_observable_requirement_with_f(
    n_sites: usize,
    gamma: f64,
    infidelity: f64,
    params: &StructuralParams,
    t: f64,
    f: impl Fn(f64) -> f64,
) -> Result<f64> {
    let n = n_sites as f64;
    let slack = infidelity - n * gamma;
    if !(slack > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance infeasible: n gamma = {} is not below I = {infidelity}",
            n * gamma
        )));
    }
    let rhs = params.v * t.abs() + (2.0 * n / slack).ln() + params.c1();
    let g = |d: f64| d + f(d).max(1.0).ln();
    let (mut lo, mut hi) = (rhs - n.ln() - 1.0, rhs);
    debug_assert!(g(hi) >= rhs);
    if g(lo) >= rhs {
        return Ok(lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= rhs {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-13 * (1.0 + hi.abs()) {
            break;
        }
    }
    Ok(hi)
}

/// `f(D) = (⌊D a⌋ / 2)^η` for cube partitions of edge `⌊D a⌋`.
pub fn cube_partition_f(a: f64, eta: usize) -> impl Fn(f64) -> f64 {
    move |d: f64| ((d * a + 1e-12).floor().max(0.0) / 2.0).powi(eta as i32)
}

/// Parameters for bounding evolution in the interaction picture: `J` and `v`
/// from the interaction part, `Z`, `M`, `κ`, `Y` and `a` from the full
/// Hamiltonian.
pub fn interaction_picture_params(h: &LocalHamiltonian, opts: &ParamOptions) -> Result<StructuralParams> {
    let full = hamiltonian::structural_params(h, opts)?;
    let split = h.interaction_split()?;
    let j = 2.0 * split.g.support_groups().iter().map(|g| g.sup_norm).fold(0.0, f64::max);
    Ok(StructuralParams { j, v: hamiltonian::velocity(j, full.z), ..full })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncationCheck {
    pub exact_error: f64,
    pub bound: Bound,
    /// `None` when the bound does not apply.
    pub satisfied: Option<bool>,
    pub plan: TruncationPlan,
}

/// Dense oracle for `||τ^H_{ts}(A) - τ^{H_barR}_{ts}(A)||`, caching the
/// full-system diagonalization.
pub struct TruncationOracle<'h> {
    h: &'h LocalHamiltonian,
    full: Evolver,
}

impl<'h> TruncationOracle<'h> {
    pub fn new(h: &'h LocalHamiltonian) -> Result<Self> {
        Ok(TruncationOracle { h, full: Evolver::whole(h)? })
    }

    /// Exact truncation error of the evolution from `s` to `t`.
    pub fn exact_error(&self, a: &DenseOperator, bar_r: &Region, t: f64, s: f64) -> Result<f64> {
        let dims = self.h.local_dims();
        let all = self.h.lattice().all_sites();
        if !a.support.is_subset(bar_r) {
            return Err(Error::InvalidParameter(format!("observable support {} is not inside {bar_r}", a.support)));
        }
        let exact = self.full.evolve(a, dims, t, s)?;
        let local = Evolver::new(self.h, bar_r)?.evolve(a, dims, t, s)?;
        let local_full = exact_engine::embed(&local, dims, &all)?;
        Ok(linalg::op_norm(&(exact.matrix - local_full.matrix)))
    }

    pub fn check(
        &self,
        params: &StructuralParams,
        a: &DenseOperator,
        r: &Region,
        t: f64,
        s: f64,
        q: f64,
    ) -> Result<TruncationCheck> {
        let plan = TruncationPlan::new(self.h, params, &a.support, r, q)?;
        let exact_error = self.exact_error(a, &plan.bar_r, t, s)?;
        let bound = quasilocality_bound(params, linalg::op_norm(&a.matrix), t - s, &plan);
        let satisfied = bound.value().map(|b| exact_error <= b * (1.0 + 1e-9) + 1e-12);
        Ok(TruncationCheck { exact_error, bound, satisfied, plan })
    }
}

/// One-shot version of [`TruncationOracle::check`] for evolution from 0 to `t`.
pub fn empirical_truncation_error(
    h: &LocalHamiltonian,
    params: &StructuralParams,
    a: &DenseOperator,
    r: &Region,
    t: f64,
) -> Result<TruncationCheck> {
    TruncationOracle::new(h)?.check(params, a, r, t, 0.0, DEFAULT_Q)
}
