//! Randomized property suites for the metric-space statements and the analytic
//! inequalities the bounds rely on. Each suite draws its cases from a seeded
//! generator and counts violations per property, so a run is reproducible
//! and a failure names the first counterexample.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact_engine;
use crate::linalg::{self, c64, CMatrix, CVector};
use crate::lr_bounds;
use crate::metric_lattice::{self, Cube, Lattice, Region, DIST_TOL};

/// Outcome of one property over all drawn cases.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PropertyTally {
    pub checked: usize,
    pub violations: usize,
    pub first_counterexample: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PropertyReport {
    pub suite: String,
    pub cases: usize,
    pub seed: u64,
    pub properties: BTreeMap<String, PropertyTally>,
}

impl PropertyReport {
    fn new(suite: &str, cases: usize, seed: u64) -> Self {
        PropertyReport { suite: suite.into(), cases, seed, ..Default::default() }
    }

    fn record(&mut self, name: &str, ok: bool, case: impl FnOnce() -> String) {
        let tally = self.properties.entry(name.to_string()).or_default();
        tally.checked += 1;
        if !ok {
            tally.violations += 1;
            if tally.first_counterexample.is_none() {
                tally.first_counterexample = Some(case());
            }
        }
    }

    pub fn total_violations(&self) -> usize {
        self.properties.values().map(|t| t.violations).sum()
    }

    pub fn passed(&self) -> bool {
        self.total_violations() == 0
    }

    /// Smallest number of checks made on any single property.
    pub fn min_checked(&self) -> usize {
        self.properties.values().map(|t| t.checked).min().unwrap_or(0)
    }
}

fn random_region(rng: &mut ChaCha8Rng, n: usize, max_len: usize) -> Region {
    let k = rng.gen_range(1..=max_len.min(n));
    (0..k).map(|_| rng.gen_range(0..n)).collect()
}

/// Radius on the metric's natural grid half of the time, a generic real otherwise.
fn random_radius(rng: &mut ChaCha8Rng, max: f64) -> f64 {
    match rng.gen_range(0..3) {
        0 => rng.gen_range(0..=max.ceil() as i64) as f64,
        1 => rng.gen_range(0..=max.ceil() as i64) as f64 + 0.5,
        _ => rng.gen_range(0.0..max),
    }
}

fn random_cube(rng: &mut ChaCha8Rng, edge: usize, eta: usize) -> Cube {
    let lower: Vec<i64> = (0..eta).map(|_| rng.gen_range(1..=edge as i64)).collect();
    let upper: Vec<i64> = lower.iter().map(|&x| rng.gen_range(x..=edge as i64)).collect();
    Cube::new(lower, upper).expect("matching dimensions")
}

fn positive(rng: &mut ChaCha8Rng, radius: f64, max: f64) -> f64 {
    if radius > 0.0 {
        radius
    } else {
        rng.gen_range(f64::EPSILON..max)
    }
}

/// `d(A, Λ∖B)`, infinite when `B` is everything.
fn dist_to_rest(lattice: &Lattice, a: &Region, b: &Region) -> f64 {
    let rest = lattice.all_sites().difference(b);
    if a.is_empty() || rest.is_empty() {
        return f64::INFINITY;
    }
    lattice.set_distance(a, &rest).expect("non-empty regions")
}

/// Ball and distance identities of a finite metric space, plus the cube
/// statements on hypercubes. Every case draws fresh regions and radii.
pub fn geometry_check(lattice: &Lattice, cases: usize, seed: u64) -> Result<PropertyReport> {
    let n = lattice.n_sites();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = PropertyReport::new("metric geometry", cases, seed);
    let all = lattice.all_sites();
    let scale = lattice.diameter(&all)? + 1.0;
    let tol = DIST_TOL * 10.0;

    for case in 0..cases {
        let y = random_region(&mut rng, n, 4);
        let mut r_set = random_region(&mut rng, n, n.div_ceil(2).max(1)).union(&y);
        // Keep the complement of R non-empty whenever Y allows it.
        if r_set.len() == n {
            let outside: Vec<usize> = (0..n).filter(|x| !y.contains(*x)).collect();
            if !outside.is_empty() {
                r_set = r_set.difference(&Region::singleton(outside[rng.gen_range(0..outside.len())]));
            }
        }
        let (r, s) = (random_radius(&mut rng, scale), random_radius(&mut rng, scale));
        let tag = |what: &str| format!("case {case}: Y = {y}, R = {r_set}, r = {r}, s = {s}: {what}");

        let open_r = lattice.open_ball(&y, r)?;
        let closed_r = lattice.closed_ball(&y, r)?;
        let open_s = lattice.open_ball(&y, s)?;
        let closed_s = lattice.closed_ball(&y, s)?;
        let d_y = dist_to_rest(lattice, &y, &r_set);

        let d = dist_to_rest(lattice, &y, &open_r);
        report.record("open ball complement distance", d >= r - tol, || tag(&format!("{d}")));
        let d = dist_to_rest(lattice, &y, &closed_r);
        report.record("closed ball complement distance", d > r, || tag(&format!("{d}")));
        // Open-ball statements need a positive radius; zero radii are redrawn so every case counts.
        let (r_pos, s_pos) = (positive(&mut rng, r, scale), positive(&mut rng, s, scale));
        if d_y.is_finite() {
            let d = dist_to_rest(lattice, &lattice.open_ball(&y, s_pos)?, &r_set);
            report.record("open ball shrinks distance to complement", d > d_y - s_pos - tol, || {
                tag(&format!("s' = {s_pos}: {d}"))
            });
        }
        if d_y.is_finite() {
            let d = dist_to_rest(lattice, &closed_s, &r_set);
            report.record("closed ball shrinks distance to complement", d >= d_y - s - tol, || {
                tag(&format!("{d}"))
            });
            let inner = lattice.open_ball(&y, d_y)?;
            report.record("ball of complement distance inside region", inner.is_subset(&r_set), || tag(""));
        }
        let target = lattice.open_ball(&y, r + s)?;
        let nested = [
            lattice.closed_ball(&open_s, r)?,
            if closed_s.is_empty() { Region::empty() } else { lattice.open_ball(&closed_s, r)? },
            lattice.open_ball(&open_s, r)?,
        ];
        report.record("nested balls inside sum ball", nested.iter().all(|b| b.is_subset(&target)), || tag(""));
        let (dr, dy) = (lattice.diameter(&lattice.open_ball(&y, r_pos)?)?, lattice.diameter(&y)?);
        report.record("open ball diameter", dr < 2.0 * r_pos + dy, || tag(&format!("r' = {r_pos}: {dr}")));
        if n > 1 {
            // Radii with r' + s' <= d(x, z), the boundary included a quarter of the time.
            let x = rng.gen_range(0..n);
            let z = (x + rng.gen_range(1..n)) % n;
            let dxz = lattice.dist(x, z);
            let rx = dxz * rng.gen_range(0.0..=1.0);
            let sz = if rng.gen_bool(0.25) { dxz - rx } else { (dxz - rx) * rng.gen_range(0.0..=1.0) };
            let bx = lattice.open_ball(&Region::singleton(x), rx)?;
            let bz = lattice.closed_ball(&Region::singleton(z), sz.max(0.0))?;
            report.record("separated balls are disjoint", bx.is_disjoint(&bz), || {
                tag(&format!("x = {x}, z = {z}, radii {rx} and {sz}"))
            });
        }

        // Extension under a random support family.
        let family: Vec<Region> = (0..rng.gen_range(1..=6)).map(|_| random_region(&mut rng, n, 3)).collect();
        let a = family.iter().map(|z| lattice.diameter(z)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
        let ext = metric_lattice::extension(&family, &r_set);
        report.record("extension inside closed ball", ext.is_subset(&lattice.closed_ball(&r_set, a)?), || {
            tag(&format!("family {family:?}"))
        });

        // A set meeting Y lies within its diameter of Y.
        let zset = random_region(&mut rng, n, 4).union(&Region::singleton(y.sites()[0]));
        let dz = lattice.diameter(&zset)?;
        let rz = dz + rng.gen_range(0.0..2.0) * f64::from(rng.gen_bool(0.5));
        report.record("meeting set inside closed ball", zset.is_subset(&lattice.closed_ball(&y, rz)?), || {
            tag(&format!("Z = {zset}"))
        });

        if let Some((edge, eta)) = lattice.hypercube_shape() {
            let cube = random_cube(&mut rng, edge, eta);
            let region = lattice.cube_region(&cube)?;
            let ball = lattice.closed_ball(&region, r)?;
            let big = lattice.cube_region(&cube.enlarged_clipped(r.floor() as i64, edge))?;
            report.record("closed ball of cube inside enlarged cube", ball.is_subset(&big), || {
                tag(&format!("cube {cube:?}"))
            });
            let other = random_cube(&mut rng, edge, eta);
            let meet = lattice.cube_region(&cube.intersection(&other)?)?;
            let expected = region.intersection(&lattice.cube_region(&other)?);
            report.record("cube intersection is componentwise", meet == expected, || {
                tag(&format!("cubes {cube:?} and {other:?}"))
            });
        }
    }
    Ok(report)
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
}

fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let h = random_matrix(rng, n);
    linalg::exp_minus_i_hermitian(&linalg::hermitian_part(&h), rng.gen_range(0.1..4.0))
}

fn random_state(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    let v = CVector::from_fn(n, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let norm = v.norm();
    v / c64(norm, 0.0)
}

/// `psi` nudged toward a random direction, so overlaps near one are sampled too.
fn nearby_state(rng: &mut ChaCha8Rng, psi: &CVector) -> CVector {
    let kick = random_state(rng, psi.len()) * c64(10f64.powf(rng.gen_range(-4.0..0.5)), 0.0);
    let phase = c64(0.0, rng.gen_range(0.0..std::f64::consts::TAU)).exp();
    let v = (psi + kick) * phase;
    let norm = v.norm();
    v / c64(norm, 0.0)
}

fn projector(psi: &CVector) -> CMatrix {
    psi * psi.adjoint()
}

/// Perturbation inequality for products, the polynomial-exponential and
/// logarithm bounds, and the vector-distance to trace-distance conversions.
pub fn inequality_check(cases: usize, seed: u64) -> Result<PropertyReport> {
    if cases == 0 {
        return Err(Error::InvalidParameter("at least one case is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = PropertyReport::new("analytic inequalities", cases, seed);
    let tol = 1e-12;
    for case in 0..cases {
        // ||U1 A U2 - V1 A V2|| <= ||(U1 - V1) A|| + ||A (U2 - V2)|| for unitary U2, V1.
        let dim = rng.gen_range(1..=6);
        let (u1, v2) = (random_matrix(&mut rng, dim), random_matrix(&mut rng, dim));
        let (u2, v1) = (random_unitary(&mut rng, dim), random_unitary(&mut rng, dim));
        let a = random_matrix(&mut rng, dim);
        let lhs = linalg::mul(&linalg::mul(&u1, &a), &u2) - linalg::mul(&linalg::mul(&v1, &a), &v2);
        let (left, right) = (linalg::mul(&(&u1 - &v1), &a), linalg::mul(&a, &(&u2 - &v2)));
        for (name, norm) in [
            ("product perturbation, operator norm", linalg::op_norm as fn(&CMatrix) -> f64),
            ("product perturbation, trace norm", linalg::trace_norm),
            ("product perturbation, Frobenius norm", linalg::frobenius_norm),
        ] {
            let (l, r) = (norm(&lhs), norm(&left) + norm(&right));
            report.record(name, l <= r * (1.0 + 1e-10) + tol, || format!("case {case}: dim {dim}, {l} > {r}"));
        }

        // x^n e^{-a x} <= 1 above the threshold, checked in logarithms.
        let n = if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(0.0..12.0) };
        let a = 10f64.powf(rng.gen_range(-2.0..1.0));
        let x = lr_bounds::poly_exp_threshold(n, a) * rng.gen_range(1.0..3.0) + rng.gen_range(0.0..1.0) * f64::from(rng.gen_bool(0.5));
        let log = if x == 0.0 { if n == 0.0 { 0.0 } else { f64::NEG_INFINITY } } else { n * x.ln() - a * x };
        report.record("polynomial times exponential", log <= 1e-12, || format!("case {case}: n = {n}, a = {a}, x = {x}"));

        // ln x <= x/2 - (1 - ln 2) with equality only at 2.
        let x = if rng.gen_bool(0.05) { 2.0 } else { rng.gen_range(1e-6..60.0) };
        let gap = x / 2.0 - (1.0 - std::f64::consts::LN_2) - x.ln();
        report.record("logarithm below tangent line", gap >= -1e-14, || format!("case {case}: x = {x}, gap {gap}"));
        let strict = if x == 2.0 { gap.abs() <= 1e-15 } else { (x - 2.0).abs() < 1e-3 || gap > 0.0 };
        report.record("logarithm equality only at two", strict, || format!("case {case}: x = {x}, gap {gap}"));

        // Vector distance and overlap defect against dense trace distances.
        let dim = rng.gen_range(2..=16);
        let psi = random_state(&mut rng, dim);
        let mut phi = if rng.gen_bool(0.5) { nearby_state(&mut rng, &psi) } else { random_state(&mut rng, dim) };
        // Flipping the sign keeps the projector and brings ||psi - phi|| into [0, sqrt 2].
        if (&psi - &phi).norm() > std::f64::consts::SQRT_2 {
            phi = -phi;
        }
        let trace = linalg::trace_norm(&(projector(&psi) - projector(&phi)));
        let eps = (&psi - &phi).norm().min(std::f64::consts::SQRT_2);
        let bound = exact_engine::trace_bound_from_vector_distance(eps)?;
        report.record("trace distance from vector distance", trace <= bound + 1e-10, || {
            format!("case {case}: eps = {eps}, trace {trace} > {bound}")
        });
        let ov = exact_engine::overlap(&psi, &phi);
        let defect = (1.0 - ov.norm()).clamp(0.0, 1.0);
        let (best, bound) = exact_engine::bounds_from_overlap(defect)?;
        let aligned = (&psi - &phi * (ov.conj() / c64(ov.norm().max(f64::MIN_POSITIVE), 0.0))).norm();
        report.record("phase-optimized vector distance", (aligned - best).abs() <= 1e-7, || {
            format!("case {case}: defect {defect}, aligned {aligned}, formula {best}")
        });
        let alpha = rng.gen_range(0.0..std::f64::consts::TAU);
        let other = (&psi - &phi * c64(0.0, alpha).exp()).norm();
        report.record("other phases are no closer", other >= best - 1e-7, || {
            format!("case {case}: alpha {alpha}, {other} < {best}")
        });
        report.record("trace distance from overlap", trace <= bound + 1e-10, || {
            format!("case {case}: defect {defect}, trace {trace} > {bound}")
        });
    }
    Ok(report)
}
