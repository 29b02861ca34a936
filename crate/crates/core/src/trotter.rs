//! First-order even/odd Trotter splitting of open nearest-neighbour chains.
//!
//! Bonds are `(k, k+1)` with zero-based `k`. Bonds with odd `k` form `H1`,
//! bonds with even `k` form `H2`; within each group supports are disjoint.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact_engine::{self, DenseOperator, Evolver};
use crate::hamiltonian::{self, LocalHamiltonian, ModelSize};
use crate::linalg::{self, CMatrix, Subsystems};

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EvenOddSplit {
    /// Term indices of bonds with odd left site.
    pub h1_terms: Vec<usize>,
    /// Term indices of bonds with even left site.
    pub h2_terms: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrotterPlan {
    pub steps: usize,
    pub tau: f64,
    pub split: EvenOddSplit,
}

impl TrotterPlan {
    pub fn new(h: &LocalHamiltonian, steps: usize, t: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidParameter("Trotter step count must be positive".into()));
        }
        Ok(TrotterPlan { steps, tau: t / steps as f64, split: split_even_odd(h)? })
    }

    pub fn time(&self) -> f64 {
        self.tau * self.steps as f64
    }
}

/// Splits a time-independent open chain with nearest-neighbour bond terms.
pub fn split_even_odd(h: &LocalHamiltonian) -> Result<EvenOddSplit> {
    let n = h.n_sites();
    let path: Vec<(usize, usize)> = (0..n.saturating_sub(1)).map(|k| (k, k + 1)).collect();
    if h.lattice().edges() != path {
        return Err(Error::InvalidParameter("Trotter splitting needs an open chain with sites in path order".into()));
    }
    if !h.is_time_independent() {
        return Err(Error::InvalidParameter("Trotter splitting needs a time-independent Hamiltonian".into()));
    }
    let mut split = EvenOddSplit { h1_terms: Vec::new(), h2_terms: Vec::new() };
    for (idx, term) in h.terms().iter().enumerate() {
        let s = term.support.sites();
        if s.len() != 2 || s[1] != s[0] + 1 {
            return Err(Error::InvalidParameter(format!(
                "term {idx} on {} is not a nearest-neighbour bond",
                term.support
            )));
        }
        if s[0] % 2 == 1 {
            split.h1_terms.push(idx);
        } else {
            split.h2_terms.push(idx);
        }
    }
    Ok(split)
}

fn group_matrix(h: &LocalHamiltonian, terms: &[usize]) -> Result<CMatrix> {
    let sub = h.with_terms(terms.iter().map(|&i| h.terms()[i].clone()).collect())?;
    Ok(sub.dense_on(&h.lattice().all_sites(), 0.0))
}

/// Dense `H1` and `H2`.
pub fn group_matrices(h: &LocalHamiltonian, split: &EvenOddSplit) -> Result<(CMatrix, CMatrix)> {
    exact_engine::check_dim(h.total_dim())?;
    Ok((group_matrix(h, &split.h1_terms)?, group_matrix(h, &split.h2_terms)?))
}

/// `exp(-i tau sum_{k in group} h_k)` built bond by bond.
fn layer(h: &LocalHamiltonian, terms: &[usize], tau: f64, out: CMatrix) -> CMatrix {
    let all = h.lattice().all_sites();
    let dims = h.local_dims();
    terms.iter().fold(out, |acc, &idx| {
        let term = &h.terms()[idx];
        let positions = term.support.positions_in(&all).expect("support inside lattice");
        let gate = linalg::exp_minus_i_hermitian(term.at(0.0).expect("constant term"), tau);
        Subsystems::new(dims, &positions).apply_left(&gate, &acc)
    })
}

fn matrix_power(base: &CMatrix, mut exp: usize) -> CMatrix {
    let n = base.nrows();
    let mut result = CMatrix::identity(n, n);
    let mut square = base.clone();
    while exp > 0 {
        if exp & 1 == 1 {
            result = linalg::mul(&result, &square);
        }
        exp >>= 1;
        if exp > 0 {
            square = linalg::mul(&square, &square);
        }
    }
    result
}

/// `(e^{-i H1 τ} e^{-i H2 τ})^L`.
pub fn trotter_propagator(plan: &TrotterPlan, h: &LocalHamiltonian) -> Result<DenseOperator> {
    let dim = h.total_dim();
    exact_engine::check_dim(dim)?;
    let second = layer(h, &plan.split.h2_terms, plan.tau, CMatrix::identity(dim, dim));
    let step = layer(h, &plan.split.h1_terms, plan.tau, second);
    Ok(DenseOperator::new(matrix_power(&step, plan.steps), h.lattice().all_sites()))
}

/// `||[H1, H2]||`: dense when the chain fits under the cap, otherwise the sum
/// of exact commutator norms of overlapping bond pairs.
pub fn commutator_norm(h: &LocalHamiltonian, split: &EvenOddSplit) -> Result<f64> {
    if exact_engine::check_dim(h.total_dim()).is_ok() {
        let (h1, h2) = group_matrices(h, split)?;
        return Ok(linalg::op_norm(&linalg::commutator(&h1, &h2)));
    }
    Ok(pairwise_commutator_bound(h, split))
}

/// Triangle-inequality bound `sum ||[h_a, h_b]||` over overlapping bonds.
pub fn pairwise_commutator_bound(h: &LocalHamiltonian, split: &EvenOddSplit) -> f64 {
    let mut total = 0.0;
    for &a in &split.h1_terms {
        for &b in &split.h2_terms {
            let (ta, tb) = (&h.terms()[a], &h.terms()[b]);
            if !ta.support.intersects(&tb.support) {
                continue;
            }
            let region = ta.support.union(&tb.support);
            let dims = h.dims_of(&region);
            let ea = Subsystems::new(&dims, &ta.support.positions_in(&region).expect("subset"))
                .embed(ta.at(0.0).expect("constant"));
            let eb = Subsystems::new(&dims, &tb.support.positions_in(&region).expect("subset"))
                .embed(tb.at(0.0).expect("constant"));
            total += linalg::op_norm(&linalg::commutator(&ea, &eb));
        }
    }
    total
}

/// `L τ² ||[H1,H2]|| / 2`.
pub fn first_order_bound(steps: usize, t: f64, commutator: f64) -> f64 {
    let tau = t / steps as f64;
    steps as f64 * tau * tau * commutator / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepsRequirement {
    #[serde(rename = "L_min")]
    pub l_min: u64,
    pub c_tilde: f64,
}

/// `L_min = max(1, ⌈c̃ t² n / (2 ε)⌉)` with `c̃ = ||[H1,H2]|| / n`.
pub fn required_steps(t: f64, eps: f64, h: &LocalHamiltonian) -> Result<StepsRequirement> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {eps} must be positive")));
    }
    let split = split_even_odd(h)?;
    let n = h.n_sites() as f64;
    let c_tilde = commutator_norm(h, &split)? / n;
    let raw = (c_tilde * t * t * n / (2.0 * eps)).ceil();
    if raw > u64::MAX as f64 {
        return Err(Error::InvalidParameter("required step count overflows".into()));
    }
    Ok(StepsRequirement { l_min: (raw as u64).max(1), c_tilde })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanRow {
    pub n: usize,
    pub error: f64,
    pub bound: f64,
}

impl ScanRow {
    pub fn satisfied(&self) -> bool {
        self.error <= self.bound * (1.0 + 1e-9) + 1e-12
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScanResult {
    pub rows: Vec<ScanRow>,
    /// Sizes dropped because they exceed the dense cap.
    pub skipped: Vec<usize>,
}

/// Exact error and first-order bound for one chain.
pub fn error_row(h: &LocalHamiltonian, steps: usize, t: f64) -> Result<ScanRow> {
    let plan = TrotterPlan::new(h, steps, t)?;
    let exact = Evolver::whole(h)?.u(t, 0.0);
    let trotter = trotter_propagator(&plan, h)?;
    let error = linalg::op_norm(&(exact - trotter.matrix));
    let bound = first_order_bound(steps, t, commutator_norm(h, &plan.split)?);
    Ok(ScanRow { n: h.n_sites(), error, bound })
}

/// Trotter error of `model` on chains of each length in `ns`, evaluated in parallel.
pub fn error_scan(model: &str, couplings: &[f64], ns: &[usize], t: f64, steps: usize) -> Result<ScanResult> {
    let (fits, skipped): (Vec<usize>, Vec<usize>) =
        ns.iter().partition(|&&n| n < usize::BITS as usize && exact_engine::check_dim(1usize << n).is_ok());
    let rows = fits
        .par_iter()
        .map(|&n| error_row(&hamiltonian::build_model(model, ModelSize::Chain(n), couplings)?, steps, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanResult { rows, skipped })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y ≈ slope x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidParameter("linear fit needs at least two paired points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("linear fit needs distinct x values".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(LinearFit { slope, intercept, r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{heisenberg_chain, ising_chain_zz, LocalTerm};
    use crate::linalg::frobenius_norm;
    use crate::metric_lattice::{Lattice, Region};
    use std::sync::Arc;

    fn bonds_of(h: &LocalHamiltonian, idx: &[usize]) -> Vec<Region> {
        idx.iter().map(|&i| h.terms()[i].support.clone()).collect()
    }

    #[test]
    fn split_examples() {
        let h2 = heisenberg_chain(2, 1.0).unwrap();
        let s2 = split_even_odd(&h2).unwrap();
        assert!(s2.h1_terms.is_empty());
        assert_eq!(bonds_of(&h2, &s2.h2_terms), vec![Region::from([0, 1])]);
        let h5 = heisenberg_chain(5, 1.0).unwrap();
        let s5 = split_even_odd(&h5).unwrap();
        assert_eq!(bonds_of(&h5, &s5.h1_terms), vec![Region::from([1, 2]), Region::from([3, 4])]);
        assert_eq!(bonds_of(&h5, &s5.h2_terms), vec![Region::from([0, 1]), Region::from([2, 3])]);
        assert!(split_even_odd(&hamiltonian::heisenberg_grid(2, 2, 1.0).unwrap()).is_err());
        assert!(split_even_odd(&hamiltonian::ising_transverse(3, 1.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn groups_commute_internally() {
        let h = heisenberg_chain(6, 1.0).unwrap();
        let split = split_even_odd(&h).unwrap();
        let all = h.lattice().all_sites();
        for group in [&split.h1_terms, &split.h2_terms] {
            for &a in group.iter() {
                for &b in group.iter() {
                    let ea = h.select(|t| t.support == h.terms()[a].support).dense_on(&all, 0.0);
                    let eb = h.select(|t| t.support == h.terms()[b].support).dense_on(&all, 0.0);
                    assert!(frobenius_norm(&linalg::commutator(&ea, &eb)) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn commuting_splits_are_exact() {
        let ising = ising_chain_zz(5, 0.8).unwrap();
        let row = error_row(&ising, 3, 1.1).unwrap();
        assert!(row.error < 1e-12);
        assert_eq!(required_steps(1.0, 1e-3, &ising).unwrap(), StepsRequirement { l_min: 1, c_tilde: 0.0 });
        let two = heisenberg_chain(2, 1.0).unwrap();
        for steps in [1, 4, 17] {
            assert!(error_row(&two, steps, 0.9).unwrap().error < 1e-12);
        }
        let h = heisenberg_chain(4, 1.0).unwrap();
        assert_eq!(required_steps(0.0, 1e-3, &h).unwrap().l_min, 1);
    }

    #[test]
    fn trotter_propagator_is_unitary_and_matches_layer_product() {
        let h = heisenberg_chain(4, 1.0).unwrap();
        let plan = TrotterPlan::new(&h, 5, 0.8).unwrap();
        let u = trotter_propagator(&plan, &h).unwrap();
        assert!(u.is_unitary());
        let (h1, h2) = group_matrices(&h, &plan.split).unwrap();
        let step = linalg::exp_minus_i_hermitian(&h1, plan.tau) * linalg::exp_minus_i_hermitian(&h2, plan.tau);
        let mut expected = CMatrix::identity(16, 16);
        for _ in 0..5 {
            expected = &expected * &step;
        }
        assert!(frobenius_norm(&(expected - u.matrix)) < 1e-12);
    }

    #[test]
    fn doubling_steps_reduces_error() {
        let h = heisenberg_chain(4, 1.0).unwrap();
        let coarse = error_row(&h, 10, 1.0).unwrap();
        let fine = error_row(&h, 20, 1.0).unwrap();
        assert!(fine.error <= coarse.error);
        assert!(coarse.satisfied() && fine.satisfied());
        assert!((coarse.bound - 2.0 * fine.bound).abs() < 1e-12);
    }

    #[test]
    fn required_steps_for_small_heisenberg_chain() {
        let h = heisenberg_chain(4, 1.0).unwrap();
        let split = split_even_odd(&h).unwrap();
        let (h1, h2) = group_matrices(&h, &split).unwrap();
        let comm = linalg::op_norm(&(&h1 * &h2 - &h2 * &h1));
        let req = required_steps(1.0, 1e-2, &h).unwrap();
        assert!((req.c_tilde - comm / 4.0).abs() < 1e-12);
        assert_eq!(req.l_min, (comm / (2.0 * 1e-2)).ceil() as u64);
        let row = error_row(&h, req.l_min as usize, 1.0).unwrap();
        assert!(row.error <= 1e-2);
        assert!(pairwise_commutator_bound(&h, &split) >= comm - 1e-12);
        assert!(required_steps(1.0, 0.0, &h).is_err());
    }

    #[test]
    fn reversed_ordering_obeys_the_same_bound() {
        let h = heisenberg_chain(5, 1.0).unwrap();
        let plan = TrotterPlan::new(&h, 8, 1.0).unwrap();
        let swapped = TrotterPlan {
            split: EvenOddSplit { h1_terms: plan.split.h2_terms.clone(), h2_terms: plan.split.h1_terms.clone() },
            ..plan.clone()
        };
        let exact = Evolver::whole(&h).unwrap().u(1.0, 0.0);
        let bound = first_order_bound(8, 1.0, commutator_norm(&h, &plan.split).unwrap());
        for p in [&plan, &swapped] {
            let err = linalg::op_norm(&(&exact - trotter_propagator(p, &h).unwrap().matrix));
            assert!(err <= bound);
        }
    }

    #[test]
    fn scan_skips_oversized_chains() {
        let res = error_scan("heisenberg_chain", &[1.0], &[2, 3, 60], 0.5, 4).unwrap();
        assert_eq!(res.rows.iter().map(|r| r.n).collect::<Vec<_>>(), vec![2, 3]);
        assert_eq!(res.skipped, vec![60]);
        assert!(res.rows[0].error < 1e-12);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let fit = linear_fit(&xs, &xs.map(|x| 2.0 * x + 1.0)).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12 && (fit.intercept - 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!(linear_fit(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn rejects_path_graph_in_wrong_order() {
        let lattice = Arc::new(Lattice::graph(3, &[(0, 2), (2, 1)]).unwrap());
        let bond = hamiltonian::heisenberg_bond();
        let h = LocalHamiltonian::qubits(
            lattice,
            vec![LocalTerm::constant([0, 2], bond.clone()), LocalTerm::constant([1, 2], bond)],
        )
        .unwrap();
        assert!(split_even_odd(&h).is_err());
    }
}
