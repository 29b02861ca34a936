//! Shot-noise simulation of estimating `Tr(ρ G')` term by term.
//!
//! `PauliSettings` draws one of the `3^k` local Pauli bases on the `k` qubits
//! of a term's support uniformly per shot and measures every qubit in it. With
//! `g = Σ_P c_P P`, the single-shot value `Σ_P c_P 3^{|S_P|} [P fits the
//! setting] Π_{j in S_P} b_j` is unbiased for `Tr(ρ g)`. `ObservableEigenbasis`
//! measures `g` itself and returns the observed eigenvalue.

use std::collections::HashMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{marginal, DensityMatrix, Witness};
use crate::error::{Error, Result};
use crate::linalg::{c64, CMatrix, Spectral, Subsystems, C64};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementScheme {
    #[default]
    PauliSettings,
    ObservableEigenbasis,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TermEstimate {
    pub mean: f64,
    /// Unbiased sample variance of single-shot values; `None` for one shot.
    pub sample_variance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasurementEstimate {
    #[serde(rename = "E_rho_hat")]
    pub e_rho_hat: f64,
    pub std_error: Option<f64>,
    pub shots_per_term: usize,
    pub terms: Vec<TermEstimate>,
}

/// `c_P = Tr(g P) / 2^k` indexed by base-4 codes (`I, X, Y, Z` = `0..4`,
/// first qubit most significant).
pub fn pauli_coefficients(g: &CMatrix) -> Result<Vec<f64>> {
    let dim = g.nrows();
    if !dim.is_power_of_two() || g.ncols() != dim || dim < 2 {
        return Err(Error::DimensionMismatch(format!("{}x{} is not a multi-qubit operator", g.nrows(), g.ncols())));
    }
    let k = dim.trailing_zeros() as usize;
    let mut out = vec![0.0; 1 << (2 * k)];
    for (code, slot) in out.iter_mut().enumerate() {
        let digits: Vec<usize> = (0..k).map(|j| (code >> (2 * (k - 1 - j))) & 3).collect();
        let flip = digits.iter().enumerate().fold(0usize, |m, (j, &d)| {
            if d == 1 || d == 2 {
                m | (1 << (k - 1 - j))
            } else {
                m
            }
        });
        let mut acc = c64(0.0, 0.0);
        for a in 0..dim {
            let mut phase = c64(1.0, 0.0);
            for (j, &d) in digits.iter().enumerate() {
                let bit = (a >> (k - 1 - j)) & 1;
                phase *= match (d, bit) {
                    (2, 0) => c64(0.0, 1.0),
                    (2, _) => c64(0.0, -1.0),
                    (3, 1) => c64(-1.0, 0.0),
                    _ => c64(1.0, 0.0),
                };
            }
            acc += g[(a, a ^ flip)] * phase;
        }
        *slot = acc.re / dim as f64;
    }
    Ok(out)
}

/// Rows are `<e_+|`, `<e_-|` for the Pauli basis `axis` (`1..=3`).
fn basis_change(axis: usize) -> CMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let entries = match axis {
        1 => [c64(h, 0.0), c64(h, 0.0), c64(h, 0.0), c64(-h, 0.0)],
        2 => [c64(h, 0.0), c64(0.0, -h), c64(h, 0.0), c64(0.0, h)],
        _ => [c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)],
    };
    CMatrix::from_row_slice(2, 2, &entries)
}

/// Outcome distribution and single-shot values for one Pauli setting.
struct SettingTable {
    dist: WeightedIndex<f64>,
    values: Vec<f64>,
}

struct PauliSampler {
    k: usize,
    marginal: CMatrix,
    coefficients: Vec<f64>,
    tables: HashMap<usize, SettingTable>,
}

impl PauliSampler {
    fn new(marginal: CMatrix, g: &CMatrix) -> Result<Self> {
        let coefficients = pauli_coefficients(g)?;
        let k = g.nrows().trailing_zeros() as usize;
        Ok(PauliSampler { k, marginal, coefficients, tables: HashMap::new() })
    }

    /// Setting digits in `1..=3`, first qubit first.
    fn axes(&self, setting: usize) -> Vec<usize> {
        (0..self.k).map(|j| (setting / 3usize.pow((self.k - 1 - j) as u32)) % 3 + 1).collect()
    }

    fn table(&mut self, setting: usize) -> Result<&SettingTable> {
        if !self.tables.contains_key(&setting) {
            let axes = self.axes(setting);
            let probs = setting_probabilities(&self.marginal, &axes);
            let dist = WeightedIndex::new(&probs).map_err(|e| Error::Numerical(format!("outcome distribution: {e}")))?;
            let values = (0..1usize << self.k).map(|b| self.shot_value(&axes, b)).collect();
            self.tables.insert(setting, SettingTable { dist, values });
        }
        Ok(&self.tables[&setting])
    }

    fn shot_value(&self, axes: &[usize], outcome: usize) -> f64 {
        let k = self.k;
        (0..1usize << k)
            .map(|subset| {
                let mut code = 0usize;
                let mut sign = 1.0;
                let mut weight = 1.0;
                for (j, &axis) in axes.iter().enumerate() {
                    code <<= 2;
                    if subset >> (k - 1 - j) & 1 == 1 {
                        code |= axis;
                        weight *= 3.0;
                        if outcome >> (k - 1 - j) & 1 == 1 {
                            sign = -sign;
                        }
                    }
                }
                self.coefficients[code] * weight * sign
            })
            .sum()
    }

    fn sample(&mut self, rng: &mut ChaCha8Rng) -> Result<f64> {
        let setting = rng.gen_range(0..3usize.pow(self.k as u32));
        let table = self.table(setting)?;
        Ok(table.values[table.dist.sample(rng)])
    }
}

struct EigenSampler {
    dist: WeightedIndex<f64>,
    values: Vec<f64>,
}

impl EigenSampler {
    fn new(marginal: &CMatrix, g: &CMatrix) -> Result<Self> {
        let spectral = Spectral::of_hermitian(g);
        let probs: Vec<f64> = (0..spectral.dim())
            .map(|m| {
                let v = spectral.vectors.column(m);
                let p: C64 = (v.adjoint() * marginal * v)[(0, 0)];
                p.re.max(0.0)
            })
            .collect();
        let dist = WeightedIndex::new(&probs).map_err(|e| Error::Numerical(format!("outcome distribution: {e}")))?;
        Ok(EigenSampler { dist, values: spectral.values })
    }
}

fn estimate_term(
    rho: &DensityMatrix,
    witness: &Witness,
    index: usize,
    shots: usize,
    seed: u64,
    scheme: MeasurementScheme,
) -> Result<TermEstimate> {
    let term = &witness.terms[index];
    let m = marginal(rho, &witness.local_dims, &term.operator.support);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let samples: Vec<f64> = match scheme {
        MeasurementScheme::PauliSettings => {
            if term.operator.support.iter().any(|x| witness.local_dims[x] != 2) {
                return Err(Error::InvalidParameter("Pauli settings need qubit sites".into()));
            }
            let mut sampler = PauliSampler::new(m, &term.operator.matrix)?;
            (0..shots).map(|_| sampler.sample(&mut rng)).collect::<Result<_>>()?
        }
        MeasurementScheme::ObservableEigenbasis => {
            let sampler = EigenSampler::new(&m, &term.operator.matrix)?;
            (0..shots).map(|_| sampler.values[sampler.dist.sample(&mut rng)]).collect()
        }
    };
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sample_variance =
        (samples.len() > 1).then(|| samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0));
    Ok(TermEstimate { mean, sample_variance })
}

/// Estimates `Tr(ρ G')` from `shots` simulated measurements per term.
///
/// Each term draws from its own ChaCha stream of `seed`, so results do not
/// depend on thread scheduling.
pub fn simulate_measurements(
    rho: &DensityMatrix,
    witness: &Witness,
    shots: usize,
    seed: u64,
    scheme: MeasurementScheme,
) -> Result<MeasurementEstimate> {
    if shots == 0 {
        return Err(Error::InvalidParameter("shots per term must be positive".into()));
    }
    let dim: usize = witness.local_dims.iter().product();
    if rho.dim() != dim {
        return Err(Error::DimensionMismatch(format!("density matrix of dimension {} for {dim}", rho.dim())));
    }
    let terms = (0..witness.terms.len())
        .into_par_iter()
        .map(|i| estimate_term(rho, witness, i, shots, seed, scheme))
        .collect::<Result<Vec<_>>>()?;
    let e_rho_hat = terms.iter().map(|t| t.mean).sum();
    let std_error = terms
        .iter()
        .map(|t| t.sample_variance.map(|v| v / shots as f64))
        .sum::<Option<f64>>()
        .map(f64::sqrt);
    Ok(MeasurementEstimate { e_rho_hat, std_error, shots_per_term: shots, terms })
}

/// Exact single-shot variance of the Pauli-settings estimator for one term.
pub fn pauli_shot_variance(marginal: &CMatrix, g: &CMatrix) -> Result<f64> {
    let sampler = PauliSampler::new(marginal.clone(), g)?;
    let settings = 3usize.pow(sampler.k as u32);
    let mut second = 0.0;
    let mut first = 0.0;
    for s in 0..settings {
        let axes = sampler.axes(s);
        let values: Vec<f64> = (0..1usize << sampler.k).map(|b| sampler.shot_value(&axes, b)).collect();
        let probs = setting_probabilities(marginal, &axes);
        for (p, v) in probs.iter().zip(&values) {
            first += p * v / settings as f64;
            second += p * v * v / settings as f64;
        }
    }
    Ok(second - first * first)
}

fn setting_probabilities(marginal: &CMatrix, axes: &[usize]) -> Vec<f64> {
    let dims = vec![2; axes.len()];
    let mut rotated = marginal.clone();
    for (j, &axis) in axes.iter().enumerate() {
        let sys = Subsystems::new(&dims, &[j]);
        let v = basis_change(axis);
        rotated = sys.apply_right(&sys.apply_left(&v, &rotated), &v.adjoint());
    }
    (0..rotated.nrows()).map(|i| rotated[(i, i)].re.max(0.0)).collect()
}
