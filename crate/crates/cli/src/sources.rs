//! Input loading and flag value parsers shared by the subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use certdyn::certification::{ProductState, ProductStateFile};
use certdyn::hamiltonian::{self, HamiltonianFile, LocalHamiltonian, ModelSize, StructuralParams};
use certdyn::metric_lattice::{Lattice, LatticeSpec};
use clap::Args;
use serde::de::DeserializeOwned;

/// Parses a JSON file, keeping the path and the parser's line and column in errors.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Comma-separated list of numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct NumList(pub Vec<f64>);

impl FromStr for NumList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(NumList)
    }
}

/// Sizes given as an inclusive range `a..b` or a comma-separated list.
#[derive(Clone, Debug, PartialEq)]
pub struct SizeList(pub Vec<usize>);

impl FromStr for SizeList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let int = |p: &str| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}"));
        if let Some((lo, hi)) = s.split_once("..") {
            let (lo, hi) = (int(lo)?, int(hi.trim_start_matches('='))?);
            if lo > hi {
                return Err(format!("empty range {s}"));
            }
            return Ok(SizeList((lo..=hi).collect()));
        }
        s.split(',').map(int).collect::<Result<Vec<_>, _>>().map(SizeList)
    }
}

/// A real number written as a decimal or as a fraction `p/q`.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"));
    let value = match s.split_once('/') {
        Some((p, q)) => {
            let q = num(q)?;
            if q == 0.0 {
                return Err(format!("{s}: zero denominator"));
            }
            num(p)? / q
        }
        None => num(s)?,
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(format!("{s} is not finite"))
    }
}

/// Short model names accepted next to the library's names.
pub fn model_kind(name: &str) -> &str {
    match name {
        "heisenberg" => "heisenberg_chain",
        "ising_zz" | "ising" => "ising_chain_zz",
        "grid" => "heisenberg_grid",
        other => other,
    }
}

/// A Hamiltonian from a file or from a built-in model.
#[derive(Args, Clone, Debug)]
pub struct HamiltonianSource {
    /// Hamiltonian JSON file.
    #[arg(long, value_name = "FILE", conflicts_with = "model")]
    pub hamiltonian: Option<PathBuf>,
    /// Built-in model: heisenberg, ising_zz, ising_transverse or heisenberg_grid.
    #[arg(long)]
    pub model: Option<String>,
    /// Chain length for chain models.
    #[arg(long)]
    pub n: Option<usize>,
    /// Edge length for grid models.
    #[arg(long)]
    pub edge: Option<usize>,
    /// Grid dimension.
    #[arg(long, default_value_t = 2)]
    pub eta: usize,
    /// Model couplings, comma separated; missing entries default to 1.
    #[arg(long, value_name = "LIST")]
    pub coupling: Option<NumList>,
}

impl HamiltonianSource {
    pub fn is_given(&self) -> bool {
        self.hamiltonian.is_some() || self.model.is_some()
    }

    pub fn load(&self) -> Result<LocalHamiltonian> {
        if let Some(path) = &self.hamiltonian {
            let file: HamiltonianFile = read_json(path)?;
            return file.build().with_context(|| format!("building the Hamiltonian in {}", path.display()));
        }
        let Some(model) = &self.model else {
            bail!("give --hamiltonian FILE or --model KIND");
        };
        let kind = model_kind(model);
        let size = match (self.n, self.edge) {
            (Some(n), None) => ModelSize::Chain(n),
            (None, Some(edge_length)) => ModelSize::Grid { edge_length, eta: self.eta },
            _ => bail!("model {model} needs exactly one of --n (chains) or --edge (grids)"),
        };
        let couplings = self.coupling.as_ref().map_or(&[][..], |c| &c.0[..]);
        Ok(hamiltonian::build_model(kind, size, couplings)?)
    }
}

/// A lattice from a file, a chain length or a grid shape.
#[derive(Args, Clone, Debug)]
pub struct LatticeSource {
    /// Lattice JSON file.
    #[arg(long, value_name = "FILE")]
    pub lattice: Option<PathBuf>,
    /// Open chain of this many sites.
    #[arg(long)]
    pub chain: Option<usize>,
    /// Hypercube edge length.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Hypercube dimension.
    #[arg(long, default_value_t = 2)]
    pub eta: usize,
}

impl LatticeSource {
    pub fn load(&self) -> Result<Lattice> {
        match (&self.lattice, self.chain, self.grid) {
            (Some(path), None, None) => {
                let spec: LatticeSpec = read_json(path)?;
                Lattice::from_spec(&spec).with_context(|| format!("building the lattice in {}", path.display()))
            }
            (None, Some(n), None) => Ok(Lattice::chain(n)?),
            (None, None, Some(edge)) => Ok(Lattice::hypercube(edge, self.eta)?),
            _ => bail!("give exactly one of --lattice FILE, --chain N or --grid L"),
        }
    }
}

pub fn load_state(path: Option<&Path>, n: usize) -> Result<ProductState> {
    match path {
        Some(p) => {
            let file: ProductStateFile = read_json(p)?;
            file.build().with_context(|| format!("building the product state in {}", p.display()))
        }
        None => Ok(ProductState::all_zero(n)?),
    }
}

pub fn load_params(path: &Path) -> Result<StructuralParams> {
    read_json(path)
}
