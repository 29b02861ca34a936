use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("site {site} is outside the lattice of {n_sites} sites")]
    UnknownSite { site: usize, n_sites: usize },
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("lattice graph is disconnected")]
    Disconnected,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty region where a non-empty one is required: {0}")]
    EmptyRegion(String),
    #[error("operator is not Hermitian (deviation {deviation:.3e}): {context}")]
    NotHermitian { context: String, deviation: f64 },
    #[error("invalid Hamiltonian: {0}")]
    InvalidHamiltonian(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dense dimension {dim} exceeds the cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("invalid tensor network: {0}")]
    InvalidNetwork(String),
    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True when the failure is a documented inapplicability rather than bad input.
    pub fn is_not_applicable(&self) -> bool {
        matches!(self, Error::NotApplicable(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
