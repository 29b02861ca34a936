pub mod certification;
pub mod circuit_decomposition;
pub mod error;
pub mod exact_engine;
pub mod hamiltonian;
pub mod io;
pub mod linalg;
pub mod lr_bounds;
pub mod metric_lattice;
pub mod properties;
pub mod tensor_network;
pub mod trotter;

pub use error::{Error, Result};
