//! Resonances and scattering of the tunable Grover walk on finite graphs with tails.

pub mod coin;
pub mod error;
pub mod graph;
pub mod laplacian;
pub mod linalg;
pub mod perturbation;
pub mod scattering;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
