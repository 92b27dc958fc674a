//! Numerical machinery for one-dimensional attractive–repulsive interaction
//! energies `E(μ) = ∬ g(x − y) dμ(x) dμ(y)`: kernels and their hypotheses,
//! singular potentials, minimizers, mollification and regularity checks.

pub mod error;
pub mod ext;
pub mod kernel;
pub mod measure;
pub mod mollify;
pub mod potential;
pub mod quad;
pub mod regularity;
pub mod solver;

pub use error::{Error, Result};
pub use kernel::{Kernel, KernelSpec};
