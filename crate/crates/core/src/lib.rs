//! Characteristic-Galerkin finite elements for convection-diffusion on
//! unstructured triangular meshes.
//!
//! The centrepiece is the dual characteristic-Galerkin scheme
//! ([`schemes::DcgmOperator`]), which composes *test functions* with the
//! forward characteristic map and therefore conserves mass exactly. The
//! crate also ships the primal characteristic-Galerkin, SUPG and centered
//! schemes for comparison, the rotating-bell verification harness in
//! [`bench`], and a Kolmogorov forward solver for Heston's model in
//! [`heston`].

pub mod bench;
pub mod characteristics;
pub mod cli;
pub mod error;
pub mod fem;
pub mod heston;
pub mod linalg;
pub mod mesh;
pub mod quadrature;
pub mod schemes;

pub use error::{Error, Result};
pub use fem::FieldP1;
pub use mesh::{Mesh, TriLocation};
