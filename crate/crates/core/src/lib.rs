//! Exact finite-volume Ising model on the square lattice, computed two ways:
//! through the transfer matrix and its Clifford-algebra fermions, and through
//! massive s-holomorphic functions and their boundary value problems.
//!
//! Every module works at desk scale with dense linear algebra and exhaustive
//! enumeration, so each identity between the two pictures can be checked
//! numerically to near machine precision.

pub mod error;
pub mod lattice;
pub mod numerics;
pub mod observables;
pub mod par;
pub mod propagator;
pub mod rps;
pub mod shol_core;
pub mod transfer;

pub use error::{Error, Result};
pub use num_complex::Complex64;
