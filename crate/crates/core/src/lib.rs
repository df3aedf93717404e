//! Optimization-based solver for 3D-1D coupled elliptic problems on
//! non-conforming meshes.
//!
//! A 3D diffusion problem on a box is coupled to 1D problems on thin
//! segments through two auxiliary interface unknowns, `Ψ_D` (the 3D trace)
//! and `Ψ_Σ` (the 1D value on the lateral surface). The coupling is enforced
//! by minimizing their mismatch subject to the discrete subproblems, either
//! through the full saddle-point system ([`kkt`]) or the reduced SPD system
//! solved matrix-free by preconditioned CG ([`optsolver`]).

// NaN-rejecting guards are written `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod assembly;
pub mod error;
pub mod functions;
pub mod geom;
pub mod kkt;
pub mod linalg;
pub mod monolithic;
pub mod optsolver;
pub mod output;
pub mod problems;
pub mod quadrature;
pub mod sparse;
pub mod trace;

pub use error::{Error, Result};

/// Version of this library, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
