//! Exterior Helmholtz obstacle scattering at desk scale.
//!
//! The crate solves the exterior scattering problem for a sound-soft,
//! sound-hard, or impedance obstacle with a smooth star-shaped boundary,
//! using a direct second-kind boundary integral formulation discretized by a
//! Nystrom method on a Gauss-Legendre x trapezoid parameter grid. On top of
//! the solver it provides:
//!
//! - far-field patterns, scattered/total field evaluation, and obstacle
//!   Green's functions ([`fields`]),
//! - an exact partial-wave series oracle for the sphere ([`oracle`]),
//! - a verification harness that exercises the classical identities of the
//!   theory (reciprocity, plane-wave limit of the Green's function, the
//!   two-obstacle far-field difference formula, Rellich-type flux behavior,
//!   boundary-trace reproduction, optical theorem, analytic continuation of
//!   patterns from a cap) and reports residuals ([`verify`]),
//! - a fixed-incident-direction shape and boundary-condition inversion demo
//!   driven by Levenberg-Marquardt ([`inverse`]).

// dense index arithmetic reads better with explicit loop indices
#![allow(clippy::needless_range_loop)]

pub mod fields;
pub mod geom;
pub mod inverse;
pub mod kernels;
pub mod linalg;
pub mod mathfn;
pub mod oracle;
pub mod solver;
pub mod verify;

pub use geom::{QuadSurface, SurfaceSpec, Vec3};
pub use kernels::Wavenumber;
