//! Longitudinal phase dynamics of the race-track microtron.
//!
//! The map `f(psi, w) = (psi + w, w + 2π(cos(psi + w) − 1) − mu sin(psi + w))`
//! and the numerical machinery around it: local stability theory, refined
//! rotation numbers, raster stability domains, interpolating Hamiltonians and
//! high-precision invariant manifolds with their splitting.

mod dd;
pub mod domain;
pub mod error;
pub mod hamiltonian;
pub mod io;
pub mod local;
pub mod manifold;
pub mod map;
pub mod repro;
pub mod rotation;

pub use error::{Result, RtmError};
pub use map::{LiftedPoint, PhasePoint, RtmParams};
