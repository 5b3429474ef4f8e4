//! Periodic orbits, fibered symplectic normal forms and potential perturbations
//! of (possibly non-convex) Hamiltonian systems on `T*R^{d+1}`.
//!
//! The pipeline: integrate the flow and its variational equation, locate a
//! periodic orbit, check that it has a neat time where the bordered fiber
//! Hessian is non-degenerate, straighten the orbit into the normal form
//! `(D, K(t), a(t))`, analyse the linear control system on `Sp(2d)` that the
//! normal form induces, and synthesize an admissible potential whose effect on
//! the restricted linearized return map hits a prescribed target.

pub mod control;
pub mod curves;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod linalg;
pub mod normalform;
pub mod ode;
pub mod orbits;
pub mod potentials;
pub mod profiles;
pub mod roots;
pub mod verify;
pub mod zoo;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
