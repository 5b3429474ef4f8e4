//! Phase-space types, Hamiltonian models, potentials and pointwise tests.

mod degeneracy;
mod model;
mod point;
mod potential;

pub use degeneracy::{
    bordered_matrix, default_iso_energetic_tol, fiberwise_iso_energetic_test,
    reversibility_check, IsoEnergeticTest,
};
pub use model::{
    fd_gradient, fd_hessian, hamiltonian_vector_field, symplectic_gradient, AffineMatrixField,
    DerivativeMode, Hamiltonian, HamiltonianModel, MatrixField, ModelKind, Perturbed,
};
pub use point::{ChartDomain, PhasePoint};
pub use potential::{
    FnPotential, PendulumWell, PotentialField, QuadraticPotential, ScaledPotential, SumPotential,
    Support, ZeroPotential,
};
pub use crate::linalg::{standard_symplectic_form, HamMatrix, SympMatrix};
