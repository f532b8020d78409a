//! Equilibrium measures, Riesz and logarithmic capacities, and shape
//! energies of charged liquid drops.
//!
//! The pipeline is: describe a compact set with a [`Shape`], [`discretize`]
//! it into a [`NodeCloud`], [`assemble_operator`] for a [`KernelParams`], then
//! hand the [`KernelOperator`] to one of the solvers:
//!
//! * [`equilibrium::equilibrium_measure`]: minimal-energy probability measure,
//!   energy and capacity;
//! * [`external_field::solve_external`]: zero-total-charge optimum under an
//!   external potential;
//! * [`entropic::solve_entropic`]: volume densities penalized by `∫ρ²`.
//!
//! [`instability`] builds the competitor families and stability scans on top.

pub mod cloud;
pub mod entropic;
pub mod equilibrium;
pub mod error;
pub mod external_field;
pub mod geometry;
pub mod harmonics;
pub mod instability;
pub mod kernel;
mod linalg;
pub mod operator;
pub mod quadrature;
pub mod report;

pub use cloud::{discretize, NodeCloud, Placement};
pub use entropic::{entropic_energy, solve_entropic, DensityResult};
pub use equilibrium::{equilibrium_measure, EquilibriumOptions, EquilibriumResult, Measure};
pub use error::{Error, Result};
pub use external_field::{
    field_energy, solve_external, ExternalPotential, FieldResult, SignedMeasure,
};
pub use geometry::{BallSpec, Shape};
pub use harmonics::HarmonicCoefficient;
pub use kernel::KernelParams;
pub use operator::{assemble_operator, KernelOperator};
pub use report::{drop_energy, EnergyReport};

/// Kernel and energy conventions, as printed by the command-line tool.
pub const CONVENTIONS: &str = "\
kernel: |x-y|^(alpha-N) for alpha < N, -log|x-y| for alpha = N (no physical constants)
energy: I(mu) = double integral of the kernel against mu x mu (no 1/2 factor)
capacity: 1/I for alpha < N, exp(-I) for alpha = N
pde constant (alpha = 2): -Laplacian v = (N-2)|S^(N-1)| mu, 2*pi for N = 2
drop energy: perimeter + Q^2 * minimal energy
external field: F(mu) = I_2(mu) + integral of phi dmu over zero-charge mu, phi = -E.x
entropic: J = min (1/4pi) I_2(rho) + integral of rho^2, unit mass";
