//! Discontinuous Galerkin boundary elements for the hypersingular operator on
//! the flat square screen `Γ = (0,1)²`.
//!
//! The pipeline is: [`mesh`] → [`space`] → [`quadrature`] → [`assembly`] →
//! [`solve`] → [`study`]. A conforming `H̃^{1/2}` Galerkin solver shares the
//! same quadrature and serves as the energy reference.

// `!(x > 0.0)` is used on purpose so that NaN is rejected together with the bound.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod error;
pub mod gauss;
pub mod mesh;
pub mod quadrature;
pub mod solve;
pub mod space;
pub mod study;

pub use assembly::{assemble_conforming, assemble_dg, ConformingSystem, DgConfig, DgSystem, LoadFn};
pub use error::{Error, Result};
pub use mesh::{build_uniform_square_mesh, Edge, Mesh, PairClass, Point2};
pub use quadrature::{BruteForceOracle, GalerkinQuadrature, PairIntegrator};
pub use solve::{solve_dense, FieldView, Solution, SolverKind};
pub use space::{build_space, HpSpace, SpaceKind};
pub use study::{EnergyReference, Method, StudyRecord};
