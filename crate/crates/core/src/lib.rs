//! Numerical toolkit for the nonlinear electrodynamics that follows from the
//! Gauss-Bonnet term of a five-dimensional Kaluza-Klein metric.
//!
//! The vacuum Lagrangian is `½(E² - B²) + (3ε/2e²)(E·B)²`. The crate covers
//! the curvature algebra behind it, a periodic-box time evolver, static
//! toroidal solutions and far-field asymptotics.

pub mod asymptotics;
pub mod constitutive;
pub mod curvature;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod special;
pub mod toroidal;
pub mod vec3;

pub use constitutive::{CouplingParams, Observables};
pub use curvature::{Curvature5, FieldTensor4};
pub use error::{Error, Result};
pub use grid::{GridSpec, ScalarField, Stencil, Vec3Field};
pub use vec3::Vec3;
