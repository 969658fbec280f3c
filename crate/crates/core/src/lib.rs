//! Pseudospectral simulation of 2+1 dimensional semilinear wave systems
//! `-Box u_i = R^{jkl}_i u_j Q(u_k, u_l)` with null-form nonlinearities, plus
//! the diagnostics used to check vector-field estimates numerically:
//! ghost-weight energies, Klainerman-Sobolev ratios, null-form ratios,
//! bootstrap margins and decay fits.
//!
//! Numerical kernels are generic over [`Real`] (`f32` or `f64`); the aliases
//! at the crate root fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod evolve;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod nonlinear;
pub mod scalar;
pub mod snapshot;
pub mod state;
pub mod theory;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Grid2D = grid::Grid<f64>;
pub type ScalarField = grid::Field<f64>;
pub type SpectralField = grid::Spectrum<f64>;
pub type FieldState = state::FieldState<f64>;
pub type CouplingTensor = nonlinear::CouplingTensor<f64>;
pub type Jet = geometry::Jet<f64>;
pub type WeightFields = geometry::WeightFields<f64>;
pub type WaveSystem = evolve::WaveSystem<f64>;
pub type DiagnosticsRecord = diagnostics::DiagnosticsRecord;
