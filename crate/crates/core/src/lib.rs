//! Numerical laboratory for axisymmetric Euler-Boussinesq flow on a periodic box.

pub mod axisym;
pub mod battery;
pub mod commutator;
pub mod degiorgi;
pub mod dyadic;
pub mod error;
mod fft;
pub mod field;
pub mod grid;
pub mod lorentz;
pub mod reduce;
pub mod snapshot;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use field::{Mode, ScalarField, SpectralField, SpectralVector, VectorField};
pub use grid::Grid;
