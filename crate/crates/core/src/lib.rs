//! Spectral analysis of third-order operators with periodic coefficients
//! and their McKean transforms into Hill (Schrödinger) operators.

pub mod coefficients;
pub mod contour;
pub mod cubic;
pub mod error;
pub mod monodromy;
pub mod mckean;
pub mod ode;
pub mod ramifications;
pub mod schrodinger;
pub mod three_point;
pub mod verify;

pub use coefficients::{CoefficientPair, Symmetry, TrigSeries};
pub use error::{Result, SpectralError};
pub use ode::{Numerics, SpectralPoint, System, C64, OMEGA};
