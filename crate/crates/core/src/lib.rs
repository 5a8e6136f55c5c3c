//! Thermal radiation, radiative heat transfer and non-equilibrium Casimir
//! forces between spheres and plates in the scattering (T-matrix) formalism.
//!
//! Quantities are SI throughout. For sphere–plate configurations body 1 is
//! the plate and body 2 the sphere; forces on body 2 are positive towards
//! body 1.

// NaN inputs are rejected through negated comparisons (`!(x > 0.0)`).
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod constants;
pub mod dynamics;
pub mod error;
pub mod forces;
pub mod materials;
pub mod quadrature;
pub mod radiation;
pub mod scattering;
pub mod special;
pub mod transfer;
pub mod waves;
