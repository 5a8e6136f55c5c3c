//! Physical constants (SI, CODATA 2018 exact values where defined).

use std::f64::consts::PI;

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum, m/s.
pub const C: f64 = 299_792_458.0;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Elementary charge, C.
pub const E_CHARGE: f64 = 1.602_176_634e-19;
/// Standard gravity, m/s^2.
pub const G_ACCEL: f64 = 9.806_65;

/// Converts an energy in eV to an angular frequency in rad/s.
pub fn ev_to_rad_per_s(ev: f64) -> f64 {
    ev * E_CHARGE / HBAR
}

/// Stefan-Boltzmann constant pi^2 k_B^4 / (60 hbar^3 c^2).
pub fn stefan_boltzmann() -> f64 {
    PI * PI * K_B.powi(4) / (60.0 * HBAR.powi(3) * C * C)
}

/// Thermal wavelength hbar c / (k_B T). Infinite at T = 0.
pub fn thermal_wavelength(t: f64) -> f64 {
    if t <= 0.0 {
        f64::INFINITY
    } else {
        HBAR * C / (K_B * t)
    }
}
