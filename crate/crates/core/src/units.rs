//! Unit helpers. Energies are angular frequencies in rad/s (hbar = 1), times
//! are in seconds and lengths in micrometres unless stated otherwise.

use std::f64::consts::TAU;

/// `2π × x MHz` in rad/s.
pub fn mhz(x: f64) -> f64 {
    TAU * 1e6 * x
}

/// Inverse of [`mhz`].
pub fn to_mhz(rad_per_s: f64) -> f64 {
    rad_per_s / (TAU * 1e6)
}

/// Microseconds to seconds.
pub fn us(x: f64) -> f64 {
    x * 1e-6
}

/// Seconds to microseconds.
pub fn to_us(seconds: f64) -> f64 {
    seconds * 1e6
}

/// Sweep rate in `2π × MHz/µs`, returned in rad/s².
pub fn mhz_per_us(x: f64) -> f64 {
    mhz(x) / us(1.0)
}
