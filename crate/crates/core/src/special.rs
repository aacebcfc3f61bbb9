//! The sech-power integral used as closed-form oracle, and an overflow-free sech.

use std::f64::consts::PI;

pub use statrs::function::gamma::gamma;

/// ∫_{−∞}^{∞} sech^p(t) dt = √π Γ(p/2) / Γ((p+1)/2), valid for p > 0.
pub fn sech_power_integral(p: f64) -> f64 {
    assert!(p > 0.0, "sech power must be positive");
    PI.sqrt() * gamma(0.5 * p) / gamma(0.5 * (p + 1.0))
}

/// Overflow-free sech(t).
#[inline]
pub fn sech(t: f64) -> f64 {
    let e = (-t.abs()).exp();
    2.0 * e / (1.0 + e * e)
}
