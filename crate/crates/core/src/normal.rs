//! Standard normal density and distribution functions.
//!
//! Tail probabilities go through `erfc` so that `1 - Φ(x)` keeps full
//! relative precision far into the upper tail.

use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// φ(x)
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Φ(x)
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// 1 − Φ(x)
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

/// ln(1 − Φ(x)), finite for every finite x.
pub fn ln_sf(x: f64) -> f64 {
    if x < 30.0 {
        sf(x).ln()
    } else {
        // Mills-ratio expansion; the truncation error is below 1e-9 relative here.
        let z2 = 1.0 / (x * x);
        let series = 1.0 - z2 + 3.0 * z2 * z2 - 15.0 * z2 * z2 * z2;
        ln_pdf(x) - x.ln() + series.ln()
    }
}
