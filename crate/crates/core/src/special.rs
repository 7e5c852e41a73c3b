//! Complementary error function helpers in overflow-safe forms.

use core::f64::consts::FRAC_2_SQRT_PI;

const FRAC_1_SQRT_PI: f64 = 0.5 * FRAC_2_SQRT_PI;

/// Below this argument `exp(z^2) * erfc(z)` is evaluated directly.
const CF_SWITCH: f64 = 3.0;
const CF_DEPTH: usize = 160;

pub fn erfc(z: f64) -> f64 {
    libm::erfc(z)
}

/// Scaled complementary error function `exp(z^2) * erfc(z)`.
///
/// Finite for every `z >= -26`; beyond that the true value overflows.
pub fn erfcx(z: f64) -> f64 {
    if z < CF_SWITCH {
        libm::exp(z * z) * libm::erfc(z)
    } else {
        // Laplace continued fraction, partial numerators k/2.
        let mut t = z;
        for k in (1..=CF_DEPTH).rev() {
            t = z + (k as f64 * 0.5) / t;
        }
        FRAC_1_SQRT_PI / t
    }
}

/// `ln erfc(z)`, finite for all finite `z`.
pub fn ln_erfc(z: f64) -> f64 {
    if z < 0.0 {
        libm::log(libm::erfc(z))
    } else {
        libm::log(erfcx(z)) - z * z
    }
}

/// Logarithmic derivative `d/dz ln erfc(z) = -2 exp(-z^2) / (sqrt(pi) erfc(z))`.
pub fn dln_erfc(z: f64) -> f64 {
    if z < 0.0 {
        -FRAC_2_SQRT_PI * libm::exp(-z * z) / libm::erfc(z)
    } else {
        -FRAC_2_SQRT_PI / erfcx(z)
    }
}

/// Second derivative of `ln erfc`, using `g' = -2 z g - g^2`.
pub fn d2ln_erfc(z: f64) -> f64 {
    let g = dln_erfc(z);
    -g * (2.0 * z + g)
}
