//! Reference solutions: the rarefaction fan `w^R` and the viscous profile `w`
//! solving `w_t - w_xx + w w_x = 0` with step data.
//!
//! The viscous profile comes from the Hopf-Cole substitution `w = -2 (ln theta)_x`.
//! For step data the heat solution is
//!
//! ```text
//! theta = T_- + T_+,   T_+- = exp(u_+-^2 t/4 - u_+- x/2) * erfc(z_+-) / 2
//! z_- = (x - u_- t) / (2 sqrt t),   z_+ = (u_+ t - x) / (2 sqrt t)
//! ```
//!
//! and the Gaussian parts of `theta_x` cancel, leaving
//! `w = (u_- T_- + u_+ T_+) / (T_- + T_+)`. Everything is evaluated through
//! `d = ln T_- - ln T_+`, which stays moderate even where the individual
//! terms over- or underflow.

use crate::error::{Error, Result};
use crate::special::{d2ln_erfc, dln_erfc, ln_erfc};

/// Far-field states of a rarefaction problem, `u_minus < u_plus`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiemannData {
    u_minus: f64,
    u_plus: f64,
}

impl RiemannData {
    pub fn new(u_minus: f64, u_plus: f64) -> Result<Self> {
        if u_minus.is_finite() && u_plus.is_finite() && u_minus < u_plus {
            Ok(Self { u_minus, u_plus })
        } else {
            Err(Error::NotRarefaction { u_minus, u_plus })
        }
    }

    pub fn u_minus(&self) -> f64 {
        self.u_minus
    }

    pub fn u_plus(&self) -> f64 {
        self.u_plus
    }

    pub fn jump(&self) -> f64 {
        self.u_plus - self.u_minus
    }

    /// Entropy solution of the inviscid Riemann problem.
    pub fn rarefaction(&self, x: f64, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.rarefaction_unchecked(x, t))
    }

    #[inline]
    pub(crate) fn rarefaction_unchecked(&self, x: f64, t: f64) -> f64 {
        (x / t).clamp(self.u_minus, self.u_plus)
    }

    pub fn viscous_profile(&self, x: f64, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.hopf_cole(x, t).value)
    }

    pub fn viscous_profile_dx(&self, x: f64, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.hopf_cole(x, t).dx)
    }

    pub fn viscous_profile_dxx(&self, x: f64, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.hopf_cole(x, t).dxx)
    }

    /// Value and first two x-derivatives of the viscous profile; `t > 0`.
    pub fn hopf_cole(&self, x: f64, t: f64) -> ViscousSample {
        let (um, up) = (self.u_minus, self.u_plus);
        let sqrt_t = libm::sqrt(t);
        let zm = (x - um * t) / (2.0 * sqrt_t);
        let zp = (up * t - x) / (2.0 * sqrt_t);

        // d = ln T_- - ln T_+ and its x-derivatives
        let d = (um * um - up * up) * t / 4.0 - (um - up) * x / 2.0 + ln_erfc(zm) - ln_erfc(zp);
        let dz = 0.5 / sqrt_t;
        let d_x = -(um - up) / 2.0 + (dln_erfc(zm) + dln_erfc(zp)) * dz;
        let d_xx = (d2ln_erfc(zm) - d2ln_erfc(zp)) * dz * dz;

        // s = T_+ / (T_- + T_+) = 1 / (1 + e^d)
        let s = if d > 0.0 {
            let e = libm::exp(-d);
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + libm::exp(d))
        };
        // s (1 - s) = 1 / (4 cosh^2(d/2))
        let c = libm::cosh(0.5 * d);
        let s1s = 0.25 / (c * c);
        let jump = up - um;
        ViscousSample {
            value: um + jump * s,
            dx: -jump * s1s * d_x,
            dxx: -jump * s1s * (d_xx - (1.0 - 2.0 * s) * d_x * d_x),
        }
    }
}

impl RiemannData {
    /// Viscous profile for `w_t - nu w_xx + w w_x = 0`, via `w_nu(x, t) = w_1(x/nu, t/nu)`.
    pub fn hopf_cole_with_viscosity(&self, x: f64, t: f64, nu: f64) -> ViscousSample {
        if nu == 1.0 {
            return self.hopf_cole(x, t);
        }
        let w = self.hopf_cole(x / nu, t / nu);
        ViscousSample { value: w.value, dx: w.dx / nu, dxx: w.dxx / (nu * nu) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ViscousSample {
    pub value: f64,
    pub dx: f64,
    pub dxx: f64,
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::NonpositiveTime(t))
    }
}
