//! Grid norms, distances to the reference profiles, and power-law fits.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::FieldState;
use crate::references::RiemannData;

/// `(h sum w_i |f_i|^p)^(1/p)` with trapezoidal end weights; `max |f_i|` for `p = inf`.
pub fn lp_norm(field: &[f64], h: f64, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::BadP(p));
    }
    if p == f64::INFINITY {
        return Ok(field.iter().fold(0.0, |m, v| m.max(v.abs())));
    }
    let n = field.len();
    if n == 0 {
        return Ok(0.0);
    }
    let term = |v: f64| if p == 1.0 { v.abs() } else { libm::pow(v.abs(), p) };
    let mut sum: f64 = field.iter().map(|&v| term(v)).sum();
    if n > 1 {
        sum -= 0.5 * (term(field[0]) + term(field[n - 1]));
    }
    let integral = h * sum;
    Ok(if p == 1.0 { integral } else { libm::pow(integral, 1.0 / p) })
}

/// `‖u - w^R(t)‖_p` on the grid.
pub fn error_to_rarefaction(state: &FieldState, r: &RiemannData, p: f64) -> Result<f64> {
    let t = state.time;
    if !(t > 0.0) {
        return Err(Error::NonpositiveTime(t));
    }
    let diff: Vec<f64> = state
        .grid
        .nodes()
        .zip(&state.values)
        .map(|(x, &u)| u - r.rarefaction_unchecked(x, t))
        .collect();
    lp_norm(&diff, state.grid.h, p)
}

/// Viscous profile with viscosity `nu` sampled on the state's grid at its time.
pub fn sample_viscous(state: &FieldState, r: &RiemannData, nu: f64) -> Result<Vec<f64>> {
    let t = state.time;
    if !(t > 0.0) {
        return Err(Error::NonpositiveTime(t));
    }
    Ok(state.grid.nodes().map(|x| r.hopf_cole_with_viscosity(x, t, nu).value).collect())
}

/// `‖u - w(t)‖_p` against the viscous profile with viscosity `nu`.
pub fn error_to_viscous(state: &FieldState, r: &RiemannData, nu: f64, p: f64) -> Result<f64> {
    let w = sample_viscous(state, r, nu)?;
    let diff: Vec<f64> = state.values.iter().zip(&w).map(|(u, w)| u - w).collect();
    lp_norm(&diff, state.grid.h, p)
}

/// Difference quotients `(u_{i+1} - u_i)/h` including both ghost intervals.
pub fn difference_quotients(state: &FieldState) -> Vec<f64> {
    let h = state.grid.h;
    state.one_sided_differences().into_iter().map(|d| d / h).collect()
}

/// `‖u_x‖_p` from forward difference quotients.
pub fn derivative_norm(state: &FieldState, p: f64) -> Result<f64> {
    lp_norm(&difference_quotients(state), state.grid.h, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Correction {
    None,
    /// Divide by `[log(2+t)]^((1+1/p)/2)`.
    SqrtLog,
}

impl Correction {
    pub fn factor(self, t: f64, p: f64) -> f64 {
        match self {
            Correction::None => 1.0,
            Correction::SqrtLog => libm::pow(libm::log(2.0 + t), (1.0 + 1.0 / p) / 2.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Correction::None => "none",
            Correction::SqrtLog => "sqrt_log",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub p: f64,
    pub exponent: f64,
    pub log_constant: f64,
    /// RMS residual in log-log space.
    pub residual: f64,
    pub window: (f64, f64),
    pub correction: Correction,
}

/// Least-squares line through `(log t, log(err / correction(t)))`.
pub fn fit_rate(times: &[f64], errors: &[f64], p: f64, correction: Correction) -> Result<RateFit> {
    let n = times.len().min(errors.len());
    if n < 5 || times.len() != errors.len() {
        return Err(Error::TooFewPoints(n));
    }
    if !(p >= 1.0) {
        return Err(Error::BadP(p));
    }
    if let Some(&t) = times.iter().find(|&&t| !(t > 0.0)) {
        return Err(Error::NonpositiveTime(t));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::UnsortedTimes);
    }
    if let Some(&e) = errors.iter().find(|&&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::NonpositiveError(e));
    }
    let xs: Vec<f64> = times.iter().map(|&t| libm::log(t)).collect();
    let ys: Vec<f64> = times
        .iter()
        .zip(errors)
        .map(|(&t, &e)| libm::log(e / correction.factor(t, p)))
        .collect();
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(&ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let exponent = sxy / sxx;
    let log_constant = my - exponent * mx;
    let ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (log_constant + exponent * x);
            r * r
        })
        .sum();
    Ok(RateFit {
        p,
        exponent,
        log_constant,
        residual: libm::sqrt(ss / nf),
        window: (times[0], times[n - 1]),
        correction,
    })
}

/// `‖u-w‖_p / ((‖u_x‖_inf + ‖w_x‖_inf)^a ‖u-w‖_1^(1-a))` with `a = (1-1/p)/2`;
/// 0 when `u = w`.
pub fn gn_diagnostic(state: &FieldState, w: &[f64], p: f64) -> Result<f64> {
    if !(state.time > 0.0) {
        return Err(Error::NonpositiveTime(state.time));
    }
    if w.len() != state.values.len() {
        return Err(Error::GridMismatch);
    }
    let h = state.grid.h;
    let diff: Vec<f64> = state.values.iter().zip(w).map(|(u, w)| u - w).collect();
    let num = lp_norm(&diff, h, p)?;
    let l1 = lp_norm(&diff, h, 1.0)?;
    if num == 0.0 || l1 == 0.0 {
        return Ok(0.0);
    }
    let a = 0.5 * (1.0 - 1.0 / p);
    let ux = derivative_norm(state, f64::INFINITY)?;
    let wx = w.windows(2).fold(0.0f64, |m, s| m.max(((s[1] - s[0]) / h).abs()));
    let grad = ux + wx;
    if grad == 0.0 {
        return Ok(0.0);
    }
    Ok(num / (libm::pow(grad, a) * libm::pow(l1, 1.0 - a)))
}

/// Error and derivative norms of one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct NormReport {
    pub time: f64,
    pub p_values: Vec<f64>,
    pub err_to_rarefaction: Vec<f64>,
    pub err_to_viscous: Vec<f64>,
    pub deriv_norms: Vec<f64>,
}

impl NormReport {
    pub fn new(state: &FieldState, r: &RiemannData, nu: f64, p_values: &[f64]) -> Result<Self> {
        let w = sample_viscous(state, r, nu)?;
        let to_w: Vec<f64> = state.values.iter().zip(&w).map(|(u, w)| u - w).collect();
        let dq = difference_quotients(state);
        let h = state.grid.h;
        let mut out = Self {
            time: state.time,
            p_values: p_values.to_vec(),
            err_to_rarefaction: Vec::with_capacity(p_values.len()),
            err_to_viscous: Vec::with_capacity(p_values.len()),
            deriv_norms: Vec::with_capacity(p_values.len()),
        };
        for &p in p_values {
            out.err_to_rarefaction.push(error_to_rarefaction(state, r, p)?);
            out.err_to_viscous.push(lp_norm(&to_w, h, p)?);
            out.deriv_norms.push(lp_norm(&dq, h, p)?);
        }
        Ok(out)
    }
}
