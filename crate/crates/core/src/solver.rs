//! Explicit time integration of `u_t = eps u_xx + L u - (u^2/2)_x`.
//!
//! Space: Engquist-Osher flux for the Burgers term, centered second
//! difference for the viscosity, [`NonlocalOp`] for `L`. Time: SSP
//! Runge-Kutta, so each stage is a convex combination of forward-Euler steps
//! and inherits their monotonicity under the step restriction of
//! [`stable_dt`].

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::field::{fan_domain, FieldState};
use crate::nonlocal::{NonlocalOp, OpWorkspace};
use crate::references::RiemannData;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Integrator {
    SspRk2,
    SspRk3,
}

/// Discretization of the Burgers term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FluxScheme {
    #[default]
    EngquistOsher,
    /// `u_i` times the upwind difference of `u`: monotone but not
    /// conservative. Only used to show that the verification checks catch it.
    NonConservativeUpwind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub epsilon: f64,
    pub cfl: f64,
    pub kernel_tol: f64,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub integrator: Integrator,
    pub flux: FluxScheme,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            cfl: 0.5,
            kernel_tol: crate::kernels::DEFAULT_TRUNCATION_TOL,
            t_end: 100.0,
            snapshot_times: alloc::vec![1.0, 10.0, 100.0],
            integrator: Integrator::SspRk3,
            flux: FluxScheme::EngquistOsher,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::BadConfig("epsilon must be finite and >= 0"));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::BadConfig("cfl must lie in (0, 1]"));
        }
        if !(self.kernel_tol > 0.0 && self.kernel_tol < 1e-6) {
            return Err(Error::BadConfig("kernel_tol must lie in (0, 1e-6)"));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::BadConfig("t_end must be finite and > 0"));
        }
        if self.snapshot_times.iter().any(|&t| !(t >= 0.0 && t <= self.t_end)) {
            return Err(Error::BadConfig("snapshot times must lie in [0, t_end]"));
        }
        if self.snapshot_times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::BadConfig("snapshot times must be strictly increasing"));
        }
        Ok(())
    }

    /// Snapshot times followed by `t_end` (if not already the last one).
    fn targets(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.snapshot_times.iter().copied().filter(|&t| t > 0.0).collect();
        if t.last() != Some(&self.t_end) {
            t.push(self.t_end);
        }
        t
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    /// Time at the end of the step.
    pub time: f64,
    pub dt: f64,
    pub max_abs: f64,
    pub min_difference: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: FieldState,
    pub snapshots: Vec<FieldState>,
    pub config: SolverConfig,
    pub diagnostics: Vec<StepRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySummary {
    pub steps: usize,
    pub min_dt: f64,
    pub max_dt: f64,
    pub max_abs: f64,
    pub min_difference: f64,
}

impl Trajectory {
    /// Snapshot at exactly time `t`, if one was recorded.
    pub fn at(&self, t: f64) -> Option<&FieldState> {
        self.snapshots.iter().find(|s| s.time == t)
    }

    pub fn summary(&self) -> TrajectorySummary {
        let d = &self.diagnostics;
        TrajectorySummary {
            steps: d.len(),
            min_dt: d.iter().map(|r| r.dt).fold(f64::INFINITY, f64::min),
            max_dt: d.iter().map(|r| r.dt).fold(0.0, f64::max),
            max_abs: d.iter().map(|r| r.max_abs).fold(self.initial.max_abs(), f64::max),
            min_difference: d
                .iter()
                .map(|r| r.min_difference)
                .fold(self.initial.min_one_sided_difference(), f64::min),
        }
    }
}

#[inline]
fn f_plus(u: f64) -> f64 {
    let p = u.max(0.0);
    0.5 * p * p
}

#[inline]
fn f_minus(u: f64) -> f64 {
    let m = u.min(0.0);
    0.5 * m * m
}

#[inline]
fn ghost(values: &[f64], u_minus: f64, u_plus: f64, i: isize) -> f64 {
    if i < 0 {
        u_minus
    } else if i as usize >= values.len() {
        u_plus
    } else {
        values[i as usize]
    }
}

/// Conservative Engquist-Osher divergence of `u^2/2`.
pub fn flux_div(state: &FieldState) -> Vec<f64> {
    let mut out = alloc::vec![0.0; state.values.len()];
    flux_div_into(FluxScheme::EngquistOsher, &state.values, state.u_minus, state.u_plus, state.grid.h, &mut out);
    out
}

fn flux_div_into(scheme: FluxScheme, u: &[f64], u_minus: f64, u_plus: f64, h: f64, out: &mut [f64]) {
    let n = u.len();
    let inv_h = 1.0 / h;
    match scheme {
        FluxScheme::EngquistOsher => {
            // F_{i+1/2} = f+(u_i) + f-(u_{i+1}); left interface of node 0 uses the ghost
            let mut left = f_plus(u_minus) + f_minus(u[0]);
            for i in 0..n {
                let next = if i + 1 < n { u[i + 1] } else { u_plus };
                let right = f_plus(u[i]) + f_minus(next);
                out[i] = (right - left) * inv_h;
                left = right;
            }
        }
        FluxScheme::NonConservativeUpwind => {
            for i in 0..n {
                let d = if u[i] >= 0.0 {
                    u[i] - ghost(u, u_minus, u_plus, i as isize - 1)
                } else {
                    ghost(u, u_minus, u_plus, i as isize + 1) - u[i]
                };
                out[i] = u[i] * d * inv_h;
            }
        }
    }
}

/// Scratch space for one integration.
#[derive(Debug, Clone, Default)]
pub struct RhsWorkspace {
    op: OpWorkspace,
    nonlocal: Vec<f64>,
    flux: Vec<f64>,
}

/// Right-hand side into `out`; `op = None` drops the nonlocal term.
#[allow(clippy::too_many_arguments)]
pub fn rhs_into(
    u: &[f64],
    u_minus: f64,
    u_plus: f64,
    h: f64,
    op: Option<&NonlocalOp>,
    epsilon: f64,
    flux: FluxScheme,
    ws: &mut RhsWorkspace,
    out: &mut [f64],
) {
    let n = u.len();
    ws.flux.resize(n, 0.0);
    flux_div_into(flux, u, u_minus, u_plus, h, &mut ws.flux);
    if let Some(op) = op {
        ws.nonlocal.resize(n, 0.0);
        op.apply_into(u, u_minus, u_plus, &mut ws.op, &mut ws.nonlocal);
        for ((o, l), f) in out.iter_mut().zip(&ws.nonlocal).zip(&ws.flux) {
            *o = l - f;
        }
    } else {
        for (o, f) in out.iter_mut().zip(&ws.flux) {
            *o = -f;
        }
    }
    if epsilon > 0.0 {
        let c = epsilon / (h * h);
        for i in 0..n {
            let a = ghost(u, u_minus, u_plus, i as isize - 1);
            let b = ghost(u, u_minus, u_plus, i as isize + 1);
            out[i] += c * (a - 2.0 * u[i] + b);
        }
    }
}

/// `eps D2 u + L u - flux_div(u)`.
pub fn rhs(state: &FieldState, op: Option<&NonlocalOp>, epsilon: f64) -> Result<Vec<f64>> {
    if let Some(op) = op {
        if !op.grid().same_as(&state.grid) {
            return Err(Error::GridMismatch);
        }
    }
    let mut out = alloc::vec![0.0; state.values.len()];
    rhs_into(
        &state.values,
        state.u_minus,
        state.u_plus,
        state.grid.h,
        op,
        epsilon,
        FluxScheme::EngquistOsher,
        &mut RhsWorkspace::default(),
        &mut out,
    );
    Ok(out)
}

/// `cfl * min(h / max|u|, 1/2, h^2 / (2 eps))`, clipped so the step lands
/// on the next snapshot time or `t_end`.
pub fn stable_dt(state: &FieldState, config: &SolverConfig) -> f64 {
    let next = config
        .targets()
        .into_iter()
        .find(|&t| t > state.time)
        .unwrap_or(config.t_end);
    stable_dt_raw(state.max_abs(), state.grid.h, config.epsilon, config.cfl).min(next - state.time)
}

fn stable_dt_raw(max_abs: f64, h: f64, epsilon: f64, cfl: f64) -> f64 {
    let mut dt = (h / max_abs.max(1e-12)).min(0.5);
    if epsilon > 0.0 {
        dt = dt.min(h * h / (2.0 * epsilon));
    }
    cfl * dt
}

/// Advances `state0` to `config.t_end`, recording the requested snapshots.
pub fn integrate(state0: &FieldState, op: &NonlocalOp, config: &SolverConfig) -> Result<Trajectory> {
    config.validate()?;
    if !op.grid().same_as(&state0.grid) {
        return Err(Error::GridMismatch);
    }
    check_fan(state0, config.t_end)?;

    let grid = state0.grid;
    let n = grid.n;
    let (um, up) = (state0.u_minus, state0.u_plus);
    let mut u = state0.values.clone();
    let mut stage = alloc::vec![0.0; n];
    let mut stage2 = alloc::vec![0.0; n];
    let mut k = alloc::vec![0.0; n];
    let mut ws = RhsWorkspace::default();
    let mut snapshots = Vec::with_capacity(config.snapshot_times.len());
    let mut diagnostics = Vec::new();
    if config.snapshot_times.first() == Some(&0.0) {
        snapshots.push(state0.clone());
    }

    let eval = |v: &[f64], out: &mut [f64], ws: &mut RhsWorkspace| {
        rhs_into(v, um, up, grid.h, Some(op), config.epsilon, config.flux, ws, out)
    };

    let mut t = state0.time;
    let wanted = |t: f64| config.snapshot_times.contains(&t);
    for target in config.targets() {
        while t < target {
            let max_abs = u.iter().fold(um.abs().max(up.abs()), |m, v| m.max(v.abs()));
            let mut dt = stable_dt_raw(max_abs, grid.h, config.epsilon, config.cfl);
            let landing = t + dt >= target || target - (t + dt) <= 1e-12 * target;
            if landing {
                dt = target - t;
            }
            match config.integrator {
                Integrator::SspRk2 => {
                    eval(&u, &mut k, &mut ws);
                    for i in 0..n {
                        stage[i] = u[i] + dt * k[i];
                    }
                    eval(&stage, &mut k, &mut ws);
                    for i in 0..n {
                        u[i] = 0.5 * u[i] + 0.5 * (stage[i] + dt * k[i]);
                    }
                }
                Integrator::SspRk3 => {
                    eval(&u, &mut k, &mut ws);
                    for i in 0..n {
                        stage[i] = u[i] + dt * k[i];
                    }
                    eval(&stage, &mut k, &mut ws);
                    for i in 0..n {
                        stage2[i] = 0.75 * u[i] + 0.25 * (stage[i] + dt * k[i]);
                    }
                    eval(&stage2, &mut k, &mut ws);
                    for i in 0..n {
                        u[i] = u[i] / 3.0 + 2.0 / 3.0 * (stage2[i] + dt * k[i]);
                    }
                }
            }
            t = if landing { target } else { t + dt };
            if let Some(node) = u.iter().position(|v| !v.is_finite()) {
                return Err(Error::BlowUp { node, time: t });
            }
            let mut min_difference = u[0] - um;
            let mut max_abs = 0.0f64;
            for i in 0..n {
                max_abs = max_abs.max(u[i].abs());
                let next = if i + 1 < n { u[i + 1] } else { up };
                min_difference = min_difference.min(next - u[i]);
            }
            diagnostics.push(StepRecord { time: t, dt, max_abs, min_difference });
        }
        if wanted(target) {
            snapshots.push(FieldState { grid, values: u.clone(), u_minus: um, u_plus: up, time: target });
        }
    }
    Ok(Trajectory { initial: state0.clone(), snapshots, config: config.clone(), diagnostics })
}

/// Rejects runs whose fan `[u_- t_end, u_+ t_end]` comes within `5h` of the boundary.
fn check_fan(state: &FieldState, t_end: f64) -> Result<()> {
    if state.u_minus == state.u_plus {
        return Ok(());
    }
    let g = &state.grid;
    let lo = (state.u_minus.min(state.u_plus) * t_end).min(0.0);
    let hi = (state.u_plus.max(state.u_minus) * t_end).max(0.0);
    if lo - g.left < 5.0 * g.h || g.right - hi < 5.0 * g.h {
        let (suggested_left, suggested_right) = match RiemannData::new(state.u_minus, state.u_plus) {
            Ok(r) => fan_domain(r, t_end),
            Err(_) => (lo - crate::field::FAN_MARGIN, hi + crate::field::FAN_MARGIN),
        };
        return Err(Error::FanHitBoundary { suggested_left, suggested_right });
    }
    Ok(())
}
