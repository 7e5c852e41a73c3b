//! Uniform grids, field snapshots with constant far-field extension, and
//! admissible step-like initial data.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::references::RiemannData;

/// Fixed room kept on each side of the fan `[u_- t, u_+ t]` by [`Grid1D::fan_rule`].
pub const FAN_MARGIN: f64 = 20.0;

/// The fan corners smear over `O(sqrt(nu t))`; this many of those widths are
/// added to [`FAN_MARGIN`].
pub const DIFFUSIVE_MARGIN: f64 = 10.0;

/// Largest tail integral of `u_0 - u_+-` allowed outside the grid.
pub const TAIL_LIMIT: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub left: f64,
    pub right: f64,
    pub n: usize,
    pub h: f64,
}

impl Grid1D {
    pub fn new(left: f64, right: f64, n: usize) -> Result<Self> {
        if !(left.is_finite() && right.is_finite() && left < right && n >= 16) {
            return Err(Error::BadDomain { left, right, n });
        }
        let h = (right - left) / (n - 1) as f64;
        Ok(Self { left, right, n, h })
    }

    /// Grid starting at `left` with spacing `h`, extended so it reaches `right`.
    pub fn with_spacing(left: f64, right: f64, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0 && left < right) {
            return Err(Error::BadDomain { left, right, n: 0 });
        }
        let cells = libm::ceil((right - left) / h - 1e-9) as usize;
        let n = cells + 1;
        if n < 16 {
            return Err(Error::BadDomain { left, right, n });
        }
        Ok(Self { left, right: left + cells as f64 * h, n, h })
    }

    /// Domain [`fan_domain`] at spacing `h`, with the origin on a node.
    pub fn fan_rule(riemann: RiemannData, t_end: f64, h: f64) -> Result<Self> {
        Self::fan_rule_with_diffusivity(riemann, t_end, h, 1.0)
    }

    pub fn fan_rule_with_diffusivity(riemann: RiemannData, t_end: f64, h: f64, nu: f64) -> Result<Self> {
        let (lo, hi) = fan_domain_with_diffusivity(riemann, t_end, nu);
        // align nodes with the origin
        let left = -libm::ceil(-lo / h) * h;
        Self::with_spacing(left, hi, h)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.left + i as f64 * self.h
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(move |i| self.x(i))
    }

    pub fn same_as(&self, other: &Grid1D) -> bool {
        self.left == other.left && self.n == other.n && self.h == other.h
    }
}

/// `[u_- t_end - m, u_+ t_end + m]` (widened to contain the origin) with
/// `m = 20 + 10 sqrt(t_end)`, for an effective diffusivity of one.
pub fn fan_domain(riemann: RiemannData, t_end: f64) -> (f64, f64) {
    fan_domain_with_diffusivity(riemann, t_end, 1.0)
}

/// As [`fan_domain`] with `m = 20 + 10 sqrt(nu t_end)`.
pub fn fan_domain_with_diffusivity(riemann: RiemannData, t_end: f64, nu: f64) -> (f64, f64) {
    let m = FAN_MARGIN + DIFFUSIVE_MARGIN * libm::sqrt(nu.max(0.0) * t_end);
    let lo = (riemann.u_minus() * t_end).min(0.0) - m;
    let hi = (riemann.u_plus() * t_end).max(0.0) + m;
    (lo, hi)
}

/// Grid values at one instant. Outside the grid the field is `u_minus` on the
/// left and `u_plus` on the right; every operator uses that extension.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub grid: Grid1D,
    pub values: Vec<f64>,
    pub u_minus: f64,
    pub u_plus: f64,
    pub time: f64,
}

impl FieldState {
    pub fn new(grid: Grid1D, values: Vec<f64>, u_minus: f64, u_plus: f64, time: f64) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::GridMismatch);
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::BlowUp { node, time });
        }
        Ok(Self { grid, values, u_minus, u_plus, time })
    }

    pub fn constant(grid: Grid1D, c: f64, time: f64) -> Self {
        Self { grid, values: alloc::vec![c; grid.n], u_minus: c, u_plus: c, time }
    }

    /// Value at (possibly out-of-range) node index `i`.
    #[inline]
    pub fn extended(&self, i: isize) -> f64 {
        if i < 0 {
            self.u_minus
        } else if i as usize >= self.values.len() {
            self.u_plus
        } else {
            self.values[i as usize]
        }
    }

    /// `u_0 - u_-, u_1 - u_0, ..., u_+ - u_{n-1}` (n + 1 entries).
    pub fn one_sided_differences(&self) -> Vec<f64> {
        let n = self.values.len() as isize;
        (0..=n).map(|i| self.extended(i) - self.extended(i - 1)).collect()
    }

    pub fn min_one_sided_difference(&self) -> f64 {
        self.one_sided_differences().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Discrete total variation including the jumps to the far-field states.
    pub fn total_variation(&self) -> f64 {
        self.one_sided_differences().iter().map(|d| d.abs()).sum()
    }

    pub fn is_monotone(&self, tol: f64) -> bool {
        self.min_one_sided_difference() >= -tol
    }

    /// Central differences; the boundary nodes use the far-field states as ghosts.
    pub fn derivative(&self) -> Vec<f64> {
        let inv = 0.5 / self.grid.h;
        (0..self.values.len() as isize)
            .map(|i| (self.extended(i + 1) - self.extended(i - 1)) * inv)
            .collect()
    }

    /// `h * sum u_i` (rectangle rule, matching the conservative update).
    pub fn mass(&self) -> f64 {
        self.grid.h * self.values.iter().sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileKind {
    /// `(u_- + u_+)/2 + (u_+ - u_-)/2 * tanh(x / width)`.
    TanhRamp { width: f64 },
    /// Linear from `u_-` at `-half_width` to `u_+` at `half_width`.
    PiecewiseLinearRamp { half_width: f64 },
    /// Piecewise-linear through the given nodes, constant beyond them.
    Custom { abscissae: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialProfile {
    pub kind: ProfileKind,
    pub riemann: RiemannData,
}

impl InitialProfile {
    pub fn new(kind: ProfileKind, riemann: RiemannData) -> Result<Self> {
        match &kind {
            ProfileKind::TanhRamp { width } => check_positive("width", *width)?,
            ProfileKind::PiecewiseLinearRamp { half_width } => check_positive("half_width", *half_width)?,
            ProfileKind::Custom { abscissae, values } => {
                if abscissae.len() < 2 || abscissae.len() != values.len() {
                    return Err(Error::BadProfile { name: "custom table length", value: abscissae.len() as f64 });
                }
                if let Some(w) = abscissae.windows(2).find(|w| !(w[1] > w[0])) {
                    return Err(Error::BadProfile { name: "custom abscissae", value: w[1] });
                }
                if let Some(v) = abscissae.iter().chain(values).find(|v| !v.is_finite()) {
                    return Err(Error::BadProfile { name: "custom entry", value: *v });
                }
                for (i, w) in values.windows(2).enumerate() {
                    if w[1] < w[0] {
                        return Err(Error::NotMonotone { x: abscissae[i], step: w[1] - w[0] });
                    }
                }
            }
        }
        Ok(Self { kind, riemann })
    }

    pub fn tanh(width: f64, riemann: RiemannData) -> Result<Self> {
        Self::new(ProfileKind::TanhRamp { width }, riemann)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (um, up) = (self.riemann.u_minus(), self.riemann.u_plus());
        match &self.kind {
            ProfileKind::TanhRamp { width } => {
                // (1 + tanh y) / 2 as a logistic, split so both far fields are hit exactly
                let y = x / width;
                if y <= 0.0 {
                    um + (up - um) / (1.0 + libm::exp(-2.0 * y))
                } else {
                    up - (up - um) / (1.0 + libm::exp(2.0 * y))
                }
            }
            ProfileKind::PiecewiseLinearRamp { half_width: a } => {
                let s = (x / a).clamp(-1.0, 1.0);
                0.5 * (um + up) + 0.5 * (up - um) * s
            }
            ProfileKind::Custom { abscissae, values } => interp(abscissae, values, x),
        }
    }

    /// `int_R^inf (u_+ - u_0)` and `int_-inf^L (u_0 - u_-)`.
    pub fn tail_integrals(&self, left: f64, right: f64) -> (f64, f64) {
        let (um, up) = (self.riemann.u_minus(), self.riemann.u_plus());
        let half = 0.5 * (up - um);
        match &self.kind {
            ProfileKind::TanhRamp { width } => {
                let t = |r: f64| half * width * libm::log1p(libm::exp(-2.0 * r / width));
                (t(-left), t(right))
            }
            ProfileKind::PiecewiseLinearRamp { half_width: a } => {
                let delta = up - um;
                let t = |r: f64| {
                    if r >= *a {
                        0.0
                    } else if r >= -a {
                        delta * (a - r) * (a - r) / (4.0 * a)
                    } else {
                        delta * (-a - r) + delta * a
                    }
                };
                (t(-left), t(right))
            }
            ProfileKind::Custom { abscissae, values } => {
                let n = values.len();
                if values[0] != um || values[n - 1] != up {
                    return (f64::INFINITY, f64::INFINITY);
                }
                let l = pl_integral(abscissae, values, f64::NEG_INFINITY, left, |v| v - um);
                let r = pl_integral(abscissae, values, right, f64::INFINITY, |v| up - v);
                (l, r)
            }
        }
    }

    /// Samples the profile at `t = 0` and checks admissibility on the grid.
    pub fn sample(&self, grid: &Grid1D) -> Result<FieldState> {
        let (tl, tr) = self.tail_integrals(grid.left, grid.right);
        let tail = tl.max(tr);
        if !(tail < TAIL_LIMIT) {
            return Err(Error::TailsTooFat { tail });
        }
        let state = self.sample_unchecked(grid);
        let diffs = state.one_sided_differences();
        // rounding slack only
        let slack = 8.0 * f64::EPSILON * self.riemann.u_minus().abs().max(self.riemann.u_plus().abs());
        if let Some(i) = diffs.iter().position(|&d| d < -slack) {
            return Err(Error::NotMonotone { x: grid.x(i.saturating_sub(1)), step: diffs[i] });
        }
        Ok(state)
    }

    /// Samples without admissibility checks.
    pub fn sample_unchecked(&self, grid: &Grid1D) -> FieldState {
        FieldState {
            grid: *grid,
            values: grid.nodes().map(|x| self.eval(x)).collect(),
            u_minus: self.riemann.u_minus(),
            u_plus: self.riemann.u_plus(),
            time: 0.0,
        }
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::BadProfile { name, value })
    }
}

fn interp(xs: &[f64], vs: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return vs[0];
    }
    if x >= xs[n - 1] {
        return vs[n - 1];
    }
    let j = xs.partition_point(|&a| a <= x);
    let (x0, x1) = (xs[j - 1], xs[j]);
    vs[j - 1] + (vs[j] - vs[j - 1]) * (x - x0) / (x1 - x0)
}

/// Exact integral of `f(interp(x))` over `[a, b]` for affine `f`, counting
/// only the part inside the table (outside, `f` vanishes by construction).
fn pl_integral(xs: &[f64], vs: &[f64], a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut acc = 0.0;
    for j in 1..xs.len() {
        let lo = xs[j - 1].max(a);
        let hi = xs[j].min(b);
        if hi > lo {
            acc += 0.5 * (f(interp(xs, vs, lo)) + f(interp(xs, vs, hi))) * (hi - lo);
        }
    }
    acc
}
