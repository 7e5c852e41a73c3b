//! Dispersal kernels `J`: even probability densities with a finite second
//! moment, and their discretization into convolution weights on a uniform grid.

use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

pub const DEFAULT_TRUNCATION_TOL: f64 = 1e-12;

/// Relative slack used when validating tabulated kernels.
const TABLE_TOL: f64 = 1e-12;

/// Piecewise-linear kernel samples; zero outside `[abscissae[0], abscissae[last]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulation {
    pub abscissae: Vec<f64>,
    pub values: Vec<f64>,
}

impl Tabulation {
    pub fn new(abscissae: Vec<f64>, values: Vec<f64>) -> Self {
        Self { abscissae, values }
    }

    fn eval(&self, x: f64) -> f64 {
        let xs = &self.abscissae;
        let n = xs.len();
        if x < xs[0] || x > xs[n - 1] {
            return 0.0;
        }
        // first index with xs[j] > x
        let j = xs.partition_point(|&a| a <= x);
        if j == 0 {
            return self.values[0];
        }
        if j == n {
            return self.values[n - 1];
        }
        let (x0, x1) = (xs[j - 1], xs[j]);
        let (v0, v1) = (self.values[j - 1], self.values[j]);
        v0 + (v1 - v0) * (x - x0) / (x1 - x0)
    }

    /// Exact integral of the interpolant over `[a, +inf)`.
    fn upper_integral(&self, a: f64) -> f64 {
        let xs = &self.abscissae;
        let mut acc = 0.0;
        for j in (1..xs.len()).rev() {
            let (x0, x1) = (xs[j - 1], xs[j]);
            if x1 <= a {
                break;
            }
            let lo = if x0 > a { x0 } else { a };
            let vlo = self.eval_segment(j, lo);
            acc += 0.5 * (vlo + self.values[j]) * (x1 - lo);
        }
        acc
    }

    fn eval_segment(&self, j: usize, x: f64) -> f64 {
        let (x0, x1) = (self.abscissae[j - 1], self.abscissae[j]);
        let (v0, v1) = (self.values[j - 1], self.values[j]);
        v0 + (v1 - v0) * (x - x0) / (x1 - x0)
    }

    fn mass(&self) -> f64 {
        self.upper_integral(self.abscissae[0])
    }

    /// Exact `int x^2 J(x) dx` of the interpolant.
    fn second_moment(&self) -> f64 {
        let xs = &self.abscissae;
        let mut acc = 0.0;
        for j in 1..xs.len() {
            let (a, b) = (xs[j - 1], xs[j]);
            let (va, vb) = (self.values[j - 1], self.values[j]);
            let slope = (vb - va) / (b - a);
            let c = va - slope * a;
            // int (c + slope x) x^2 = c x^3/3 + slope x^4/4
            let f = |x: f64| c * x * x * x / 3.0 + slope * x * x * x * x / 4.0;
            acc += f(b) - f(a);
        }
        acc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KernelFamily {
    /// `J(x) = (rate / 2) exp(-rate |x|)`.
    Exponential { rate: f64 },
    /// Centered normal density with standard deviation `sigma`.
    Gaussian { sigma: f64 },
    /// Biweight bump `15 / (16 a) (1 - (x/a)^2)^2` on `|x| < a`.
    CompactBump { half_width: f64 },
    Tabulated(Tabulation),
}

/// A validated kernel: nonnegative, even, unit mass, finite second moment.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    mass: f64,
    second_moment: f64,
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::BadKernelParameter { name, value })
    }
}

impl KernelSpec {
    /// Validates family parameters and builds the spec. Tabulated input is
    /// rescaled to unit mass.
    pub fn new(family: KernelFamily) -> Result<Self> {
        let (family, mass, second_moment) = match family {
            KernelFamily::Exponential { rate } => {
                positive("rate", rate)?;
                (family, 1.0, 2.0 / (rate * rate))
            }
            KernelFamily::Gaussian { sigma } => {
                positive("sigma", sigma)?;
                (family, 1.0, sigma * sigma)
            }
            KernelFamily::CompactBump { half_width } => {
                positive("half_width", half_width)?;
                (family, 1.0, half_width * half_width / 7.0)
            }
            KernelFamily::Tabulated(table) => {
                let table = validate_table(table)?;
                let m2 = table.second_moment();
                let mass = table.mass();
                (KernelFamily::Tabulated(table), mass, m2)
            }
        };
        if !(second_moment.is_finite() && second_moment > 0.0) {
            return Err(Error::InfiniteSecondMoment);
        }
        if (mass - 1.0).abs() > 1e-12 {
            return Err(Error::NonUnitMass { mass });
        }
        Ok(Self { family, mass, second_moment })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(KernelFamily::Exponential { rate })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(KernelFamily::Gaussian { sigma })
    }

    pub fn compact_bump(half_width: f64) -> Result<Self> {
        Self::new(KernelFamily::CompactBump { half_width })
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    /// True for `J(x) = exp(-|x|) / 2`, the kernel of the radiating-gas model.
    pub fn is_unit_exponential(&self) -> bool {
        matches!(self.family, KernelFamily::Exponential { rate } if rate == 1.0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match &self.family {
            KernelFamily::Exponential { rate } => 0.5 * rate * libm::exp(-rate * x.abs()),
            KernelFamily::Gaussian { sigma } => {
                libm::exp(-0.5 * (x / sigma) * (x / sigma)) / (sigma * libm::sqrt(2.0 * PI))
            }
            KernelFamily::CompactBump { half_width } => {
                let s = x / half_width;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    let q = 1.0 - s * s;
                    15.0 / (16.0 * half_width) * q * q
                }
            }
            KernelFamily::Tabulated(t) => t.eval(x),
        }
    }

    /// Moments of order 0, 1 and 2; `None` for higher orders.
    pub fn moment(&self, order: u32) -> Option<f64> {
        match order {
            0 => Some(self.mass),
            // every validated kernel is even
            1 => Some(0.0),
            2 => Some(self.second_moment),
            _ => None,
        }
    }

    /// Upper tail mass `int_y^inf J` for `y >= 0`.
    pub fn upper_tail(&self, y: f64) -> f64 {
        debug_assert!(y >= 0.0);
        match &self.family {
            KernelFamily::Exponential { rate } => 0.5 * libm::exp(-rate * y),
            KernelFamily::Gaussian { sigma } => 0.5 * libm::erfc(y / (sigma * SQRT_2)),
            KernelFamily::CompactBump { half_width } => {
                let s = y / half_width;
                if s >= 1.0 {
                    0.0
                } else {
                    let r = 1.0 - s;
                    r * r * r * (3.0 * s * s + 9.0 * s + 8.0) / 16.0
                }
            }
            KernelFamily::Tabulated(t) => t.upper_integral(y),
        }
    }

    /// `int_a^b J`, computed from the tails to avoid cancellation far out.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        debug_assert!(a <= b);
        if a >= 0.0 {
            self.upper_tail(a) - self.upper_tail(b)
        } else if b <= 0.0 {
            self.upper_tail(-b) - self.upper_tail(-a)
        } else {
            self.mass - self.upper_tail(-a) - self.upper_tail(b)
        }
    }

    /// Radius outside which the kernel is identically zero, if any.
    pub fn support_radius(&self) -> Option<f64> {
        match &self.family {
            KernelFamily::CompactBump { half_width } => Some(*half_width),
            KernelFamily::Tabulated(t) => {
                let xs = &t.abscissae;
                Some(xs[0].abs().max(xs[xs.len() - 1].abs()))
            }
            _ => None,
        }
    }

    /// Smallest radius `Y` with `int_{|y| > Y} J <= tol`.
    pub fn truncation_radius(&self, tol: f64) -> f64 {
        if let Some(r) = self.support_radius() {
            return r;
        }
        if let KernelFamily::Exponential { rate } = self.family {
            return -libm::log(tol) / rate;
        }
        let two_tail = |y: f64| 2.0 * self.upper_tail(y);
        let mut hi = libm::sqrt(self.second_moment).max(1.0);
        while two_tail(hi) > tol {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if two_tail(mid) > tol {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-14 * hi {
                break;
            }
        }
        hi
    }

    /// Cell-integral weights on spacing `h`, truncated at tail mass `tol`.
    pub fn discretize(&self, h: f64, tol: f64) -> Result<DiscreteKernel> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::BadKernelParameter { name: "h", value: h });
        }
        if !(tol > 0.0 && tol < 1e-6) {
            return Err(Error::BadTolerance(tol));
        }
        let y = self.truncation_radius(tol);
        let radius = libm::ceil(y / h - 0.5).max(0.0) as usize;
        let edge = (radius as f64 + 0.5) * h;
        let tail = self.upper_tail(edge);

        // half[k] = weight at offset +k = weight at offset -k
        let mut half: Vec<f64> = (0..=radius)
            .map(|k| {
                let lo = (k as f64 - 0.5) * h;
                let hi = (k as f64 + 0.5) * h;
                if k == 0 {
                    self.integral(-0.5 * h, 0.5 * h)
                } else {
                    self.integral(lo, hi)
                }
            })
            .collect();

        let nonzero = half[0].gt(&0.0) as usize + 2 * half[1..].iter().filter(|&&w| w > 0.0).count();
        if nonzero < 3 {
            return Err(Error::SpacingTooCoarse { h, nonzero });
        }

        // Proportional rescaling, then the center absorbs the last rounding
        // so that the canonical sum is exactly one.
        let raw: f64 = half[0] + 2.0 * half[1..].iter().sum::<f64>();
        let scale = (1.0 - 2.0 * tail) / raw;
        for w in half.iter_mut() {
            *w *= scale;
        }
        let off_center = off_center_mass(&half, tail, tail);
        half[0] = 1.0 - off_center;

        let mut weights = Vec::with_capacity(2 * radius + 1);
        weights.extend(half[1..].iter().rev());
        weights.extend(half.iter());
        Ok(DiscreteKernel {
            weights,
            radius,
            tail_mass_left: tail,
            tail_mass_right: tail,
            spacing: h,
            truncation_radius: y,
        })
    }
}

fn validate_table(mut t: Tabulation) -> Result<Tabulation> {
    let n = t.abscissae.len();
    if n < 3 || t.values.len() != n {
        return Err(Error::BadTabulation("need at least 3 (abscissa, value) pairs"));
    }
    if t.abscissae.iter().chain(&t.values).any(|v| !v.is_finite()) {
        return Err(Error::BadTabulation("non-finite entry"));
    }
    if t.abscissae.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::BadTabulation("abscissae must be strictly increasing"));
    }
    for (&x, &v) in t.abscissae.iter().zip(&t.values) {
        if v < 0.0 {
            return Err(Error::NegativeKernel { x, value: v });
        }
    }
    let vmax = t.values.iter().cloned().fold(0.0, f64::max);
    // the mirrored interpolant must agree with the table at every node
    for (&x, &v) in t.abscissae.iter().zip(&t.values) {
        let mirrored = t.eval(-x);
        if (mirrored - v).abs() > TABLE_TOL * vmax {
            return Err(Error::NonSymmetricKernel { x, left: v, right: mirrored });
        }
    }
    let mass = t.mass();
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::NonUnitMass { mass });
    }
    for v in t.values.iter_mut() {
        *v /= mass;
    }
    Ok(t)
}

/// Canonical summation of everything except the center weight.
fn off_center_mass(half: &[f64], tail_left: f64, tail_right: f64) -> f64 {
    let mut s = 0.0;
    for &w in half[1..].iter().rev() {
        s += w;
    }
    2.0 * s + (tail_left + tail_right)
}

/// Convolution weights for offsets `-radius..=radius` on a grid of spacing
/// `spacing`, plus the kernel mass cut off beyond the window on each side.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteKernel {
    weights: Vec<f64>,
    radius: usize,
    /// Mass of `J` on `y < -(radius + 1/2) h`.
    pub tail_mass_left: f64,
    /// Mass of `J` on `y > (radius + 1/2) h`.
    pub tail_mass_right: f64,
    pub spacing: f64,
    pub truncation_radius: f64,
}

impl DiscreteKernel {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Weight at grid offset `k`, zero outside the window.
    pub fn weight(&self, k: isize) -> f64 {
        let r = self.radius as isize;
        if k.abs() > r {
            0.0
        } else {
            self.weights[(k + r) as usize]
        }
    }

    /// Weights plus tails, summed in the canonical order used at construction.
    pub fn total_mass(&self) -> f64 {
        let r = self.radius;
        let mut s = 0.0;
        for k in (1..=r).rev() {
            s += self.weights[r + k];
        }
        self.weights[r] + (2.0 * s + (self.tail_mass_left + self.tail_mass_right))
    }

    /// `sum_k w_k (k h)^order`.
    pub fn discrete_moment(&self, order: u32) -> f64 {
        let r = self.radius as isize;
        (-r..=r)
            .map(|k| self.weight(k) * libm::pow(k as f64 * self.spacing, order as f64))
            .sum()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetry_defect() == 0.0 && self.tail_mass_left == self.tail_mass_right
    }

    /// `max_k |w_k - w_{-k}|`.
    pub fn symmetry_defect(&self) -> f64 {
        let r = self.radius as isize;
        (1..=r).map(|k| (self.weight(k) - self.weight(-k)).abs()).fold(0.0, f64::max)
    }

    /// The same weights moved `by` grid cells. Nonnegative and mass-preserving
    /// but no longer even; used to check that the verification suite detects
    /// a drifting kernel.
    pub fn shifted(&self, by: usize) -> Self {
        let r = self.radius + by;
        let mut weights = alloc::vec![0.0; 2 * r + 1];
        for (j, &w) in self.weights.iter().enumerate() {
            weights[j + 2 * by] = w;
        }
        Self { weights, radius: r, ..self.clone() }
    }
}
