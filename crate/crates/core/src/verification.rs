//! Named, tolerance-tagged checks over solver runs, and the suite that
//! plans and evaluates them.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::field::{FieldState, Grid1D, InitialProfile, ProfileKind};
use crate::kernels::KernelSpec;
use crate::metrics::{self, Correction};
use crate::nonlocal::{apply_l_elliptic, ConvexProbe, NonlocalOp};
use crate::references::RiemannData;
use crate::solver::{integrate, FluxScheme, SolverConfig, Trajectory};

/// How a failed check is to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    /// Failure contradicts a proven property of the equation or the scheme.
    Contradiction,
    /// Failure is reported but does not fail the suite.
    Informative,
}

impl Severity {
    pub fn name(self) -> &'static str {
        match self {
            Severity::Contradiction => "contradiction",
            Severity::Informative => "informative",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub bound: f64,
    pub tolerance: f64,
    pub context: String,
    pub severity: Severity,
}

impl CheckResult {
    /// Passes iff `measured <= bound + tolerance`.
    pub fn at_most(name: &str, measured: f64, bound: f64, tolerance: f64, context: &str) -> Self {
        Self {
            name: name.to_string(),
            passed: measured <= bound + tolerance,
            measured,
            bound,
            tolerance,
            context: context.to_string(),
            severity: Severity::Contradiction,
        }
    }

    /// Passes iff `measured >= bound - tolerance`.
    pub fn at_least(name: &str, measured: f64, bound: f64, tolerance: f64, context: &str) -> Self {
        Self { passed: measured >= bound - tolerance, ..Self::at_most(name, measured, bound, tolerance, context) }
    }

    pub fn informative(mut self) -> Self {
        self.severity = Severity::Informative;
        self
    }

    /// True unless this is a failed contradiction-level check.
    pub fn acceptable(&self) -> bool {
        self.passed || self.severity == Severity::Informative
    }
}

fn all_states(traj: &Trajectory) -> impl Iterator<Item = &FieldState> {
    core::iter::once(&traj.initial).chain(traj.snapshots.iter())
}

/// Largest excursion outside `[min u_0, max u_0]` (far field included).
pub fn check_comparison(traj: &Trajectory, context: &str) -> CheckResult {
    let u0 = &traj.initial;
    let lo = u0.min().min(u0.u_minus).min(u0.u_plus);
    let hi = u0.max().max(u0.u_minus).max(u0.u_plus);
    let over = traj
        .snapshots
        .iter()
        .map(|s| (s.max() - hi).max(lo - s.min()))
        .fold(0.0f64, f64::max);
    CheckResult::at_most("comparison", over, 0.0, 1e-8, context)
}

/// Worst negative one-sided difference over the initial state and all
/// snapshots; tolerance `1e-8 min(1, u_+ - u_-) / h`.
pub fn check_monotonicity(traj: &Trajectory, context: &str) -> CheckResult {
    let u0 = &traj.initial;
    let worst = all_states(traj).map(|s| -s.min_one_sided_difference()).fold(f64::NEG_INFINITY, f64::max);
    let jump = (u0.u_plus - u0.u_minus).abs().min(1.0);
    CheckResult::at_most("monotonicity", worst.max(0.0), 0.0, 1e-8 * jump / u0.grid.h, context)
}

/// `|M(t) - M(0) + (t - t_0)(f(u_+) - f(u_-))|` for `M = h sum u_i`.
pub fn mass_balance_defect(initial: &FieldState, state: &FieldState) -> f64 {
    let f = |u: f64| 0.5 * u * u;
    let flux = f(initial.u_plus) - f(initial.u_minus);
    (state.mass() - initial.mass() + (state.time - initial.time) * flux).abs()
}

/// Relative change of the total variation and of the mass balance,
/// the latter scaled by `u_+ - u_-`.
pub fn check_conservation(traj: &Trajectory, context: &str) -> CheckResult {
    let u0 = &traj.initial;
    let tv0 = u0.total_variation();
    let scale = (u0.u_plus - u0.u_minus).abs().max(f64::MIN_POSITIVE);
    let worst = traj
        .snapshots
        .iter()
        .map(|s| {
            let tv = if tv0 > 0.0 { (s.total_variation() - tv0).abs() / tv0 } else { s.total_variation() };
            tv.max(mass_balance_defect(u0, s) / scale)
        })
        .fold(0.0f64, f64::max);
    CheckResult::at_most("conservation", worst, 0.0, 1e-6, context)
}

fn p_label(p: f64) -> String {
    if p == f64::INFINITY {
        "pinf".to_string()
    } else {
        format!("p{}", p)
    }
}

/// `max ‖u_x(t)‖_p t^(1-1/p) / ‖u_{0,x}‖_1^(1/p)` over snapshots with `t >= t_min`.
pub fn check_derivative_decay(traj: &Trajectory, p: f64, t_min: f64, context: &str) -> Result<CheckResult> {
    let tv0 = metrics::derivative_norm(&traj.initial, 1.0)?;
    let mut worst = 0.0f64;
    for s in traj.snapshots.iter().filter(|s| s.time >= t_min) {
        let n = metrics::derivative_norm(s, p)?;
        let ratio = n * libm::pow(s.time, 1.0 - 1.0 / p) / libm::pow(tv0, 1.0 / p);
        worst = worst.max(ratio);
    }
    Ok(CheckResult::at_most(&format!("derivative_decay_{}", p_label(p)), worst, 1.0, 0.05, context))
}

/// Snapshots inside `[10, t_end]`, requiring 1.5 decades and five samples.
fn rate_window(traj: &Trajectory) -> Result<Vec<&FieldState>> {
    let w: Vec<&FieldState> = traj.snapshots.iter().filter(|s| s.time >= 10.0).collect();
    if w.len() < 5 || w[w.len() - 1].time / w[0].time < libm::pow(10.0, 1.5) - 1e-9 {
        return Err(Error::WindowTooShort);
    }
    Ok(w)
}

/// Calibrated-constant check of `‖u - w^R‖_p <= C t^(-(1-1/p)/2) [log(2+t)]^((1+1/p)/2)`
/// plus the fitted exponent of the log-corrected error.
pub fn check_main_rate(traj: &Trajectory, r: &RiemannData, p: f64, context: &str) -> Result<[CheckResult; 2]> {
    let window = rate_window(traj)?;
    let alpha = (1.0 - 1.0 / p) / 2.0;
    let shape = |t: f64| libm::pow(t, -alpha) * Correction::SqrtLog.factor(t, p);
    let mut times = Vec::with_capacity(window.len());
    let mut errors = Vec::with_capacity(window.len());
    for s in &window {
        times.push(s.time);
        errors.push(metrics::error_to_rarefaction(s, r, p)?);
    }
    let label = p_label(p);
    let c = errors[0] / shape(times[0]);
    let ratio = if c == 0.0 {
        if errors.iter().all(|&e| e == 0.0) { 0.0 } else { f64::INFINITY }
    } else {
        times.iter().zip(&errors).skip(1).map(|(&t, &e)| e / (c * shape(t))).fold(0.0f64, f64::max)
    };
    let exponent = if errors.iter().all(|&e| e == 0.0) {
        f64::NEG_INFINITY
    } else {
        metrics::fit_rate(&times, &errors, p, Correction::SqrtLog)?.exponent
    };
    let ctx = format!("{context}; window [{}, {}]", times[0], times[times.len() - 1]);
    Ok([
        CheckResult::at_most(&format!("main_rate_{label}"), ratio, 1.0, 0.1, &ctx),
        CheckResult::at_most(&format!("main_rate_{label}_exponent"), exponent, -alpha + 0.05, 0.0, &ctx),
    ])
}

/// Worst upward drift of a sequence that should not increase:
/// `max_{i<j} q_j / q_i`, or 0 for fewer than two entries.
pub fn worst_growth(q: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    let mut running_min = f64::INFINITY;
    for &v in q {
        if running_min.is_finite() {
            worst = worst.max(if running_min > 0.0 { v / running_min } else if v > 0.0 { f64::INFINITY } else { 1.0 });
        }
        running_min = running_min.min(v);
    }
    worst
}

/// `‖u - w‖_1 / log(2+t)` for `t >= 10` must not grow by more than 10% over
/// any earlier value; `w` has viscosity `nu`.
pub fn check_l1_log_bound(traj: &Trajectory, r: &RiemannData, nu: f64, context: &str) -> Result<CheckResult> {
    let window = rate_window(traj)?;
    let mut q = Vec::with_capacity(window.len());
    for s in window {
        q.push(metrics::error_to_viscous(s, r, nu, 1.0)? / libm::log(2.0 + s.time));
    }
    Ok(CheckResult::at_most("l1_log_bound", worst_growth(&q), 1.0, 0.1, context))
}

/// `h sum |u - v|`.
pub fn l1_distance(a: &FieldState, b: &FieldState) -> f64 {
    a.grid.h * a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Largest increase of the L1 distance between two runs, against the
/// initial distance and between consecutive snapshots.
pub fn check_contraction(a: &Trajectory, b: &Trajectory, context: &str) -> Result<CheckResult> {
    let (ia, ib) = (&a.initial, &b.initial);
    if !ia.grid.same_as(&ib.grid)
        || ia.u_minus != ib.u_minus
        || ia.u_plus != ib.u_plus
        || a.config.epsilon != b.config.epsilon
        || a.snapshots.len() != b.snapshots.len()
        || a.snapshots.iter().zip(&b.snapshots).any(|(x, y)| x.time != y.time)
    {
        return Err(Error::MismatchedRuns);
    }
    let d0 = l1_distance(ia, ib);
    let mut prev = d0;
    let mut worst = 0.0f64;
    for (x, y) in a.snapshots.iter().zip(&b.snapshots) {
        let d = l1_distance(x, y);
        worst = worst.max(d - d0).max(d - prev);
        prev = d;
    }
    Ok(CheckResult::at_most("contraction", worst, 0.0, 1e-8 * d0, &format!("{context}; initial distance {d0}")))
}

pub fn check_kernel_symmetry(op: &NonlocalOp, context: &str) -> CheckResult {
    CheckResult::at_most("kernel_symmetry", op.kernel().symmetry_defect(), 0.0, 1e-15, context)
}

/// Kato identity and sign, and the convexity inequality for `s^2` and
/// `(s^-)^2`, over `draws` random fields with entries in `[-1, 1]`.
pub fn check_operator_identities(op: &NonlocalOp, draws: usize, seed: u64, context: &str) -> [CheckResult; 4] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = op.grid().n;
    let mut phi = alloc::vec![0.0; n];
    let (mut sum, mut signed) = (0.0f64, f64::NEG_INFINITY);
    let (mut sq, mut neg) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..draws {
        phi.iter_mut().for_each(|v| *v = rng.random_range(-1.0..=1.0));
        let (s, g) = op.kato_identity_check(&phi);
        sum = sum.max(s.abs());
        signed = signed.max(g);
        sq = sq.min(op.convexity_inequality_check(&phi, ConvexProbe::Square));
        neg = neg.min(op.convexity_inequality_check(&phi, ConvexProbe::NegativePartSquared));
    }
    let ctx = format!("{context}; {draws} draws, seed {seed}");
    [
        CheckResult::at_most("kato_sum", sum, 0.0, 1e-12, &ctx),
        CheckResult::at_most("kato_sign", signed, 0.0, 1e-12, &ctx),
        CheckResult::at_least("convexity_square", sq, 0.0, 1e-12, &ctx),
        CheckResult::at_least("convexity_negative_part", neg, 0.0, 1e-12, &ctx),
    ]
}

/// Relative L-infinity gap between the convolution and elliptic realizations
/// of `L` on one state; 0 if `L u` vanishes identically.
pub fn cross_validation_gap(state: &FieldState, spec: &KernelSpec, op: &NonlocalOp) -> Result<f64> {
    let a = op.apply(state)?;
    let b = apply_l_elliptic(spec, state)?;
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gap = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    Ok(if scale > 0.0 { gap / scale } else { 0.0 })
}

/// [`cross_validation_gap`] maximized over the initial state and the snapshots.
pub fn cross_validation_discrepancy(traj: &Trajectory, spec: &KernelSpec, op: &NonlocalOp) -> Result<f64> {
    let mut worst = 0.0f64;
    for s in all_states(traj) {
        worst = worst.max(cross_validation_gap(s, spec, op)?);
    }
    Ok(worst)
}

/// `L^1(window)` distances between `u^eps(t)` and `u^0(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsStudy {
    pub time: f64,
    pub window: (f64, f64),
    pub eps: Vec<f64>,
    pub distances: Vec<f64>,
}

impl EpsStudy {
    /// `eps` must be strictly decreasing and end at 0; `states[j]` is the
    /// solution for `eps[j]` at the common time.
    pub fn new(eps: &[f64], states: &[FieldState], window: (f64, f64)) -> Result<Self> {
        if eps.len() != states.len() || eps.len() < 2 || *eps.last().unwrap() != 0.0 {
            return Err(Error::BadConfig("eps list must match the runs and end at 0"));
        }
        if eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::BadConfig("eps list must be strictly decreasing"));
        }
        let reference = states.last().unwrap();
        let g = reference.grid;
        let mut distances = Vec::with_capacity(eps.len());
        for s in states {
            if !s.grid.same_as(&g) || s.time != reference.time {
                return Err(Error::MismatchedRuns);
            }
            let d: f64 = g
                .nodes()
                .zip(s.values.iter().zip(&reference.values))
                .filter(|(x, _)| *x >= window.0 && *x <= window.1)
                .map(|(_, (a, b))| (a - b).abs())
                .sum();
            distances.push(g.h * d);
        }
        Ok(Self { time: reference.time, window, eps: eps.to_vec(), distances })
    }

    /// Consecutive ratios `d_j / d_{j+1}` over the positive-eps entries.
    pub fn ratios(&self) -> Vec<f64> {
        let d = &self.distances[..self.distances.len() - 1];
        d.windows(2).map(|w| w[0] / w[1]).collect()
    }

    /// Observed orders `log(d_j/d_{j+1}) / log(eps_j/eps_{j+1})`.
    pub fn orders(&self) -> Vec<f64> {
        let k = self.distances.len() - 1;
        (0..k.saturating_sub(1))
            .map(|j| {
                libm::log(self.distances[j] / self.distances[j + 1]) / libm::log(self.eps[j] / self.eps[j + 1])
            })
            .collect()
    }

    /// Informative checks: monotone decrease and order at least 0.9.
    pub fn checks(&self, context: &str) -> [CheckResult; 2] {
        let d = &self.distances;
        let growth = d[..d.len() - 1].windows(2).map(|w| w[1] / w[0]).fold(0.0f64, f64::max);
        let order = self.orders().into_iter().fold(f64::INFINITY, f64::min);
        let ctx = format!("{context}; t = {}, window [{}, {}]", self.time, self.window.0, self.window.1);
        [
            CheckResult::at_most("eps_limit_monotone", growth, 1.0, 0.0, &ctx).informative(),
            CheckResult::at_least("eps_limit_order", order, 0.9, 0.0, &ctx).informative(),
        ]
    }
}

/// Deliberate defects used to show that the suite can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutation {
    /// Kernel weights shifted by one node.
    AsymmetricKernel,
    /// A dip subtracted from the initial ramp.
    NonMonotoneData,
    /// [`FluxScheme::NonConservativeUpwind`].
    NonConservativeFlux,
}

impl Mutation {
    pub const ALL: [Mutation; 3] = [Mutation::AsymmetricKernel, Mutation::NonMonotoneData, Mutation::NonConservativeFlux];

    pub fn name(self) -> &'static str {
        match self {
            Mutation::AsymmetricKernel => "kernel",
            Mutation::NonMonotoneData => "data",
            Mutation::NonConservativeFlux => "flux",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }
}

/// Everything the suite needs besides the mutation and the filter.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub kernel: KernelSpec,
    pub profile: InitialProfile,
    pub grid: Grid1D,
    pub solver: SolverConfig,
    /// Horizon of the contraction pair.
    pub contraction_t_end: f64,
    pub identity_draws: usize,
    pub identity_nodes: usize,
    pub seed: u64,
    /// Coarse spacing of the cross-validation pair; the fine run halves it.
    pub cross_validation_h: f64,
    pub cross_validation_t_end: f64,
    pub eps_list: Vec<f64>,
    pub eps_h: f64,
    pub eps_time: f64,
    pub eps_window: (f64, f64),
}

impl SuiteConfig {
    /// Defaults for everything but the primary run.
    pub fn new(kernel: KernelSpec, profile: InitialProfile, grid: Grid1D, solver: SolverConfig) -> Self {
        Self {
            kernel,
            profile,
            grid,
            contraction_t_end: solver.t_end.min(100.0),
            solver,
            identity_draws: 1000,
            identity_nodes: 512,
            seed: 0x5eed,
            cross_validation_h: 0.0125,
            cross_validation_t_end: 10.0,
            eps_list: alloc::vec![0.1, 0.05, 0.025, 0.0125, 0.0],
            eps_h: 0.05,
            eps_time: 10.0,
            eps_window: (-20.0, 20.0),
        }
    }

    pub fn riemann(&self) -> RiemannData {
        self.profile.riemann
    }

    /// Effective viscosity of the viscous reference: `m_2 / 2 + eps`.
    pub fn viscosity(&self) -> f64 {
        0.5 * self.kernel.second_moment() + self.solver.epsilon
    }
}

/// Names of every check the suite can emit, in report order.
pub const CHECK_NAMES: [&str; 21] = [
    "comparison",
    "monotonicity",
    "conservation",
    "derivative_decay_p1",
    "derivative_decay_p2",
    "derivative_decay_pinf",
    "main_rate_p2",
    "main_rate_p2_exponent",
    "main_rate_pinf",
    "main_rate_pinf_exponent",
    "l1_log_bound",
    "contraction",
    "kernel_symmetry",
    "kato_sum",
    "kato_sign",
    "convexity_square",
    "convexity_negative_part",
    "cross_validation",
    "cross_validation_refinement",
    "eps_limit_monotone",
    "eps_limit_order",
];

/// Independent units of work; the caller may run them in any order or concurrently.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Job {
    Primary,
    /// Partner run for the contraction check, together with its own primary.
    ContractionPair,
    Identities,
    CrossValidation { refined: bool },
    EpsRun(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum JobOutput {
    Trajectory(Trajectory),
    Pair(Trajectory, Trajectory),
    Discrepancy(f64),
    Checks(Vec<CheckResult>),
    State(FieldState),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suite {
    pub config: SuiteConfig,
    pub mutation: Option<Mutation>,
    /// Check-name filters; empty selects everything.
    pub only: Vec<String>,
}

/// `true` if `name` is `filter` or starts with `filter_`.
fn matches_filter(name: &str, filter: &str) -> bool {
    name == filter || (name.starts_with(filter) && name.as_bytes().get(filter.len()) == Some(&b'_'))
}

impl Suite {
    pub fn new(config: SuiteConfig) -> Self {
        Self { config, mutation: None, only: Vec::new() }
    }

    pub fn with_mutation(mut self, m: Option<Mutation>) -> Self {
        self.mutation = m;
        self
    }

    pub fn with_only(mut self, only: Vec<String>) -> Self {
        self.only = only;
        self
    }

    /// Check names that survive the `only` filter.
    pub fn selected(&self) -> Vec<&'static str> {
        CHECK_NAMES
            .iter()
            .copied()
            .filter(|n| self.only.is_empty() || self.only.iter().any(|f| matches_filter(n, f)))
            .collect()
    }

    fn wants(&self, prefix: &str) -> bool {
        self.selected().iter().any(|n| matches_filter(n, prefix))
    }

    pub fn jobs(&self) -> Vec<Job> {
        let mut jobs = Vec::new();
        let primary = ["comparison", "monotonicity", "conservation", "derivative_decay", "main_rate", "l1_log_bound"];
        if primary.iter().any(|p| self.wants(p)) {
            jobs.push(Job::Primary);
        }
        if self.wants("contraction") {
            jobs.push(Job::ContractionPair);
        }
        if ["kato", "convexity"].iter().any(|p| self.wants(p)) {
            jobs.push(Job::Identities);
        }
        if self.wants("cross_validation") && self.config.kernel.is_unit_exponential() {
            jobs.push(Job::CrossValidation { refined: false });
            if self.wants("cross_validation_refinement") {
                jobs.push(Job::CrossValidation { refined: true });
            }
        }
        if self.wants("eps_limit") {
            jobs.extend((0..self.config.eps_list.len()).map(Job::EpsRun));
        }
        jobs
    }

    /// Primary-run snapshot times: the configured ones, 1, 2, 5, and ten per
    /// decade from 10 to `t_end`.
    pub fn primary_snapshots(&self) -> Vec<f64> {
        snapshot_schedule(&self.config.solver.snapshot_times, self.config.solver.t_end)
    }

    fn operator(&self, grid: Grid1D) -> Result<NonlocalOp> {
        let k = self.config.kernel.discretize(grid.h, self.config.solver.kernel_tol)?;
        let k = if self.mutation == Some(Mutation::AsymmetricKernel) { k.shifted(1) } else { k };
        NonlocalOp::new(k, grid)
    }

    fn solver(&self, t_end: f64, snapshots: Vec<f64>, epsilon: f64) -> SolverConfig {
        let flux = if self.mutation == Some(Mutation::NonConservativeFlux) {
            FluxScheme::NonConservativeUpwind
        } else {
            self.config.solver.flux
        };
        SolverConfig { t_end, snapshot_times: snapshots, epsilon, flux, ..self.config.solver.clone() }
    }

    fn initial(&self, grid: &Grid1D, mutate: bool) -> Result<FieldState> {
        if mutate && self.mutation == Some(Mutation::NonMonotoneData) {
            let mut s = self.config.profile.sample_unchecked(grid);
            let jump = s.u_plus - s.u_minus;
            for (v, x) in s.values.iter_mut().zip(grid.nodes()) {
                *v -= 0.3 * jump * libm::exp(-(x - 2.0) * (x - 2.0));
            }
            Ok(s)
        } else {
            self.config.profile.sample(grid)
        }
    }

    pub fn run_job(&self, job: Job) -> Result<JobOutput> {
        let c = &self.config;
        match job {
            Job::Primary => {
                let op = self.operator(c.grid)?;
                let s0 = self.initial(&c.grid, true)?;
                let cfg = self.solver(c.solver.t_end, self.primary_snapshots(), c.solver.epsilon);
                Ok(JobOutput::Trajectory(integrate(&s0, &op, &cfg)?))
            }
            Job::ContractionPair => {
                let op = self.operator(c.grid)?;
                let t_end = c.contraction_t_end;
                let snaps = snapshot_schedule(&[], t_end);
                let cfg = self.solver(t_end, snaps, c.solver.epsilon);
                let a = integrate(&self.initial(&c.grid, true)?, &op, &cfg)?;
                let partner = InitialProfile::new(widened(&c.profile.kind), c.profile.riemann)?;
                let b = integrate(&partner.sample(&c.grid)?, &op, &cfg)?;
                Ok(JobOutput::Pair(a, b))
            }
            Job::Identities => {
                let h = c.grid.h;
                let n = c.identity_nodes;
                let g = Grid1D::new(0.0, (n - 1) as f64 * h, n)?;
                let op = self.operator(g)?;
                let ctx = format!("random fields on {n} nodes, h = {h}");
                Ok(JobOutput::Checks(check_operator_identities(&op, c.identity_draws, c.seed, &ctx).to_vec()))
            }
            Job::CrossValidation { refined } => {
                let h = if refined { 0.5 * c.cross_validation_h } else { c.cross_validation_h };
                let t_end = c.cross_validation_t_end;
                let g = Grid1D::fan_rule_with_diffusivity(c.riemann(), t_end, h, self.config.viscosity())?;
                let op = self.operator(g)?;
                let s0 = self.initial(&g, true)?;
                let snaps = snapshot_schedule(&[], t_end);
                let tr = integrate(&s0, &op, &self.solver(t_end, snaps, c.solver.epsilon))?;
                Ok(JobOutput::Discrepancy(cross_validation_discrepancy(&tr, &c.kernel, &op)?))
            }
            Job::EpsRun(j) => {
                let eps = c.eps_list[j];
                let nu = 0.5 * c.kernel.second_moment() + c.eps_list[0];
                let g = Grid1D::fan_rule_with_diffusivity(c.riemann(), c.eps_time, c.eps_h, nu)?;
                let op = self.operator(g)?;
                let s0 = self.initial(&g, true)?;
                let tr = integrate(&s0, &op, &self.solver(c.eps_time, alloc::vec![c.eps_time], eps))?;
                Ok(JobOutput::State(tr.snapshots.into_iter().next().expect("final snapshot requested")))
            }
        }
    }

    /// Turns job outputs (in the order of [`Suite::jobs`]) into check results.
    pub fn assemble(&self, jobs: &[Job], outputs: Vec<JobOutput>) -> Result<Vec<CheckResult>> {
        let c = &self.config;
        let r = c.riemann();
        let mut results = Vec::new();
        let mut eps_states: Vec<Option<FieldState>> = alloc::vec![None; c.eps_list.len()];
        let mut cv = [None, None];
        for (job, out) in jobs.iter().zip(outputs) {
            match (job, out) {
                (Job::Primary, JobOutput::Trajectory(tr)) => {
                    let ctx = self.context("primary", &c.grid);
                    results.push(check_comparison(&tr, &ctx));
                    results.push(check_monotonicity(&tr, &ctx));
                    results.push(check_conservation(&tr, &ctx));
                    for p in [1.0, 2.0, f64::INFINITY] {
                        results.push(check_derivative_decay(&tr, p, 1.0, &ctx)?);
                    }
                    for p in [2.0, f64::INFINITY] {
                        match check_main_rate(&tr, &r, p, &ctx) {
                            Ok(pair) => results.extend(pair),
                            Err(Error::WindowTooShort) => results.push(window_too_short(&format!("main_rate_{}", p_label(p)), &ctx)),
                            Err(e) => return Err(e),
                        }
                    }
                    match check_l1_log_bound(&tr, &r, c.viscosity(), &ctx) {
                        Ok(res) => results.push(res),
                        Err(Error::WindowTooShort) => results.push(window_too_short("l1_log_bound", &ctx)),
                        Err(e) => return Err(e),
                    }
                }
                (Job::ContractionPair, JobOutput::Pair(a, b)) => {
                    let ctx = self.context("profile vs widened profile", &c.grid);
                    results.push(check_contraction(&a, &b, &ctx)?);
                }
                (Job::Identities, JobOutput::Checks(v)) => results.extend(v),
                (Job::CrossValidation { refined }, JobOutput::Discrepancy(d)) => cv[*refined as usize] = Some(d),
                (Job::EpsRun(j), JobOutput::State(s)) => eps_states[*j] = Some(s),
                _ => return Err(Error::BadConfig("job output does not match its job")),
            }
        }
        let kernel_ctx = format!("kernel {:?}, h = {}", c.kernel.family(), c.grid.h);
        results.push(check_kernel_symmetry(&self.operator(c.grid)?, &kernel_ctx));
        if let Some(coarse) = cv[0] {
            let h = c.cross_validation_h;
            let ctx = format!("h = {h}, t in [0, {}]", c.cross_validation_t_end);
            results.push(CheckResult::at_most("cross_validation", coarse, 1e-3, 0.0, &ctx).informative());
            if let Some(fine) = cv[1] {
                let ctx = format!("h = {h} vs {}; {coarse} -> {fine}", 0.5 * h);
                results.push(CheckResult::at_least("cross_validation_refinement", coarse / fine, 3.0, 0.0, &ctx).informative());
            }
        }
        if eps_states.iter().all(Option::is_some) && !eps_states.is_empty() {
            let states: Vec<FieldState> = eps_states.into_iter().flatten().collect();
            let study = EpsStudy::new(&c.eps_list, &states, c.eps_window)?;
            results.extend(study.checks(&format!("h = {}, eps = {:?}, L1 = {:?}", c.eps_h, c.eps_list, study.distances)));
        }
        let selected = self.selected();
        results.retain(|res| selected.contains(&res.name.as_str()));
        results.sort_by_key(|res| CHECK_NAMES.iter().position(|n| *n == res.name));
        Ok(results)
    }

    /// Runs every job in order on the current thread.
    pub fn run(&self) -> Result<Vec<CheckResult>> {
        let jobs = self.jobs();
        let outputs = jobs.iter().map(|&j| self.run_job(j)).collect::<Result<Vec<_>>>()?;
        self.assemble(&jobs, outputs)
    }

    fn context(&self, what: &str, g: &Grid1D) -> String {
        let r = self.config.riemann();
        let mut s = format!(
            "{what}: u- = {}, u+ = {}, eps = {}, h = {}, domain [{}, {}], t_end = {}",
            r.u_minus(),
            r.u_plus(),
            self.config.solver.epsilon,
            g.h,
            g.left,
            g.right,
            self.config.solver.t_end
        );
        if let Some(m) = self.mutation {
            s.push_str(&format!(", mutation {}", m.name()));
        }
        s
    }
}

fn window_too_short(name: &str, ctx: &str) -> CheckResult {
    CheckResult::at_most(name, f64::NAN, 1.0, 0.0, &format!("{ctx}; skipped: {}", Error::WindowTooShort)).informative()
}

/// The same family with twice the width (a shift by 0.5 for custom data).
fn widened(kind: &ProfileKind) -> ProfileKind {
    match kind {
        ProfileKind::TanhRamp { width } => ProfileKind::TanhRamp { width: 2.0 * width },
        ProfileKind::PiecewiseLinearRamp { half_width } => ProfileKind::PiecewiseLinearRamp { half_width: 2.0 * half_width },
        ProfileKind::Custom { abscissae, values } => ProfileKind::Custom {
            abscissae: abscissae.iter().map(|x| x + 0.5).collect(),
            values: values.clone(),
        },
    }
}

/// `extra`, plus 1, 2, 5 and ten log-spaced times per decade from 10 up to
/// `t_end` (rounded to six decimals), plus `t_end`.
pub fn snapshot_schedule(extra: &[f64], t_end: f64) -> Vec<f64> {
    let mut t: Vec<f64> = extra.iter().copied().filter(|&s| s > 0.0 && s <= t_end).collect();
    t.extend([1.0, 2.0, 5.0].into_iter().filter(|&s| s < t_end));
    let mut k = 0;
    loop {
        let s = libm::round(10.0 * libm::pow(10.0, k as f64 / 10.0) * 1e6) / 1e6;
        if s >= t_end {
            break;
        }
        t.push(s);
        k += 1;
    }
    t.push(t_end);
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}
