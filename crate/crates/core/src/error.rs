use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    // kernels
    #[error("kernel parameter `{name}` must be finite and strictly positive, got {value}")]
    BadKernelParameter { name: &'static str, value: f64 },
    #[error("kernel is not symmetric: J({x}) = {left} but J({neg_x}) = {right}", neg_x = -x)]
    NonSymmetricKernel { x: f64, left: f64, right: f64 },
    #[error("kernel takes a negative value {value} at x = {x}")]
    NegativeKernel { x: f64, value: f64 },
    #[error("kernel mass {mass} cannot be normalized to one")]
    NonUnitMass { mass: f64 },
    #[error("kernel second moment is not finite")]
    InfiniteSecondMoment,
    #[error("tabulated kernel is malformed: {0}")]
    BadTabulation(&'static str),
    #[error("kernel truncation tolerance {0} must lie in (0, 1e-6)")]
    BadTolerance(f64),
    #[error("grid spacing {h} too coarse for the kernel: only {nonzero} nonzero weights")]
    SpacingTooCoarse { h: f64, nonzero: usize },

    // field
    #[error("bad domain: left = {left}, right = {right}, n = {n} (need left < right, n >= 16)")]
    BadDomain { left: f64, right: f64, n: usize },
    #[error("far-field states must satisfy u_minus < u_plus, got ({u_minus}, {u_plus})")]
    NotRarefaction { u_minus: f64, u_plus: f64 },
    #[error("initial profile is not non-decreasing near x = {x} (step {step})")]
    NotMonotone { x: f64, step: f64 },
    #[error("profile tails beyond the grid integrate to {tail:e} (> 1e-10); widen the grid")]
    TailsTooFat { tail: f64 },
    #[error("initial profile parameter `{name}` is invalid: {value}")]
    BadProfile { name: &'static str, value: f64 },

    // operators
    #[error("state lives on a grid that does not match the operator grid")]
    GridMismatch,
    #[error("elliptic reformulation requires the exponential kernel with rate 1")]
    WrongKernel,
    #[error("tridiagonal solve hit a zero pivot")]
    SingularSolve,

    // references / metrics
    #[error("time must be strictly positive, got {0}")]
    NonpositiveTime(f64),
    #[error("L^p exponent must satisfy p >= 1, got {0}")]
    BadP(f64),
    #[error("rate fit needs at least 5 samples, got {0}")]
    TooFewPoints(usize),
    #[error("rate fit needs positive errors, got {0}")]
    NonpositiveError(f64),
    #[error("rate fit needs strictly increasing times")]
    UnsortedTimes,

    // solver
    #[error("invalid solver configuration: {0}")]
    BadConfig(&'static str),
    #[error("non-finite value at node {node}, t = {time}")]
    BlowUp { node: usize, time: f64 },
    #[error(
        "rarefaction fan reaches within 5h of the boundary before t_end; \
         use a domain containing [{suggested_left}, {suggested_right}]"
    )]
    FanHitBoundary { suggested_left: f64, suggested_right: f64 },

    // verification
    #[error("rate window too short: need snapshots spanning 1.5 decades within [10, t_end]")]
    WindowTooShort,
    #[error("runs do not share grid, kernel, viscosity and far-field states")]
    MismatchedRuns,
}
