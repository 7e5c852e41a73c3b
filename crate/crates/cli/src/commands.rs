//! The five subcommands. Each returns whether its checks passed; errors from
//! the core or from IO propagate as [`CliError`].

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rarefy_core::metrics::{fit_rate, Correction};
use rarefy_core::solver::{integrate, Trajectory};
use rarefy_core::verification::{cross_validation_gap, snapshot_schedule, EpsStudy, Job, CHECK_NAMES};
use rarefy_core::{Error, FieldState, Mutation, NonlocalOp, NormReport, RateFit, Suite};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Setup};
use crate::error::{CliError, Result};
use crate::io::{
    check_line, fmt17, rate_fits_json, read_rarefaction_errors, write_json, write_norm_reports, write_snapshot_csv,
    write_suite_csv, write_table,
};

/// Errors-to-the-rarefaction exponents are fitted over `t >= RATE_WINDOW_START`.
pub const RATE_WINDOW_START: f64 = 10.0;

/// Cross-validation passes iff the worst relative gap is at most this.
pub const CROSS_VALIDATION_BOUND: f64 = 1e-3;

pub const P_VALUES: [f64; 3] = [1.0, 2.0, f64::INFINITY];

pub struct Context {
    pub config: ExperimentConfig,
    pub setup: Setup,
    pub out: PathBuf,
}

impl Context {
    pub fn new(config: ExperimentConfig, out: PathBuf) -> Result<Self> {
        let setup = config.build()?;
        std::fs::create_dir_all(&out).map_err(|source| CliError::Io { path: out.clone(), source })?;
        Ok(Self { config, setup, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn operator(&self) -> Result<NonlocalOp> {
        let s = &self.setup;
        Ok(NonlocalOp::from_spec(&s.kernel, s.grid, s.solver.kernel_tol)?)
    }

    fn integrate(&self, snapshot_times: Vec<f64>) -> Result<Trajectory> {
        let s = &self.setup;
        let op = self.operator()?;
        let s0 = s.profile.sample(&s.grid)?;
        let cfg = rarefy_core::SolverConfig { snapshot_times, ..s.solver.clone() };
        Ok(integrate(&s0, &op, &cfg)?)
    }

    /// Config echo plus grid, written next to every output set.
    fn sidecar(&self, extra: Value) -> Value {
        let g = &self.setup.grid;
        let mut v = json!({
            "config": self.config,
            "grid": { "left": g.left, "right": g.right, "n": g.n, "h": g.h },
        });
        if let (Some(obj), Value::Object(more)) = (v.as_object_mut(), extra) {
            obj.extend(more);
        }
        v
    }
}

/// File name of the snapshot at time `t`.
pub fn snapshot_name(prefix: &str, t: f64) -> String {
    format!("{prefix}{t}.csv")
}

pub fn cmd_run(ctx: &Context) -> Result<bool> {
    let tr = ctx.integrate(ctx.setup.solver.snapshot_times.clone())?;
    let mut files = Vec::new();
    for s in &tr.snapshots {
        let name = snapshot_name("u_t", s.time);
        write_snapshot_csv(&ctx.path(&name), s)?;
        files.push(json!({ "time": s.time, "file": name }));
    }
    let d = tr.summary();
    let side = ctx.sidecar(json!({
        "snapshots": files,
        "diagnostics": {
            "steps": d.steps,
            "min_dt": d.min_dt,
            "max_dt": d.max_dt,
            "max_abs": d.max_abs,
            "min_one_sided_difference": d.min_difference,
        },
    }));
    write_json(&ctx.path("run.json"), &side)?;
    println!("{} snapshots, {} steps, written to {}", tr.snapshots.len(), d.steps, ctx.out.display());
    Ok(true)
}

/// Fits of every series over `t >= 10`, uncorrected and log-corrected.
pub fn fit_all(times: &[f64], series: &[(f64, Vec<f64>)]) -> Result<Vec<RateFit>> {
    let start = times.partition_point(|&t| t < RATE_WINDOW_START);
    let mut fits = Vec::new();
    for (p, errors) in series {
        for c in [Correction::None, Correction::SqrtLog] {
            fits.push(fit_rate(&times[start..], &errors[start..], *p, c)?);
        }
    }
    Ok(fits)
}

fn report_fits(fits: &[RateFit]) {
    for f in fits {
        println!(
            "p = {:<4} correction {:<9} exponent {:>9.5} residual {:.2e} window [{}, {}]",
            crate::io::p_label(f.p),
            f.correction.name(),
            f.exponent,
            f.residual,
            f.window.0,
            f.window.1
        );
    }
}

/// With `replay`, refits the error columns of an existing norm-report CSV
/// instead of running the solver.
pub fn cmd_rates(ctx: &Context, replay: Option<&Path>) -> Result<bool> {
    if let Some(src) = replay {
        let (times, series) = read_rarefaction_errors(src)?;
        let fits = fit_all(&times, &series)?;
        write_json(&ctx.path("fits.json"), &rate_fits_json(&fits))?;
        write_json(&ctx.path("rates.json"), &ctx.sidecar(json!({ "replay": src })))?;
        report_fits(&fits);
        return Ok(true);
    }
    let s = &ctx.setup;
    let tr = ctx.integrate(snapshot_schedule(&s.solver.snapshot_times, s.solver.t_end))?;
    let nu = s.viscosity();
    let reports = tr
        .snapshots
        .iter()
        .filter(|st| st.time > 0.0)
        .map(|st| NormReport::new(st, &s.riemann, nu, &P_VALUES))
        .collect::<rarefy_core::Result<Vec<_>>>()?;
    write_norm_reports(&ctx.path("norms.csv"), &reports)?;
    let times: Vec<f64> = reports.iter().map(|r| r.time).collect();
    let series: Vec<(f64, Vec<f64>)> = P_VALUES
        .iter()
        .enumerate()
        .map(|(j, &p)| (p, reports.iter().map(|r| r.err_to_rarefaction[j]).collect()))
        .collect();
    let fits = fit_all(&times, &series)?;
    write_json(&ctx.path("fits.json"), &rate_fits_json(&fits))?;
    write_json(&ctx.path("rates.json"), &ctx.sidecar(json!({ "viscosity": nu, "snapshots": times })))?;
    report_fits(&fits);
    Ok(true)
}

/// Runs `f(0..n)` on a small pool of scoped threads; results keep their index.
fn run_parallel<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let workers = std::thread::available_parallelism().map_or(1, |w| w.get()).min(n.max(1));
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let out = f(i);
                slots.lock().expect("no worker panicked")[i] = Some(out);
            });
        }
    });
    slots.into_inner().expect("no worker panicked").into_iter().map(|o| o.expect("every job ran")).collect()
}

fn validate_only(only: &[String]) -> Result<()> {
    for f in only {
        let hit = CHECK_NAMES.iter().any(|n| *n == f || (n.starts_with(f.as_str()) && n.as_bytes().get(f.len()) == Some(&b'_')));
        if !hit {
            return Err(CliError::UnknownCheck(f.clone()));
        }
    }
    Ok(())
}

pub fn cmd_verify(ctx: &Context, only: &[String], mutation: Option<Mutation>) -> Result<bool> {
    validate_only(only)?;
    let suite = Suite::new(ctx.setup.suite_config(&ctx.config.suite)).with_mutation(mutation).with_only(only.to_vec());
    let jobs = suite.jobs();
    let outputs = run_parallel(jobs.len(), |i| suite.run_job(jobs[i])).into_iter().collect::<rarefy_core::Result<Vec<_>>>()?;
    let results = suite.assemble(&jobs, outputs)?;
    for c in &results {
        println!("{}", check_line(c));
    }
    write_suite_csv(&ctx.path("suite.csv"), &results)?;
    let failed: Vec<&str> = results.iter().filter(|c| !c.acceptable()).map(|c| c.name.as_str()).collect();
    let summary = format!("{} checks, {} failed", results.len(), failed.len());
    println!("{summary}");
    let side = ctx.sidecar(json!({
        "mutation": mutation.map(Mutation::name),
        "only": only,
        "checks": results.len(),
        "failed": failed,
    }));
    write_json(&ctx.path("verify.json"), &side)?;
    Ok(failed.is_empty())
}

pub fn cmd_eps_limit(ctx: &Context) -> Result<bool> {
    let sc = ctx.setup.suite_config(&ctx.config.suite);
    let suite = Suite::new(sc.clone());
    let states = run_parallel(sc.eps_list.len(), |j| match suite.run_job(Job::EpsRun(j))? {
        rarefy_core::verification::JobOutput::State(s) => Ok(s),
        _ => Err(Error::BadConfig("eps run returned no state")),
    })
    .into_iter()
    .collect::<rarefy_core::Result<Vec<FieldState>>>()?;
    let study = EpsStudy::new(&sc.eps_list, &states, sc.eps_window)?;
    let ratios = study.ratios();
    let orders = study.orders();
    let mut rows = Vec::new();
    for (j, (&e, &d)) in study.eps.iter().zip(&study.distances).enumerate() {
        rows.push(vec![e, d, ratios.get(j).copied().unwrap_or(f64::NAN), orders.get(j).copied().unwrap_or(f64::NAN)]);
        write_snapshot_csv(&ctx.path(&snapshot_name("u_eps", e)), &states[j])?;
    }
    write_table(&ctx.path("eps_limit.csv"), &["eps", "l1_distance", "ratio_to_next", "order_to_next"], &rows)?;
    for row in &rows {
        println!("eps {:<8} L1 {} ratio {:.4}", row[0], fmt17(row[1]), row[2]);
    }
    let checks = study.checks("eps study");
    for c in &checks {
        println!("{}", check_line(c));
    }
    let side = ctx.sidecar(json!({
        "time": study.time,
        "window": [study.window.0, study.window.1],
        "eps": study.eps,
        "distances": study.distances,
    }));
    write_json(&ctx.path("eps_limit.json"), &side)?;
    Ok(true)
}

pub fn cmd_cross_validate(ctx: &Context) -> Result<bool> {
    let s = &ctx.setup;
    if !s.kernel.is_unit_exponential() {
        return Err(Error::WrongKernel.into());
    }
    let op = ctx.operator()?;
    let tr = ctx.integrate(s.solver.snapshot_times.clone())?;
    let mut rows = Vec::new();
    for st in std::iter::once(&tr.initial).chain(&tr.snapshots) {
        rows.push(vec![st.time, cross_validation_gap(st, &s.kernel, &op)?]);
    }
    write_table(&ctx.path("cross_validation.csv"), &["time", "discrepancy"], &rows)?;
    let worst = rows.iter().map(|r| r[1]).fold(0.0, f64::max);
    let passed = worst <= CROSS_VALIDATION_BOUND;
    println!(
        "{} cross_validation max relative gap {:.4e} (bound {CROSS_VALIDATION_BOUND:e}, h = {})",
        if passed { "PASS" } else { "FAIL" },
        worst,
        s.grid.h
    );
    let side = ctx.sidecar(json!({ "max_discrepancy": worst, "bound": CROSS_VALIDATION_BOUND, "passed": passed }));
    write_json(&ctx.path("cross_validate.json"), &side)?;
    Ok(passed)
}
