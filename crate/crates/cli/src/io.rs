//! File formats: snapshot CSV, norm reports, rate fits, suite reports,
//! tabulated kernels. Every float is written with 17 significant digits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rarefy_core::kernels::Tabulation;
use rarefy_core::{CheckResult, FieldState, NormReport, RateFit, Severity};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, Result};

/// Lossless decimal form of a double: 17 significant digits, scientific.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> CliError + '_ {
    move |e| CliError::Io { path: path.to_path_buf(), source: e.into() }
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(BufWriter::new(f)))
}

/// `x,u`, one row per node.
pub fn write_snapshot_csv(path: &Path, state: &FieldState) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["x", "u"]).map_err(csv_err(path))?;
    for (x, u) in state.grid.nodes().zip(&state.values) {
        w.write_record([fmt17(x), fmt17(*u)]).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Rows of an `x,u` file.
pub fn read_snapshot_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let num = |j: usize| -> Result<f64> {
            rec.get(j).and_then(|s| s.parse().ok()).ok_or_else(|| CliError::Table {
                path: path.to_path_buf(),
                line: i + 2,
                message: "expected two numeric columns".into(),
            })
        };
        rows.push((num(0)?, num(1)?));
    }
    Ok(rows)
}

/// `1`, `2`, `inf`: the label used in column names and JSON.
pub fn p_label(p: f64) -> String {
    if p == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{p}")
    }
}

fn parse_p(label: &str) -> Option<f64> {
    if label == "inf" {
        Some(f64::INFINITY)
    } else {
        label.parse().ok()
    }
}

/// One row per report: `time`, then `err_rarefaction_p*`, `err_viscous_p*`,
/// `deriv_p*` for each `p`, then `err_viscous_p1_over_log` (the L1 distance
/// to the viscous profile over `log(2+t)`) when `p = 1` is present.
pub fn write_norm_reports(path: &Path, reports: &[NormReport]) -> Result<()> {
    let mut w = writer(path)?;
    let Some(first) = reports.first() else {
        return w.flush().map_err(io_err(path));
    };
    let ps = &first.p_values;
    let p1 = ps.iter().position(|&p| p == 1.0);
    let mut header = vec!["time".to_string()];
    for prefix in ["err_rarefaction", "err_viscous", "deriv"] {
        header.extend(ps.iter().map(|&p| format!("{prefix}_p{}", p_label(p))));
    }
    if p1.is_some() {
        header.push("err_viscous_p1_over_log".into());
    }
    w.write_record(&header).map_err(csv_err(path))?;
    for r in reports {
        let mut row = vec![fmt17(r.time)];
        for col in [&r.err_to_rarefaction, &r.err_to_viscous, &r.deriv_norms] {
            row.extend(col.iter().map(|&v| fmt17(v)));
        }
        if let Some(j) = p1 {
            row.push(fmt17(r.err_to_viscous[j] / (2.0 + r.time).ln()));
        }
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// `(p, values)` for each norm exponent.
pub type Series = Vec<(f64, Vec<f64>)>;

/// Times and, per `p`, the `err_rarefaction_p*` column of a norm-report CSV.
pub fn read_rarefaction_errors(path: &Path) -> Result<(Vec<f64>, Series)> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = r.headers().map_err(csv_err(path))?.clone();
    let table_err = |line: usize, message: String| CliError::Table { path: path.to_path_buf(), line, message };
    let time_col = header.iter().position(|h| h == "time").ok_or_else(|| table_err(1, "no `time` column".into()))?;
    let cols: Vec<(usize, f64)> = header
        .iter()
        .enumerate()
        .filter_map(|(j, h)| h.strip_prefix("err_rarefaction_p").and_then(parse_p).map(|p| (j, p)))
        .collect();
    if cols.is_empty() {
        return Err(table_err(1, "no `err_rarefaction_p*` column".into()));
    }
    let mut times = Vec::new();
    let mut series: Vec<(f64, Vec<f64>)> = cols.iter().map(|&(_, p)| (p, Vec::new())).collect();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        let num = |j: usize| -> Result<f64> {
            rec.get(j).and_then(|s| s.trim().parse().ok()).ok_or_else(|| table_err(i + 2, format!("column {} is not a number", j + 1)))
        };
        times.push(num(time_col)?);
        for (k, &(j, _)) in cols.iter().enumerate() {
            series[k].1.push(num(j)?);
        }
    }
    Ok((times, series))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFitRecord {
    pub p: String,
    pub correction: &'static str,
    pub exponent: f64,
    pub log_constant: f64,
    pub residual: f64,
    pub window: [f64; 2],
}

impl From<&RateFit> for RateFitRecord {
    fn from(f: &RateFit) -> Self {
        Self {
            p: p_label(f.p),
            correction: f.correction.name(),
            exponent: f.exponent,
            log_constant: f.log_constant,
            residual: f.residual,
            window: [f.window.0, f.window.1],
        }
    }
}

pub fn rate_fits_json(fits: &[RateFit]) -> Value {
    json!({ "fits": fits.iter().map(RateFitRecord::from).collect::<Vec<_>>() })
}

/// Columns `name,passed,measured,bound,tolerance,context`; informative rows
/// carry an `[informative]` prefix in `context`.
pub fn write_suite_csv(path: &Path, results: &[CheckResult]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["name", "passed", "measured", "bound", "tolerance", "context"]).map_err(csv_err(path))?;
    for c in results {
        let context = match c.severity {
            Severity::Informative => format!("[informative] {}", c.context),
            Severity::Contradiction => c.context.clone(),
        };
        w.write_record([
            c.name.clone(),
            c.passed.to_string(),
            fmt17(c.measured),
            fmt17(c.bound),
            fmt17(c.tolerance),
            context,
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// The summary line printed for each check. Informative checks that could
/// not be measured (the run was too short) print as `SKIP`.
pub fn check_line(c: &CheckResult) -> String {
    let verdict = match (c.passed, c.severity) {
        (true, _) => "PASS",
        (false, Severity::Informative) if c.measured.is_nan() => "SKIP",
        (false, _) => "FAIL",
    };
    let note = if c.severity == Severity::Informative { " (informative)" } else { "" };
    format!(
        "{verdict} {:<28} measured {:<12.4e} bound {:<10.3e} tol {:.1e}{note}",
        c.name, c.measured, c.bound, c.tolerance
    )
}

/// Generic CSV table with a header and float columns.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(header).map_err(csv_err(path))?;
    for row in rows {
        w.write_record(row.iter().map(|&v| fmt17(v))).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let f = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e.into() })?;
    writeln!(w).and_then(|_| w.flush()).map_err(io_err(path))
}

/// Two whitespace-separated columns (abscissa, value); `#` starts a comment.
pub fn read_tabulated_kernel(path: &Path) -> Result<Tabulation> {
    let f = File::open(path).map_err(io_err(path))?;
    let (mut xs, mut vs) = (Vec::new(), Vec::new());
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let bad = |message: &str| CliError::Table { path: PathBuf::from(path), line: i + 1, message: message.into() };
        let cols: Vec<&str> = body.split_whitespace().collect();
        if cols.len() != 2 {
            return Err(bad("expected two columns"));
        }
        xs.push(cols[0].parse::<f64>().map_err(|_| bad("abscissa is not a number"))?);
        vs.push(cols[1].parse::<f64>().map_err(|_| bad("value is not a number"))?);
    }
    Ok(Tabulation::new(xs, vs))
}
