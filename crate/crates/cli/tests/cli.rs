use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rarefy::config::{DEFAULT_TOML, RATES_TOML};
use rarefy::io::read_snapshot_csv;
use rarefy::{ExperimentConfig, ExperimentKind, OUT_DIR_ENV};
use serde_json::Value;

fn rarefy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rarefy")).args(args).env_remove(OUT_DIR_ENV).output().unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

/// Short run settings for tests that only need some output.
const SHORT: [&str; 4] = ["--set", "solver.t_end=10", "--set", "solver.snapshot_times=[1, 10]"];

fn short_run(out: &Path, extra: &[&str]) -> Output {
    let o = out_arg(out);
    let mut args = vec!["run", "--out", &o];
    args.extend(SHORT);
    args.extend(extra);
    rarefy(&args)
}

#[test]
fn default_run_writes_parsable_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let o = rarefy(&["run", "--out", &out_arg(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let side = read_json(&dir.path().join("run.json"));
    let n = side["grid"]["n"].as_u64().unwrap() as usize;
    for t in ["1", "10", "100"] {
        let rows = read_snapshot_csv(&dir.path().join(format!("u_t{t}.csv"))).unwrap();
        assert_eq!(rows.len(), n);
        assert!(rows.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 >= w[0].1 - 1e-12));
    }
    let text = std::fs::read_to_string(dir.path().join("u_t10.csv")).unwrap();
    assert!(text.starts_with("x,u\n"));
    assert!(side["diagnostics"]["steps"].as_u64().unwrap() > 0);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(short_run(a.path(), &[]).status.success());
    assert!(short_run(b.path(), &[]).status.success());
    for f in ["u_t1.csv", "u_t10.csv", "run.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
}

#[test]
fn sidecar_echo_reparses_to_the_same_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = short_run(dir.path(), &["--set", "suite.eps_list=[0.2, 0.1, 0.0]", "--set", "grid.h=0.07"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let side = dir.path().join("run.json");
    let echoed = ExperimentConfig::load(&side, &[]).unwrap();
    let overrides: Vec<String> = ["solver.t_end=10", "solver.snapshot_times=[1, 10]", "suite.eps_list=[0.2, 0.1, 0.0]", "grid.h=0.07"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let mut original = ExperimentConfig::parse(DEFAULT_TOML, false, &overrides).unwrap();
    original.experiment = ExperimentKind::Run;
    assert_eq!(echoed, original);

    // rerunning from the sidecar reproduces the snapshots
    let again = tempfile::tempdir().unwrap();
    let o = rarefy(&["run", "--config", side.to_str().unwrap(), "--out", &out_arg(again.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        std::fs::read(dir.path().join("u_t10.csv")).unwrap(),
        std::fs::read(again.path().join("u_t10.csv")).unwrap()
    );
}

#[test]
fn shipped_configs_round_trip_through_json() {
    for text in [DEFAULT_TOML, RATES_TOML, rarefy::config::CROSS_VALIDATE_TOML] {
        let cfg = ExperimentConfig::parse(text, false, &[]).unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::parse(&json, true, &[]).unwrap(), cfg);
        cfg.build().unwrap();
    }
}

#[test]
fn decreasing_far_fields_are_rejected_by_field_name() {
    let dir = tempfile::tempdir().unwrap();
    let o = short_run(dir.path(), &["--set", "riemann.u_minus=1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("riemann.u_minus"), "{}", stderr(&o));
}

#[test]
fn undersized_domain_reports_a_suggestion() {
    let dir = tempfile::tempdir().unwrap();
    let o = short_run(dir.path(), &["--set", "grid.left=-15", "--set", "grid.right=15", "--set", "solver.t_end=20"]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("use a domain containing ["), "{e}");
    // the suggestion is the fan rule for t_end = 20: [-0.5 t - m, t + m], m = 20 + 10 sqrt(20)
    let m = 20.0 + 10.0 * 20f64.sqrt();
    assert!(e.contains(&format!("[{}, {}]", -10.0 - m, 20.0 + m)), "{e}");
}

#[test]
fn unknown_keys_and_bad_values_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = short_run(dir.path(), &["--set", "solver.cfll=0.4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("solver"), "{}", stderr(&o));
    let o = short_run(dir.path(), &["--set", "grid.h=fine"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("grid.h"), "{}", stderr(&o));
}

#[test]
fn out_flag_beats_env_which_beats_config() {
    let root = tempfile::tempdir().unwrap();
    let (flag, env, cfg) = (root.path().join("flag"), root.path().join("env"), root.path().join("cfg"));
    let set_cfg = format!("out_dir=\"{}\"", cfg.display());
    let run = |with_flag: bool, with_env: bool| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_rarefy"));
        c.arg("run").args(SHORT).args(["--set", &set_cfg]).env_remove(OUT_DIR_ENV);
        if with_flag {
            c.args(["--out", flag.to_str().unwrap()]);
        }
        if with_env {
            c.env(OUT_DIR_ENV, &env);
        }
        assert!(c.output().unwrap().status.success());
    };
    run(true, true);
    assert!(flag.join("run.json").exists() && !env.exists() && !cfg.exists());
    run(false, true);
    assert!(env.join("run.json").exists() && !cfg.exists());
    run(false, false);
    assert!(cfg.join("run.json").exists());
}

#[test]
fn tabulated_kernel_from_a_text_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tent.txt"), "# tent kernel, unit mass\n-1 0\n0 1\n1 0\n").unwrap();
    let cfg = DEFAULT_TOML.replace("family = \"exponential\"\nrate = 1.0", "family = \"tabulated\"\npath = \"tent.txt\"");
    let cfg_path = dir.path().join("tent.toml");
    std::fs::write(&cfg_path, cfg).unwrap();
    let out = dir.path().join("out");
    let o = rarefy(&["run", "--config", cfg_path.to_str().unwrap(), "--out", &out_arg(&out), SHORT[0], SHORT[1], SHORT[2], SHORT[3]]);
    assert!(o.status.success(), "{}", stderr(&o));
    let side = read_json(&out.join("run.json"));
    let p = PathBuf::from(side["config"]["kernel"]["path"].as_str().unwrap());
    assert!(p.is_absolute());
}

#[test]
fn cross_validate_rejects_other_kernels() {
    let dir = tempfile::tempdir().unwrap();
    let o = rarefy(&["cross-validate", "--set", "kernel={family = \"gaussian\", sigma = 1.0}", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("exponential kernel with rate 1"), "{}", stderr(&o));
}

fn cross_validate(out: &Path, extra: &[&str]) -> (Option<i32>, f64) {
    let o = out_arg(out);
    let mut args = vec!["cross-validate", "--out", &o];
    args.extend(extra);
    let res = rarefy(&args);
    let side = read_json(&out.join("cross_validate.json"));
    (res.status.code(), side["max_discrepancy"].as_f64().unwrap())
}

#[test]
fn cross_validation_passes_and_shrinks_under_refinement() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (code, coarse) = cross_validate(a.path(), &[]);
    assert_eq!(code, Some(0));
    assert!(coarse <= 1e-3, "{coarse}");
    let (_, fine) = cross_validate(b.path(), &["--set", "grid.h=0.00625"]);
    assert!(coarse / fine >= 3.0, "{coarse} -> {fine}");
    let rows = std::fs::read_to_string(a.path().join("cross_validation.csv")).unwrap();
    assert_eq!(rows.lines().count(), 1 + 6);
}

#[test]
fn verify_only_runs_one_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = rarefy(&["verify", "--only", "comparison", "--out", &out_arg(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("suite.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 2, "{csv}");
    assert_eq!(rows[0], "name,passed,measured,bound,tolerance,context");
    assert!(rows[1].starts_with("comparison,true,"));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).count(), 1);
}

#[test]
fn verify_rejects_unknown_filters_and_mutations() {
    let dir = tempfile::tempdir().unwrap();
    let o = rarefy(&["verify", "--only", "compar", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let o = rarefy(&["verify", "--break", "gravity", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn broken_flux_fails_conservation() {
    let dir = tempfile::tempdir().unwrap();
    let o = rarefy(&[
        "verify",
        "--break=flux",
        "--set",
        "solver.t_end=50",
        "--set",
        "solver.snapshot_times=[1, 10, 50]",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("suite.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("conservation,false,")), "{csv}");
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("FAIL conservation")), "{stdout}");
}

#[test]
fn default_verify_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = rarefy(&["verify", "--out", &out_arg(dir.path())]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(0), "{stdout}\n{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("suite.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + rarefy_core::verification::CHECK_NAMES.len(), "{csv}");
}

#[test]
fn default_rates_record_the_decay_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let o = rarefy(&["rates", "--out", &out_arg(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fits = read_json(&dir.path().join("fits.json"));
    let fit = |p: &str, c: &str| {
        fits["fits"]
            .as_array()
            .unwrap()
            .iter()
            .find(|f| f["p"] == p && f["correction"] == c)
            .unwrap_or_else(|| panic!("no fit for p = {p}, {c}"))
            .clone()
    };
    for p in ["1", "2", "inf"] {
        for c in ["none", "sqrt_log"] {
            assert!(fit(p, c)["exponent"].is_f64());
        }
    }
    let e = fit("inf", "sqrt_log")["exponent"].as_f64().unwrap();
    assert!(e <= -0.45, "exponent {e}");

    // distance to the viscous profile over log(2+t): bounded on [10, 1000]
    let mut r = csv::Reader::from_path(dir.path().join("norms.csv")).unwrap();
    let h = r.headers().unwrap().clone();
    let (ti, qi) = (
        h.iter().position(|c| c == "time").unwrap(),
        h.iter().position(|c| c == "err_viscous_p1_over_log").unwrap(),
    );
    let q: Vec<f64> = r
        .records()
        .map(|rec| rec.unwrap())
        .filter(|rec| rec[ti].parse::<f64>().unwrap() >= 10.0)
        .map(|rec| rec[qi].parse().unwrap())
        .collect();
    assert!(q.len() >= 20);
    let hi = q.iter().cloned().fold(0.0, f64::max);
    assert!(hi <= 1.2 * q[0], "ratio column rises from {} to {hi}", q[0]);
}

#[test]
fn replay_recovers_a_planted_power_law() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("planted.csv");
    let mut text = String::from("time,err_rarefaction_p1,err_rarefaction_p2,err_rarefaction_pinf\n");
    for k in 0..21 {
        let t = 10f64 * 10f64.powf(k as f64 / 10.0);
        let e = 3.0 / t.sqrt();
        text.push_str(&format!("{t:e},{e:e},{e:e},{e:e}\n"));
    }
    std::fs::write(&csv, text).unwrap();
    let out = dir.path().join("out");
    let o = rarefy(&["rates", "--replay", csv.to_str().unwrap(), "--out", &out_arg(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let fits = read_json(&out.join("fits.json"));
    let plain: Vec<&Value> = fits["fits"].as_array().unwrap().iter().filter(|f| f["correction"] == "none").collect();
    assert_eq!(plain.len(), 3);
    for f in plain {
        let e = f["exponent"].as_f64().unwrap();
        assert!((e + 0.5).abs() <= 1e-6, "{e}");
        assert!(f["residual"].as_f64().unwrap() < 1e-9);
    }
}

#[test]
fn eps_limit_writes_the_study() {
    let dir = tempfile::tempdir().unwrap();
    let o = rarefy(&["eps-limit", "--out", &out_arg(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut r = csv::Reader::from_path(dir.path().join("eps_limit.csv")).unwrap();
    let d: Vec<f64> = r.records().map(|rec| rec.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(d.len(), 5);
    assert_eq!(d[4], 0.0);
    assert!(d[..4].windows(2).all(|w| w[1] < w[0]), "{d:?}");
}
