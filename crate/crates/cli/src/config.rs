//! Experiment configuration: a TOML (or JSON) file with nested sections,
//! `--set section.key=value` overrides, and conversion into core types.

use std::path::{Path, PathBuf};

use rarefy_core::field::ProfileKind;
use rarefy_core::kernels::{KernelFamily, DEFAULT_TRUNCATION_TOL};
use rarefy_core::solver::Integrator;
use rarefy_core::{Grid1D, InitialProfile, KernelSpec, RiemannData, SolverConfig, SuiteConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, Result};
use crate::io::read_tabulated_kernel;

/// Shipped configurations, also used when `--config` is absent.
pub const DEFAULT_TOML: &str = include_str!("../configs/default.toml");
pub const RATES_TOML: &str = include_str!("../configs/rates.toml");
pub const CROSS_VALIDATE_TOML: &str = include_str!("../configs/cross_validate.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    #[default]
    Run,
    Rates,
    Verify,
    EpsLimit,
    CrossValidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Exponential { rate: f64 },
    Gaussian { sigma: f64 },
    CompactBump { half_width: f64 },
    /// Two-column text file; relative paths resolve against the config file.
    Tabulated { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiemannConfig {
    pub u_minus: f64,
    pub u_plus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileConfig {
    Tanh { width: f64 },
    Linear { half_width: f64 },
    Custom { abscissae: Vec<f64>, values: Vec<f64> },
}

/// Spacing plus an optional explicit domain; without one the fan rule sizes it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorName {
    SspRk2,
    #[default]
    SspRk3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_tol")]
    pub kernel_tol: f64,
    pub t_end: f64,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub integrator: IntegratorName,
}

fn default_cfl() -> f64 {
    0.5
}

fn default_tol() -> f64 {
    DEFAULT_TRUNCATION_TOL
}

/// Knobs of the verification suite and the eps study; unset fields take the
/// suite defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contraction_t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity_draws: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identity_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_validation_h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_validation_t_end: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_window: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub kernel: KernelConfig,
    pub riemann: RiemannConfig,
    pub profile: ProfileConfig,
    pub grid: GridConfig,
    pub solver: SolverSection,
    #[serde(default)]
    pub suite: SuiteSection,
}

/// Core objects built from a validated config.
#[derive(Debug, Clone)]
pub struct Setup {
    pub kernel: KernelSpec,
    pub riemann: RiemannData,
    pub profile: InitialProfile,
    pub grid: Grid1D,
    pub solver: SolverConfig,
}

impl Setup {
    /// Effective viscosity of the viscous reference, `m_2 / 2 + eps`.
    pub fn viscosity(&self) -> f64 {
        0.5 * self.kernel.second_moment() + self.solver.epsilon
    }

    pub fn suite_config(&self, s: &SuiteSection) -> SuiteConfig {
        let mut c = SuiteConfig::new(self.kernel.clone(), self.profile.clone(), self.grid, self.solver.clone());
        if let Some(v) = s.contraction_t_end {
            c.contraction_t_end = v;
        }
        if let Some(v) = s.identity_draws {
            c.identity_draws = v;
        }
        if let Some(v) = s.identity_nodes {
            c.identity_nodes = v;
        }
        if let Some(v) = s.seed {
            c.seed = v;
        }
        if let Some(v) = s.cross_validation_h {
            c.cross_validation_h = v;
        }
        if let Some(v) = s.cross_validation_t_end {
            c.cross_validation_t_end = v;
        }
        if let Some(v) = &s.eps_list {
            c.eps_list = v.clone();
        }
        if let Some(v) = s.eps_h {
            c.eps_h = v;
        }
        if let Some(v) = s.eps_time {
            c.eps_time = v;
        }
        if let Some([a, b]) = s.eps_window {
            c.eps_window = (a, b);
        }
        c
    }
}

fn field_error(field: &str, message: impl Into<String>) -> CliError {
    CliError::ConfigParse { field: field.to_string(), message: message.into() }
}

impl ExperimentConfig {
    /// Reads a TOML file, or a JSON file holding either a config or a run
    /// sidecar (whose `config` entry is used), then applies `overrides`.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        let mut cfg = Self::parse(&text, is_json, overrides)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")))?;
        Ok(cfg)
    }

    pub fn parse(text: &str, is_json: bool, overrides: &[String]) -> Result<Self> {
        let mut tree: Value = if is_json {
            let v: Value =
                serde_json::from_str(text).map_err(|e| field_error("<file>", format!("invalid JSON: {e}")))?;
            match v.get("config") {
                Some(inner) if v.get("kernel").is_none() => inner.clone(),
                _ => v,
            }
        } else {
            let t: toml::Table = toml::from_str(text).map_err(|e| field_error("<file>", format!("invalid TOML: {e}")))?;
            serde_json::to_value(t).map_err(|e| field_error("<file>", e.to_string()))?
        };
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        let cfg: Self = serde_path_to_error::deserialize(tree).map_err(|e| {
            let field = e.path().to_string();
            field_error(&field, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Makes a tabulated-kernel path absolute, so the echo stays valid
    /// wherever it is read from.
    fn resolve_paths(&mut self, base: &Path) -> Result<()> {
        if let KernelConfig::Tabulated { path } = &mut self.kernel {
            if path.is_relative() {
                *path = base.join(&*path);
            }
            *path = path
                .canonicalize()
                .map_err(|e| field_error("kernel.path", format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }

    /// Checks that do not need the core constructors.
    fn validate(&self) -> Result<()> {
        let r = &self.riemann;
        if !r.u_minus.is_finite() {
            return Err(field_error("riemann.u_minus", "must be finite"));
        }
        if !r.u_plus.is_finite() {
            return Err(field_error("riemann.u_plus", "must be finite"));
        }
        if r.u_minus >= r.u_plus {
            return Err(field_error(
                "riemann.u_minus",
                format!("must be smaller than riemann.u_plus for rarefaction data, got {} >= {}", r.u_minus, r.u_plus),
            ));
        }
        if !(self.grid.h.is_finite() && self.grid.h > 0.0) {
            return Err(field_error("grid.h", format!("must be positive, got {}", self.grid.h)));
        }
        match (self.grid.left, self.grid.right) {
            (Some(a), Some(b)) if a >= b || a.is_nan() || b.is_nan() => {
                return Err(field_error("grid.left", format!("must be smaller than grid.right, got {a} >= {b}")))
            }
            (Some(_), None) => return Err(field_error("grid.right", "must be given together with grid.left")),
            (None, Some(_)) => return Err(field_error("grid.left", "must be given together with grid.right")),
            _ => {}
        }
        Ok(())
    }

    /// Builds and validates every core object.
    pub fn build(&self) -> Result<Setup> {
        let family = match &self.kernel {
            KernelConfig::Exponential { rate } => KernelFamily::Exponential { rate: *rate },
            KernelConfig::Gaussian { sigma } => KernelFamily::Gaussian { sigma: *sigma },
            KernelConfig::CompactBump { half_width } => KernelFamily::CompactBump { half_width: *half_width },
            KernelConfig::Tabulated { path } => KernelFamily::Tabulated(read_tabulated_kernel(path)?),
        };
        let kernel = KernelSpec::new(family).map_err(|e| field_error("kernel", e.to_string()))?;
        let riemann = RiemannData::new(self.riemann.u_minus, self.riemann.u_plus)
            .map_err(|e| field_error("riemann", e.to_string()))?;
        let kind = match &self.profile {
            ProfileConfig::Tanh { width } => ProfileKind::TanhRamp { width: *width },
            ProfileConfig::Linear { half_width } => ProfileKind::PiecewiseLinearRamp { half_width: *half_width },
            ProfileConfig::Custom { abscissae, values } => {
                ProfileKind::Custom { abscissae: abscissae.clone(), values: values.clone() }
            }
        };
        let profile = InitialProfile::new(kind, riemann).map_err(|e| field_error("profile", e.to_string()))?;
        let s = &self.solver;
        let solver = SolverConfig {
            epsilon: s.epsilon,
            cfl: s.cfl,
            kernel_tol: s.kernel_tol,
            t_end: s.t_end,
            snapshot_times: s.snapshot_times.clone(),
            integrator: match s.integrator {
                IntegratorName::SspRk2 => Integrator::SspRk2,
                IntegratorName::SspRk3 => Integrator::SspRk3,
            },
            ..SolverConfig::default()
        };
        solver.validate().map_err(|e| field_error("solver", e.to_string()))?;
        let nu = 0.5 * kernel.second_moment() + solver.epsilon;
        let grid = match (self.grid.left, self.grid.right) {
            (Some(a), Some(b)) => Grid1D::with_spacing(a, b, self.grid.h),
            _ => Grid1D::fan_rule_with_diffusivity(riemann, solver.t_end, self.grid.h, nu),
        }
        .map_err(|e| field_error("grid", e.to_string()))?;
        Ok(Setup { kernel, riemann, profile, grid, solver })
    }
}

/// Sets `a.b.c = value` in the tree. The value is read as a TOML value
/// (number, bool, array, inline table, quoted string) and falls back to a
/// bare string.
pub fn apply_override(tree: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| field_error(assignment, "override must look like section.key=value"))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(field_error(key, "override key must be a dotted path"));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => serde_json::to_value(t.remove("v").expect("key v was just parsed"))
            .map_err(|e| field_error(key, e.to_string()))?,
        Err(_) => Value::String(raw.to_string()),
    };
    let mut node = tree;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        let obj = node.as_object_mut().ok_or_else(|| field_error(key, format!("`{part}` is not a section")))?;
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    let obj = node.as_object_mut().ok_or_else(|| field_error(key, "parent is not a section"))?;
    obj.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}
