//! TOML scenario files.
//!
//! ```toml
//! name = "fig2_m3_chi10"
//! t_end = 10.0
//! output_times = [0.95, 1.2, 1.95, 9.95]
//!
//! [grid]
//! nx = 128
//! ny = 128            # bounds default to (-3, 3)^2
//!
//! [model]
//! m = 3.0
//! chi = 10.0          # eps, b1, b2, regularized_reaction, allow_degenerate optional
//!
//! [initial]
//! kind = "gaussian"   # or "uniform", "steady_state", "files"
//! sigma = 0.25
//!
//! [control]           # optional, any StepControl field
//! dt_max = 0.01
//! ```
//!
//! Unknown keys are rejected. Relative snapshot paths in `[initial]` are
//! resolved against the directory of the scenario file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::integrator::{validate_output_times, StepControl};
use crate::model::{gaussian_ic, homogeneous_steady_state, ModelParams, SimState, SourceTerm, DEFAULT_EPS};

use super::snapshot::read_snapshot_on;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub t_end: f64,
    #[serde(default)]
    pub output_times: Vec<f64>,
    pub grid: GridSpec,
    pub model: ModelSpec,
    pub initial: InitialSpec,
    #[serde(default)]
    pub control: StepControl,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    /// Directory used to resolve relative paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "neg_three")]
    pub x_min: f64,
    #[serde(default = "three")]
    pub x_max: f64,
    #[serde(default = "neg_three")]
    pub y_min: f64,
    #[serde(default = "three")]
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub m: f64,
    pub chi: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "one")]
    pub b1: f64,
    #[serde(default = "one")]
    pub b2: f64,
    #[serde(default)]
    pub regularized_reaction: bool,
    #[serde(default)]
    pub allow_degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// `u0 = v0 = (2 pi sigma^2)^(-1/2) exp(-|x|^2 / (2 sigma^2))`.
    Gaussian {
        sigma: f64,
    },
    Uniform {
        u: f64,
        v: f64,
    },
    /// The homogeneous equilibrium of the model.
    SteadyState,
    /// `CWF1` snapshots on the scenario grid.
    Files {
        u_path: PathBuf,
        v_path: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSpec {
    /// Factor of the last-quarter versus middle-half plateau test.
    pub plateau_factor: f64,
}

impl Default for DiagnosticsSpec {
    fn default() -> Self {
        Self { plateau_factor: 1.05 }
    }
}

fn neg_three() -> f64 {
    -3.0
}
fn three() -> f64 {
    3.0
}
fn one() -> f64 {
    1.0
}
fn default_eps() -> f64 {
    DEFAULT_EPS
}

impl Scenario {
    pub fn grid(&self) -> Result<Grid> {
        let g = &self.grid;
        Grid::new(g.x_min, g.x_max, g.y_min, g.y_max, g.nx, g.ny)
    }

    pub fn params(&self) -> Result<ModelParams> {
        let m = &self.model;
        let p = ModelParams {
            m: m.m,
            chi: m.chi,
            eps: m.eps,
            b1: SourceTerm::Constant(m.b1),
            b2: SourceTerm::Constant(m.b2),
            regularized_reaction: m.regularized_reaction,
            allow_degenerate: m.allow_degenerate,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn initial_state(&self) -> Result<SimState> {
        let grid = self.grid()?;
        match &self.initial {
            InitialSpec::Gaussian { sigma } => {
                let u = gaussian_ic(&grid, *sigma)?;
                SimState::new(u.clone(), u)
            }
            InitialSpec::Uniform { u, v } => SimState::uniform(grid, *u, *v),
            InitialSpec::SteadyState => {
                let (u, v) = homogeneous_steady_state(&self.params()?)?;
                SimState::uniform(grid, u, v)
            }
            InitialSpec::Files { u_path, v_path } => {
                let u = read_snapshot_on(&self.resolve(u_path), &grid)?.field;
                let v = read_snapshot_on(&self.resolve(v_path), &grid)?.field;
                SimState::new(u, v)
            }
        }
    }

    /// Same scenario on a different cell count.
    pub fn with_cells(&self, nx: usize, ny: usize) -> Self {
        let mut s = self.clone();
        s.grid.nx = nx;
        s.grid.ny = ny;
        s
    }

    /// Semantic checks; each error names the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(Error::validation("name", "must not be empty"));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::validation(
                "t_end",
                format!("must be finite and > 0, got {}", self.t_end),
            ));
        }
        validate_output_times(self.t_end, &self.output_times)
            .map_err(|e| Error::validation("output_times", e.to_string()))?;
        self.grid().map_err(|e| Error::validation("grid", e.to_string()))?;
        self.params().map_err(|e| match e {
            Error::InvalidParams { field, reason } => Error::validation(format!("model.{field}"), reason),
            e => Error::validation("model", e.to_string()),
        })?;
        match &self.initial {
            InitialSpec::Gaussian { sigma } if !(*sigma > 0.0) || !sigma.is_finite() => {
                return Err(Error::validation("initial.sigma", format!("must be > 0, got {sigma}")));
            }
            InitialSpec::Uniform { u, v } => {
                if !(*u >= 0.0) || !u.is_finite() {
                    return Err(Error::validation("initial.u", format!("must be >= 0, got {u}")));
                }
                if !(*v > 0.0) || !v.is_finite() {
                    return Err(Error::validation("initial.v", format!("must be > 0, got {v}")));
                }
            }
            InitialSpec::Files { u_path, v_path } => {
                for (field, p) in [("initial.u_path", u_path), ("initial.v_path", v_path)] {
                    if !self.resolve(p).is_file() {
                        return Err(Error::validation(
                            field,
                            format!("{} is not a readable file", p.display()),
                        ));
                    }
                }
            }
            _ => {}
        }
        self.control
            .validate()
            .map_err(|e| Error::validation("control", e.to_string()))?;
        if !(self.diagnostics.plateau_factor >= 1.0) {
            return Err(Error::validation(
                "diagnostics.plateau_factor",
                format!("must be >= 1, got {}", self.diagnostics.plateau_factor),
            ));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes to TOML")
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

fn parse_error(path: &Path, text: &str, e: &toml::de::Error) -> Error {
    let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
    Error::ScenarioParse {
        path: path.to_path_buf(),
        line,
        column,
        message: e.message().to_string(),
    }
}

/// Parses and validates scenario text. `origin` is used for error messages
/// and relative path resolution.
pub fn parse_scenario(text: &str, origin: &Path) -> Result<Scenario> {
    parse_scenario_with_overrides(text, origin, &[])
}

/// Like [`parse_scenario`], with `key.path=value` overrides applied before
/// deserialization. Values are parsed as TOML, falling back to a string.
pub fn parse_scenario_with_overrides(text: &str, origin: &Path, overrides: &[String]) -> Result<Scenario> {
    let mut scenario: Scenario = if overrides.is_empty() {
        toml::from_str(text).map_err(|e| parse_error(origin, text, &e))?
    } else {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| parse_error(origin, text, &e))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Scenario::deserialize(toml::Value::Table(table)).map_err(|e| Error::ScenarioParse {
            path: origin.to_path_buf(),
            line: 0,
            column: 0,
            message: format!("after overrides: {}", e.message()),
        })?
    };
    scenario.base_dir = origin.parent().map(Path::to_path_buf).unwrap_or_default();
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    load_scenario_with_overrides(path, &[])
}

pub fn load_scenario_with_overrides(path: &Path, overrides: &[String]) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario_with_overrides(&text, path, overrides)
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::validation(spec, "override must look like key.path=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::validation(key, "empty key segment in override"));
    }
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut cur = table;
    for p in parents {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::validation(key, format!("`{p}` is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG2: &str = r#"
name = "fig2"
t_end = 10.0
output_times = [0.95, 1.2, 1.95, 9.95]

[grid]
nx = 128
ny = 128

[model]
m = 3.0
chi = 10.0

[initial]
kind = "gaussian"
sigma = 0.25
"#;

    #[test]
    fn parses_with_defaults() {
        let s = parse_scenario(FIG2, Path::new("fig2.toml")).unwrap();
        assert_eq!(s.grid().unwrap(), Grid::square(128).unwrap());
        let p = s.params().unwrap();
        assert_eq!((p.m, p.chi, p.eps), (3.0, 10.0, DEFAULT_EPS));
        assert_eq!(p.b1.as_constant(), Some(1.0));
        assert_eq!(s.control, StepControl::default());
        assert_eq!(s.initial, InitialSpec::Gaussian { sigma: 0.25 });
    }

    #[test]
    fn round_trips_through_toml() {
        let s = parse_scenario(FIG2, Path::new("fig2.toml")).unwrap();
        let back = parse_scenario(&s.to_toml(), Path::new("fig2.toml")).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn syntax_error_has_line_and_column() {
        let bad = FIG2.replace("chi = 10.0", "chi = = 10.0");
        match parse_scenario(&bad, Path::new("bad.toml")) {
            Err(Error::ScenarioParse { line, column, .. }) => {
                assert_eq!(line, 12);
                assert!(column > 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let bad = FIG2.replace("chi = 10.0", "chi = 10.0\nkappa = 1.0");
        assert!(matches!(
            parse_scenario(&bad, Path::new("bad.toml")),
            Err(Error::ScenarioParse { .. })
        ));
    }

    #[test]
    fn validation_names_field() {
        let bad = FIG2.replace("m = 3.0", "m = 0.5");
        match parse_scenario(&bad, Path::new("x.toml")) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "model.m"),
            other => panic!("{other:?}"),
        }
        let bad = FIG2.replace("sigma = 0.25", "sigma = -1.0");
        match parse_scenario(&bad, Path::new("x.toml")) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "initial.sigma"),
            other => panic!("{other:?}"),
        }
        let bad = FIG2.replace("9.95]", "10.5]");
        match parse_scenario(&bad, Path::new("x.toml")) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "output_times"),
            other => panic!("{other:?}"),
        }
        let bad = FIG2.replace(
            "[initial]\nkind = \"gaussian\"\nsigma = 0.25",
            "[initial]\nkind = \"files\"\nu_path = \"nope.cwf\"\nv_path = \"nope.cwf\"",
        );
        match parse_scenario(&bad, Path::new("x.toml")) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "initial.u_path"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides_apply() {
        let ov = vec![
            "grid.nx=64".to_string(),
            "model.chi = 5".to_string(),
            "control.dt_max=1e-3".to_string(),
            "name=other".to_string(),
        ];
        let s = parse_scenario_with_overrides(FIG2, Path::new("a/fig2.toml"), &ov).unwrap();
        assert_eq!(s.grid.nx, 64);
        assert_eq!(s.grid.ny, 128);
        assert_eq!(s.model.chi, 5.0);
        assert_eq!(s.control.dt_max, 1e-3);
        assert_eq!(s.name, "other");
        assert_eq!(s.base_dir, Path::new("a"));
        assert!(parse_scenario_with_overrides(FIG2, Path::new("x"), &["nonsense".into()]).is_err());
    }

    #[test]
    fn steady_state_initial() {
        let text = FIG2.replace("kind = \"gaussian\"\nsigma = 0.25", "kind = \"steady_state\"");
        let s = parse_scenario(&text, Path::new("s.toml")).unwrap();
        let st = s.initial_state().unwrap();
        assert_eq!(st.u.max(), 0.5);
        assert_eq!(st.v.min(), 2.0);
    }
}
