//! Run configuration: JSON schema, presets and resolution into problem data.

use std::fmt;
use std::path::{Path, PathBuf};

use gradreg::funcspace::{presets, FunctionSpec};
use gradreg::solver::{DomainSpec, SweepParameter};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// A configuration problem detected before any computation.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub const DEFAULT_P: f64 = 2.0;
pub const DEFAULT_L: f64 = -1.0;
pub const DEFAULT_LAMBDA: f64 = 50.0;
pub const DEFAULT_RESOLUTION: usize = 512;
pub const DEFAULT_RHO_RESOLUTION: usize = 512;
pub const DEFAULT_OUTPUT_DIR: &str = "out";

/// Name of the `f` value that selects the linear eigenvalue problem.
pub const LINEAR: &str = "linear";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainConfig {
    Interval { length: f64 },
    Ball { radius: f64 },
}

impl Default for DomainConfig {
    fn default() -> Self {
        DomainConfig::Interval { length: 1.0 }
    }
}

/// A scalar or an evenly spaced range `lo..=hi` with `count` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamSpec {
    Value(f64),
    Range { lo: f64, hi: f64, count: usize },
}

impl ParamSpec {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            ParamSpec::Value(v) => vec![v],
            ParamSpec::Range { lo, count: 1, .. } => vec![lo],
            ParamSpec::Range { lo, hi, count } => (0..count)
                .map(|i| if i + 1 == count { hi } else { lo + (hi - lo) * i as f64 / (count - 1) as f64 })
                .collect(),
        }
    }

    fn scalar(&self) -> Option<f64> {
        match *self {
            ParamSpec::Value(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub transform: f64,
    #[serde(rename = "critical_L")]
    pub critical_l: f64,
    #[serde(rename = "critical_L_lo")]
    pub critical_l_lo: f64,
    #[serde(rename = "critical_L_hi")]
    pub critical_l_hi: f64,
    /// Width of the window below `beta` for the flat-core check; defaults to
    /// `(beta - alpha) / 2`.
    pub flatcore_window: Option<f64>,
    pub residual: f64,
    pub area_identity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            transform: 1e-10,
            critical_l: 1e-6,
            critical_l_lo: -10.0,
            critical_l_hi: 10.0,
            flatcore_window: None,
            residual: 1e-4,
            area_identity: 5e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(rename = "N", default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub domain: DomainConfig,
    pub f: String,
    #[serde(default = "default_g")]
    pub g: String,
    #[serde(default)]
    pub a: Option<String>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(rename = "L", default = "default_l")]
    pub l: ParamSpec,
    #[serde(default = "default_lambda")]
    pub lambda: ParamSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Rows of the transform table and points of the `H` profile.
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Uniform levels of the time-map curve.
    #[serde(default = "default_rho_resolution")]
    pub rho_resolution: usize,
    #[serde(default)]
    pub vary: Option<SweepParameter>,
    #[serde(default)]
    pub grid: Option<Vec<f64>>,
    #[serde(default)]
    pub gamma1: Option<f64>,
    #[serde(default)]
    pub gamma2: Option<f64>,
    #[serde(rename = "L_sequence", default)]
    pub l_sequence: Option<Vec<f64>>,
}

fn default_p() -> f64 {
    DEFAULT_P
}
fn default_n() -> usize {
    1
}
fn default_g() -> String {
    "g_one".into()
}
fn default_l() -> ParamSpec {
    ParamSpec::Value(DEFAULT_L)
}
fn default_lambda() -> ParamSpec {
    ParamSpec::Value(DEFAULT_LAMBDA)
}
fn default_resolution() -> usize {
    DEFAULT_RESOLUTION
}
fn default_rho_resolution() -> usize {
    DEFAULT_RHO_RESOLUTION
}

/// Names accepted by `--preset`.
pub const PRESETS: [&str; 5] = ["f_pos", "f_sign", "f_sqrt", "linear", "schrodinger"];

/// Base configuration of a named preset.
pub fn preset(name: &str) -> anyhow::Result<Value> {
    let v = match name {
        "f_pos" | "f_sign" | "f_sqrt" => serde_json::json!({ "f": name, "g": "g_one", "p": 2.0 }),
        "linear" => serde_json::json!({ "f": LINEAR, "p": 2.0 }),
        "schrodinger" => {
            let (a, g) = presets::a_schrod(2.0, 2.0, 2.0);
            serde_json::json!({ "f": "f_sign", "g": g.source(), "a": a.source(), "p": 2.0, "L": 1.0 })
        }
        other => return Err(usage(format!("unknown preset `{other}`; expected one of {}", PRESETS.join(", ")))),
    };
    Ok(v)
}

/// Merge the preset (if any) with the config file (if any) and apply the
/// command-line seed; keys from the file override the preset.
pub fn load(preset_name: Option<&str>, path: Option<&Path>, seed: Option<u64>) -> anyhow::Result<RunConfig> {
    let mut merged = Map::new();
    if let Some(name) = preset_name {
        if let Value::Object(m) = preset(name)? {
            merged.extend(m);
        }
    }
    if let Some(path) = path {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text).map_err(|e| usage(format!("config {} is not valid JSON: {e}", path.display())))?;
        match value {
            Value::Object(m) => merged.extend(m),
            _ => return Err(usage("config must be a JSON object")),
        }
    }
    if preset_name.is_none() && path.is_none() {
        return Err(usage("either --config or --preset is required"));
    }
    if let Some(seed) = seed {
        merged.insert("seed".into(), seed.into());
    }
    let cfg: RunConfig = serde_json::from_value(Value::Object(merged)).map_err(|e| usage(format!("invalid config: {e}")))?;
    Ok(cfg)
}

/// Validated problem data.
#[derive(Debug, Clone)]
pub struct Problem {
    /// `None` for the linear eigenvalue problem.
    pub f: Option<FunctionSpec>,
    pub g: FunctionSpec,
    pub a: Option<FunctionSpec>,
    pub p: f64,
    pub alpha: f64,
    pub beta: f64,
    pub domain: DomainSpec,
}

impl RunConfig {
    /// Check the schema-level constraints, parse the functions and fill in
    /// `alpha`, `beta` from presets.
    pub fn resolve(&mut self) -> anyhow::Result<Problem> {
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(usage(format!("p must be a finite number above 1, got {}", self.p)));
        }
        if self.resolution < 2 || self.rho_resolution < 8 {
            return Err(usage("resolution must be at least 2 and rho_resolution at least 8"));
        }
        for (name, spec) in [("L", &self.l), ("lambda", &self.lambda)] {
            if let ParamSpec::Range { lo, hi, count } = *spec {
                if count == 0 || !lo.is_finite() || !hi.is_finite() {
                    return Err(usage(format!("{name} range needs finite ends and count >= 1")));
                }
            }
        }
        let domain = match self.domain {
            DomainConfig::Interval { length } => {
                if self.n != 1 {
                    return Err(usage(format!("an interval domain needs N = 1, got {}", self.n)));
                }
                DomainSpec::interval(length)
            }
            DomainConfig::Ball { radius } => DomainSpec::ball(radius, self.n),
        }
        .map_err(|e| usage(e.to_string()))?;

        let f = if self.f == LINEAR {
            self.alpha.get_or_insert(0.0);
            self.beta.get_or_insert(1.0);
            None
        } else if presets::NAMES.contains(&self.f.as_str()) {
            let spec = presets::by_name(&self.f, 2.0).map_err(|e| usage(e.to_string()))?;
            let (pa, pb) = (spec.alpha(), spec.beta());
            let (Some(pa), Some(pb)) = (pa, pb) else {
                return Err(usage(format!("preset `{}` is not a nonlinearity", self.f)));
            };
            if self.alpha.is_some_and(|a| a != pa) || self.beta.is_some_and(|b| b != pb) {
                return Err(usage(format!("preset `{}` has zeros alpha = {pa}, beta = {pb}", self.f)));
            }
            self.alpha = Some(pa);
            self.beta = Some(pb);
            Some(spec)
        } else {
            let (Some(alpha), Some(beta)) = (self.alpha, self.beta) else {
                return Err(usage("an expression for f needs alpha and beta"));
            };
            Some(FunctionSpec::nonlinearity(&self.f, alpha, beta).map_err(|e| usage(format!("f: {e}")))?)
        };
        let (alpha, beta) = (self.alpha.unwrap(), self.beta.unwrap());
        let window = *self.tolerances.flatcore_window.get_or_insert(0.5 * (beta - alpha));
        if !(window > 0.0 && window <= beta) {
            return Err(usage(format!("flatcore_window must lie in (0, beta], got {window}")));
        }
        let g = if presets::NAMES.contains(&self.g.as_str()) && self.g.starts_with("g_") {
            presets::by_name(&self.g, beta)
        } else {
            FunctionSpec::weight(&self.g, beta)
        }
        .map_err(|e| usage(format!("g: {e}")))?;
        let a = match &self.a {
            None => None,
            Some(text) if text == "a_schrod" => Some(presets::by_name(text, beta).map_err(|e| usage(e.to_string()))?),
            Some(text) => Some(FunctionSpec::diffusion(text, beta).map_err(|e| usage(format!("a: {e}")))?),
        };
        if let Some(grid) = &self.grid {
            if grid.iter().any(|v| !v.is_finite()) {
                return Err(usage("grid values must be finite"));
            }
        }
        Ok(Problem {
            f,
            g,
            a,
            p: self.p,
            alpha,
            beta,
            domain,
        })
    }

    pub fn scalar_l(&self) -> anyhow::Result<f64> {
        self.l.scalar().ok_or_else(|| usage("this command needs a single value of L"))
    }

    pub fn scalar_lambda(&self) -> anyhow::Result<f64> {
        self.lambda.scalar().ok_or_else(|| usage("this command needs a single value of lambda"))
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
    }
}

impl Problem {
    /// The nonlinearity, or a usage error for the linear problem.
    pub fn nonlinearity(&self, command: &str) -> anyhow::Result<&FunctionSpec> {
        self.f
            .as_ref()
            .ok_or_else(|| usage(format!("`{command}` needs a nonlinearity; the linear problem is only solvable with `solve`")))
    }
}
