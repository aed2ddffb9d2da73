use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::expr::{parse_expression, EvalError, Expr, ParseError};

/// Role a scalar function plays in the problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionKind {
    /// The reaction term `f`.
    Nonlinearity,
    /// The gradient coefficient `g`.
    Weight,
    /// The diffusion coefficient `a`.
    Diffusion,
}

/// How arguments outside the domain are mapped before evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extension {
    /// Evaluate at the nearest point of the domain.
    #[default]
    Clamp,
    /// `(1 + s) h(lo)` on `[lo - 1, lo)`, zero further left; a nonlinearity is
    /// zero beyond `hi`, other kinds are clamped there.
    Taper,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid zeros: need 0 < alpha < beta, got alpha = {alpha}, beta = {beta}")]
    Zeros { alpha: f64, beta: f64 },
    #[error("invalid domain [{lo}, {hi}]")]
    Domain { lo: f64, hi: f64 },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

/// A parsed scalar function with its role and domain.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionSpec {
    source: String,
    ast: Expr,
    kind: FunctionKind,
    alpha: Option<f64>,
    beta: Option<f64>,
    domain: (f64, f64),
    positive: bool,
    extension: Extension,
}

impl FunctionSpec {
    /// Reaction term with consecutive zeros `alpha < beta`, domain `[0, beta]`.
    pub fn nonlinearity(text: &str, alpha: f64, beta: f64) -> Result<Self, SpecError> {
        if !(alpha > 0.0 && beta > alpha && beta.is_finite()) {
            return Err(SpecError::Zeros { alpha, beta });
        }
        Ok(Self {
            source: text.to_string(),
            ast: parse_expression(text)?,
            kind: FunctionKind::Nonlinearity,
            alpha: Some(alpha),
            beta: Some(beta),
            domain: (0.0, beta),
            positive: false,
            extension: Extension::Clamp,
        })
    }

    /// Gradient coefficient on `[0, hi]`, declared nonnegative.
    pub fn weight(text: &str, hi: f64) -> Result<Self, SpecError> {
        Self::coefficient(text, hi, FunctionKind::Weight)
    }

    /// Diffusion coefficient on `[0, hi]`; must be positive.
    pub fn diffusion(text: &str, hi: f64) -> Result<Self, SpecError> {
        Self::coefficient(text, hi, FunctionKind::Diffusion)
    }

    fn coefficient(text: &str, hi: f64, kind: FunctionKind) -> Result<Self, SpecError> {
        if !(hi > 0.0 && hi.is_finite()) {
            return Err(SpecError::Domain { lo: 0.0, hi });
        }
        Ok(Self {
            source: text.to_string(),
            ast: parse_expression(text)?,
            kind,
            alpha: None,
            beta: None,
            domain: (0.0, hi),
            positive: true,
            extension: Extension::Clamp,
        })
    }

    /// Drop the positivity declaration of a weight (sign-changing `g`).
    pub fn with_sign_unconstrained(mut self) -> Self {
        self.positive = false;
        self
    }

    pub fn with_extension(mut self, extension: Extension) -> Self {
        self.extension = extension;
        self
    }

    /// Multiply by a constant, keeping metadata.
    pub fn scaled(&self, c: f64) -> Self {
        let ast = Expr::Binary(
            super::expr::BinOp::Mul,
            Box::new(Expr::Const(c)),
            Box::new(self.ast.clone()),
        );
        Self {
            source: ast.to_string(),
            ast,
            ..self.clone()
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Expr {
        &self.ast
    }

    pub fn kind(&self) -> FunctionKind {
        self.kind
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn beta(&self) -> Option<f64> {
        self.beta
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn declared_positive(&self) -> bool {
        self.positive
    }

    /// Evaluate with the configured out-of-domain extension.
    pub fn eval(&self, s: f64) -> Result<f64, EvalError> {
        let (lo, hi) = self.domain;
        match self.extension {
            Extension::Clamp => self.ast.eval(s.clamp(lo, hi)),
            Extension::Taper => {
                if s < lo {
                    let w = (1.0 + (s - lo)).max(0.0);
                    Ok(w * self.ast.eval(lo)?)
                } else if s > hi {
                    match self.kind {
                        FunctionKind::Nonlinearity => Ok(0.0),
                        _ => self.ast.eval(hi),
                    }
                } else {
                    self.ast.eval(s)
                }
            }
        }
    }

    /// Evaluate, mapping evaluation errors to NaN for numeric kernels that
    /// check finiteness themselves.
    pub fn value(&self, s: f64) -> f64 {
        self.eval(s).unwrap_or(f64::NAN)
    }
}

/// Builtin functions, by name.
pub mod presets {
    use super::{FunctionSpec, SpecError};

    pub const F_SIGN: &str = "s*(s-1)*(2-s)";
    pub const F_POS: &str = "max(0, (s-1)*(2-s))";
    pub const F_SQRT: &str = "piecewise(s > 1, sqrt(abs(2-s)), 0)";
    pub const G_ONE: &str = "1";
    pub const G_LIN: &str = "s + 1";
    pub const G_ZERO: &str = "0";

    /// Names accepted by [`by_name`].
    pub const NAMES: [&str; 7] = ["f_sign", "f_pos", "f_sqrt", "g_one", "g_lin", "g_zero", "a_schrod"];

    /// `s(s-1)(2-s)` with zeros 1 and 2; negative on (0, 1).
    pub fn f_sign() -> FunctionSpec {
        FunctionSpec::nonlinearity(F_SIGN, 1.0, 2.0).unwrap()
    }

    /// `max(0, (s-1)(2-s))`, nonnegative with zeros 1 and 2.
    pub fn f_pos() -> FunctionSpec {
        FunctionSpec::nonlinearity(F_POS, 1.0, 2.0).unwrap()
    }

    /// `sqrt(2-s)` on (1, 2), zero elsewhere.
    pub fn f_sqrt() -> FunctionSpec {
        FunctionSpec::nonlinearity(F_SQRT, 1.0, 2.0).unwrap()
    }

    pub fn g_one(beta: f64) -> FunctionSpec {
        FunctionSpec::weight(G_ONE, beta).unwrap()
    }

    pub fn g_lin(beta: f64) -> FunctionSpec {
        FunctionSpec::weight(G_LIN, beta).unwrap()
    }

    pub fn g_zero(beta: f64) -> FunctionSpec {
        FunctionSpec::weight(G_ZERO, beta).unwrap()
    }

    /// `a(s) = 1 + (kappa^p / 2)|s|^{p(kappa-1)}` and its companion
    /// `g = a'/p` on `s >= 0`.
    pub fn a_schrod(kappa: f64, p: f64, beta: f64) -> (FunctionSpec, FunctionSpec) {
        let c = kappa.powf(p) / 2.0;
        let e = p * (kappa - 1.0);
        let a = format!("1 + {c:?}*abs(s)^{e:?}");
        let g = format!("{:?}*abs(s)^{:?}", c * (kappa - 1.0), e - 1.0);
        (
            FunctionSpec::diffusion(&a, beta).unwrap(),
            FunctionSpec::weight(&g, beta).unwrap(),
        )
    }

    /// Look up a nonlinearity or weight preset; `beta` sets the domain of weights.
    pub fn by_name(name: &str, beta: f64) -> Result<FunctionSpec, SpecError> {
        Ok(match name {
            "f_sign" => f_sign(),
            "f_pos" => f_pos(),
            "f_sqrt" => f_sqrt(),
            "g_one" => g_one(beta),
            "g_lin" => g_lin(beta),
            "g_zero" => g_zero(beta),
            "a_schrod" => a_schrod(2.0, 2.0, beta).0,
            other => return Err(SpecError::UnknownPreset(other.to_string())),
        })
    }
}

/// Options for [`validate_spec`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidationOptions {
    pub grid_size: usize,
    pub tol_zero: f64,
    /// Additionally require `f(0) >= 0` for a nonlinearity.
    pub require_nonnegative_at_zero: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            grid_size: 512,
            tol_zero: 1e-9,
            require_nonnegative_at_zero: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationCheck {
    pub name: String,
    pub passed: bool,
    /// Sample point with the worst value for this check.
    pub worst_s: Option<f64>,
    pub worst_value: Option<f64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub kind: FunctionKind,
    pub source: String,
    pub passed: bool,
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&ValidationCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn point_check(name: &str, s: f64, value: Result<f64, EvalError>, ok: impl Fn(f64) -> bool, what: &str) -> ValidationCheck {
    match value {
        Ok(v) => ValidationCheck {
            name: name.into(),
            passed: ok(v),
            worst_s: Some(s),
            worst_value: Some(v),
            message: format!("{what}; value {v:e} at s = {s}"),
        },
        Err(e) => ValidationCheck {
            name: name.into(),
            passed: false,
            worst_s: Some(s),
            worst_value: None,
            message: e.to_string(),
        },
    }
}

// Minimum of `h` over `samples`, or the first evaluation failure.
fn grid_check(
    name: &str,
    spec: &FunctionSpec,
    samples: impl Iterator<Item = f64>,
    ok: impl Fn(f64) -> bool,
    what: &str,
) -> ValidationCheck {
    let mut worst: Option<(f64, f64)> = None;
    for s in samples {
        match spec.eval(s) {
            Ok(v) => {
                if worst.map_or(true, |(_, w)| v < w) {
                    worst = Some((s, v));
                }
            }
            Err(e) => {
                return ValidationCheck {
                    name: name.into(),
                    passed: false,
                    worst_s: Some(s),
                    worst_value: None,
                    message: e.to_string(),
                }
            }
        }
    }
    match worst {
        Some((s, v)) => ValidationCheck {
            name: name.into(),
            passed: ok(v),
            worst_s: Some(s),
            worst_value: Some(v),
            message: format!("{what}; minimum {v:e} at s = {s}"),
        },
        None => ValidationCheck {
            name: name.into(),
            passed: true,
            worst_s: None,
            worst_value: None,
            message: "no samples".into(),
        },
    }
}

fn uniform(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

/// Check the structural assumptions on a function. Failures are report
/// entries; `grid_size` is raised to at least 16.
pub fn validate_spec(spec: &FunctionSpec, opts: &ValidationOptions) -> ValidationReport {
    let n = opts.grid_size.max(16);
    let (lo, hi) = spec.domain();
    let mut checks = Vec::new();
    checks.push(grid_check(
        "finite_on_domain",
        spec,
        uniform(lo, hi, n),
        |_| true,
        "all samples finite",
    ));
    match spec.kind() {
        FunctionKind::Nonlinearity => {
            let alpha = spec.alpha().unwrap();
            let beta = spec.beta().unwrap();
            let tol = opts.tol_zero;
            checks.push(point_check("zero_at_alpha", alpha, spec.eval(alpha), |v| v.abs() <= tol, "|f(alpha)| <= tol_zero"));
            checks.push(point_check("zero_at_beta", beta, spec.eval(beta), |v| v.abs() <= tol, "|f(beta)| <= tol_zero"));
            let interior = (1..=n).map(move |i| alpha + (beta - alpha) * i as f64 / (n + 1) as f64);
            checks.push(grid_check(
                "positive_between_zeros",
                spec,
                interior,
                |v| v > 0.0,
                "f > 0 on (alpha, beta)",
            ));
            if opts.require_nonnegative_at_zero {
                checks.push(point_check("nonnegative_at_zero", 0.0, spec.eval(0.0), |v| v >= 0.0, "f(0) >= 0"));
            }
        }
        FunctionKind::Weight => {
            if spec.declared_positive() {
                checks.push(grid_check("nonnegative", spec, uniform(lo, hi, n), |v| v >= 0.0, "g >= 0"));
            }
        }
        FunctionKind::Diffusion => {
            checks.push(grid_check("positive", spec, uniform(lo, hi, n), |v| v > 0.0, "a > 0"));
        }
    }
    ValidationReport {
        kind: spec.kind(),
        source: spec.source().to_string(),
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_passes() {
        let opts = ValidationOptions {
            require_nonnegative_at_zero: true,
            ..Default::default()
        };
        let report = validate_spec(&presets::f_sign(), &opts);
        assert!(report.passed, "{report:?}");
        // Independent spot check of the minimum over the interior grid.
        let n = 512;
        let min = (1..=n)
            .map(|i| 1.0 + i as f64 / (n + 1) as f64)
            .map(|s| s * (s - 1.0) * (2.0 - s))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(report.check("positive_between_zeros").unwrap().worst_value, Some(min));
    }

    #[test]
    fn negative_at_zero_is_reported() {
        let f = FunctionSpec::nonlinearity("(s-1)*(2-s)", 1.0, 2.0).unwrap();
        let opts = ValidationOptions {
            require_nonnegative_at_zero: true,
            ..Default::default()
        };
        let report = validate_spec(&f, &opts);
        assert!(!report.passed);
        let c = report.check("nonnegative_at_zero").unwrap();
        assert!(!c.passed);
        assert_eq!(c.worst_value, Some((0.0 - 1.0) * (2.0 - 0.0)));
        assert!(report.check("positive_between_zeros").unwrap().passed);
    }

    #[test]
    fn constant_weight_and_schrodinger_coefficient() {
        assert!(validate_spec(&presets::g_one(2.0), &Default::default()).passed);
        let (a, g) = presets::a_schrod(2.0, 2.0, 2.0);
        assert!(validate_spec(&a, &Default::default()).passed);
        assert!(validate_spec(&g, &Default::default()).passed);
        assert_eq!(a.value(1.5), 1.0 + 2.0 * 2.25);
        assert_eq!(g.value(1.5), 3.0);
        let bad = FunctionSpec::diffusion("s - 1", 2.0).unwrap();
        let r = validate_spec(&bad, &Default::default());
        assert!(!r.passed);
        assert_eq!(r.check("positive").unwrap().worst_s, Some(0.0));
    }

    #[test]
    fn evaluation_is_clamped_or_tapered() {
        let f = presets::f_sign();
        assert_eq!(f.value(3.0), 0.0);
        assert_eq!(f.value(-1.0), 0.0);
        let f = FunctionSpec::nonlinearity("s - 3", 1.0, 2.0)
            .unwrap()
            .with_extension(Extension::Taper);
        assert_eq!(f.value(-0.5), -1.5);
        assert_eq!(f.value(-2.0), 0.0);
        assert_eq!(f.value(2.5), 0.0);
    }

    #[test]
    fn rejects_bad_metadata() {
        assert!(matches!(
            FunctionSpec::nonlinearity("s", 2.0, 1.0),
            Err(SpecError::Zeros { .. })
        ));
        assert!(matches!(presets::by_name("nope", 2.0), Err(SpecError::UnknownPreset(_))));
        for name in presets::NAMES {
            assert!(presets::by_name(name, 2.0).is_ok());
        }
    }

    #[test]
    fn presets_round_trip_exactly() {
        let (a, g) = presets::a_schrod(2.0, 2.0, 2.0);
        let all = [presets::f_sign(), presets::f_pos(), presets::f_sqrt(), presets::g_lin(2.0), a, g];
        for spec in all {
            let again = parse_expression(&spec.ast().to_string()).unwrap();
            assert_eq!(&again, spec.ast());
            for i in 0..1000 {
                let s = 2.0 * i as f64 / 999.0;
                assert_eq!(again.eval(s), spec.ast().eval(s));
            }
        }
    }
}
