use crate::funcspace::FunctionSpec;
use crate::transform::{build_psi, TransformTable, TransformedNonlinearity};

use super::SolverError;

/// A semilinear problem `-(|v'|^{p-2} v')' = lambda f~(v)` written in the
/// level coordinate `s` with `v = Psi(s)`, together with the terms of the
/// original equation `-(a(u)|u'|^{p-2}u')' + L g(u)|u'|^p = lambda f(u)`
/// used for residual checks.
pub trait ReducedProblem: Sync {
    fn p(&self) -> f64;
    fn l(&self) -> f64;
    /// Lower end of the levels of interest (the first zero of `f`).
    fn alpha(&self) -> f64;
    /// Upper end of the level range.
    fn s_max(&self) -> f64;
    /// Whether `f~` vanishes at `s_max`.
    fn degenerate_top(&self) -> bool;
    fn psi(&self, s: f64) -> f64;
    fn dpsi(&self, s: f64) -> f64;
    /// `f~(Psi(s))`.
    fn ftilde_at(&self, s: f64) -> f64;
    /// `f~(Psi(s)) Psi'(s)`.
    fn w(&self, s: f64) -> f64;
    /// `F~(Psi(s2)) - F~(Psi(s1))`.
    fn gap(&self, s1: f64, s2: f64) -> f64;
    fn a_of(&self, u: f64) -> f64;
    fn g_of(&self, u: f64) -> f64;
    fn f_of(&self, u: f64) -> f64;
}

impl ReducedProblem for TransformedNonlinearity {
    fn p(&self) -> f64 {
        self.table().p()
    }

    fn l(&self) -> f64 {
        self.table().l()
    }

    fn alpha(&self) -> f64 {
        TransformedNonlinearity::alpha(self)
    }

    fn s_max(&self) -> f64 {
        self.beta()
    }

    fn degenerate_top(&self) -> bool {
        true
    }

    fn psi(&self, s: f64) -> f64 {
        self.table().psi(s)
    }

    fn dpsi(&self, s: f64) -> f64 {
        self.table().dpsi(s)
    }

    fn ftilde_at(&self, s: f64) -> f64 {
        TransformedNonlinearity::ftilde_at(self, s)
    }

    fn w(&self, s: f64) -> f64 {
        TransformedNonlinearity::w(self, s)
    }

    fn gap(&self, s1: f64, s2: f64) -> f64 {
        TransformedNonlinearity::gap(self, s1, s2)
    }

    fn a_of(&self, u: f64) -> f64 {
        self.table().coefficients().a().map_or(1.0, |a| a.value(u))
    }

    fn g_of(&self, u: f64) -> f64 {
        self.table().coefficients().g().value(u)
    }

    fn f_of(&self, u: f64) -> f64 {
        self.f().value(u)
    }
}

/// `f~(v) = v` with `Psi` the identity: the principal eigenvalue problem of
/// the one-dimensional or radial `p`-Laplacian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearOracle {
    pub p: f64,
    pub s_max: f64,
}

impl LinearOracle {
    pub fn new(p: f64) -> Self {
        Self { p, s_max: 1.0 }
    }
}

impl ReducedProblem for LinearOracle {
    fn p(&self) -> f64 {
        self.p
    }

    fn l(&self) -> f64 {
        0.0
    }

    fn alpha(&self) -> f64 {
        0.0
    }

    fn s_max(&self) -> f64 {
        self.s_max
    }

    fn degenerate_top(&self) -> bool {
        false
    }

    fn psi(&self, s: f64) -> f64 {
        s
    }

    fn dpsi(&self, _s: f64) -> f64 {
        1.0
    }

    fn ftilde_at(&self, s: f64) -> f64 {
        s
    }

    fn w(&self, s: f64) -> f64 {
        s
    }

    fn gap(&self, s1: f64, s2: f64) -> f64 {
        0.5 * (s2 - s1) * (s2 + s1)
    }

    fn a_of(&self, _u: f64) -> f64 {
        1.0
    }

    fn g_of(&self, _u: f64) -> f64 {
        0.0
    }

    fn f_of(&self, u: f64) -> f64 {
        u
    }
}

/// Default transform tolerance.
pub const TRANSFORM_TOL: f64 = 1e-10;

/// The reduced problem of `(f, g, a, p, L)`.
pub fn reduce(f: &FunctionSpec, g: &FunctionSpec, a: Option<&FunctionSpec>, p: f64, l: f64) -> Result<TransformedNonlinearity, SolverError> {
    let beta = f
        .beta()
        .ok_or_else(|| SolverError::Parameter("f must be a nonlinearity with zeros".into()))?;
    let table: TransformTable = build_psi(g, a, p, l, beta, TRANSFORM_TOL)?;
    Ok(TransformedNonlinearity::new(f, &table)?)
}
