use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid domain: {0}")]
pub struct DomainError(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Interval,
    Ball,
}

/// An interval `(0, size)` or a ball of radius `size` in dimension `dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub size: f64,
    pub dim: usize,
}

impl DomainSpec {
    pub fn interval(length: f64) -> Result<Self, DomainError> {
        Self::new(DomainKind::Interval, length, 1)
    }

    pub fn ball(radius: f64, dim: usize) -> Result<Self, DomainError> {
        Self::new(DomainKind::Ball, radius, dim)
    }

    pub fn new(kind: DomainKind, size: f64, dim: usize) -> Result<Self, DomainError> {
        if !(size > 0.0 && size.is_finite()) {
            return Err(DomainError(format!("size must be positive, got {size}")));
        }
        match kind {
            DomainKind::Interval if dim != 1 => {
                Err(DomainError(format!("an interval has dimension 1, got {dim}")))
            }
            DomainKind::Ball if dim < 2 => {
                Err(DomainError(format!("a ball needs dimension >= 2, got {dim}")))
            }
            _ => Ok(Self { kind, size, dim }),
        }
    }
}

/// Which unknown a profile holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    /// The solution `u` of the original equation.
    Original,
    /// `v = Psi(u)`.
    Transformed,
}

/// A sampled solution on `x` (interval coordinate or radius).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionProfile {
    pub domain: DomainSpec,
    pub variable: Variable,
    pub x: Vec<f64>,
    pub values: Vec<f64>,
    pub sup_norm: f64,
    pub lambda: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub p: f64,
    /// Max-norm of the normalized pointwise residual of the original
    /// equation; NaN when not computed.
    pub residual_norm: f64,
    pub residual_threshold: f64,
    pub branch_id: usize,
    /// The branch came from a double root of `lambda(rho) = lambda`.
    pub tangency: bool,
}

impl SolutionProfile {
    /// A profile with the given samples and no residual information.
    pub fn new(domain: DomainSpec, variable: Variable, x: Vec<f64>, values: Vec<f64>, lambda: f64, l: f64, p: f64) -> Self {
        let sup_norm = values.iter().copied().fold(0.0, f64::max);
        Self {
            domain,
            variable,
            x,
            values,
            sup_norm,
            lambda,
            l,
            p,
            residual_norm: f64::NAN,
            residual_threshold: f64::NAN,
            branch_id: 0,
            tangency: false,
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn residual_ok(&self) -> bool {
        self.residual_norm <= self.residual_threshold
    }
}
