//! The change of variables `v = Psi_L(u)` that removes the gradient term,
//! and the transformed nonlinearity of the resulting semilinear problem.

mod coefficients;
mod nonlinearity;
mod table;

use thiserror::Error;

use crate::numerics::cheb::ChebError;

pub use coefficients::Coefficients;
pub use nonlinearity::{transformed_nonlinearity, AreaWeight, NonlinearityRow, TransformedNonlinearity};
pub use table::{build_psi, pullback_solution, pushforward_solution, TransformRow, TransformTable};

/// Largest exponent accepted before a plain `exp` is considered overflowing.
pub const MAX_EXPONENT: f64 = 700.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("exponent {exponent:.1} overflows at s = {s}")]
    Overflow { s: f64, exponent: f64 },
    #[error("tabulation failed: {0}")]
    Table(#[from] ChebError),
    #[error("value {value} outside [{lo}, {hi}]")]
    OutOfRange { value: f64, lo: f64, hi: f64 },
}
