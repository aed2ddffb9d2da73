//! Scalar functions `f`, `g`, `a`: parsing, validation and antiderivatives.

pub mod antiderivative;
pub mod expr;
pub mod spec;

pub use antiderivative::Antiderivative;
pub use expr::{parse_expression, EvalError, Expr, ParseError};
pub use spec::{
    presets, validate_spec, Extension, FunctionKind, FunctionSpec, SpecError, ValidationCheck,
    ValidationOptions, ValidationReport,
};
