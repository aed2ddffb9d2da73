//! Numerical building blocks shared by every module.

pub mod cheb;
pub mod fd;
pub mod logspace;
pub mod ode;
pub mod quad;
pub mod roots;
