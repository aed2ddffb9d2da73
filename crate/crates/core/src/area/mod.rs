//! The weighted area condition, the profile `H(s, L)` and its extrema, the
//! critical gradient strength, and the flat-core criterion.

mod condition;
mod flatcore;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::funcspace::FunctionSpec;
use crate::numerics::logspace::{weighted_integral, LogScaled};
use crate::numerics::quad::{QuadError, QuadOptions};
use crate::numerics::roots::bisect;
use crate::transform::{AreaWeight, Coefficients, TransformError};

pub use condition::{check_area_condition, find_critical_L, AreaVerdict, ConditionReport, CriticalL};
pub use flatcore::{check_flatcore_criterion, FlatCoreReport, FlatCoreVerdict};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AreaError {
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("area integrand overflows at eta = {eta} (log magnitude {log_magnitude:.1})")]
    Overflow { eta: f64, log_magnitude: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(
        "no sign change of h_min after {expansions} bracket expansions: \
         h_min({lo}) = {margin_lo:e}, h_min({hi}) = {margin_hi:e}"
    )]
    Bracket {
        expansions: usize,
        lo: f64,
        hi: f64,
        margin_lo: f64,
        margin_hi: f64,
    },
}

/// Default number of grid points used for extrema of `H`.
pub const DEFAULT_RESOLUTION: usize = 512;

/// `f`, `g`, optional `a` and `p`: everything the area computations need
/// apart from `L`.
#[derive(Debug, Clone)]
pub struct AreaContext {
    f: FunctionSpec,
    coeffs: Arc<Coefficients>,
    p: f64,
}

impl AreaContext {
    pub fn new(f: &FunctionSpec, g: &FunctionSpec, a: Option<&FunctionSpec>, p: f64) -> Result<Self, AreaError> {
        let beta = f
            .beta()
            .ok_or_else(|| AreaError::Parameter("f must be a nonlinearity with zeros".into()))?;
        if !(p > 1.0 && p.is_finite()) {
            return Err(AreaError::Parameter(format!("p must exceed 1, got {p}")));
        }
        let coeffs = Arc::new(Coefficients::new(g, a, beta)?);
        Ok(Self { f: f.clone(), coeffs, p })
    }

    /// Reuse tabulated coefficients with a different `f` or `p`.
    pub fn with_coefficients(f: &FunctionSpec, coeffs: Arc<Coefficients>, p: f64) -> Self {
        Self { f: f.clone(), coeffs, p }
    }

    pub fn f(&self) -> &FunctionSpec {
        &self.f
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn alpha(&self) -> f64 {
        self.f.alpha().unwrap()
    }

    pub fn beta(&self) -> f64 {
        self.f.beta().unwrap()
    }

    pub fn coefficients(&self) -> &Arc<Coefficients> {
        &self.coeffs
    }

    /// Tabulated area integrand on `[0, upper]`.
    pub fn weight(&self, l: f64, upper: f64) -> Result<AreaWeight, AreaError> {
        Ok(AreaWeight::new(self.coeffs.clone(), &self.f, self.p, l, upper)?)
    }
}

/// `f(eta) a(eta)^{1/(p-1)} exp(-p/(p-1) L G_a(eta))`; exponents beyond 600
/// are combined in log-space.
pub fn area_integrand(ctx: &AreaContext, l: f64, eta: f64) -> Result<f64, AreaError> {
    let e = ctx.coeffs.log_area_weight(ctx.p, l, eta);
    let f = ctx.f.eval(eta).map_err(|err| AreaError::Parameter(err.to_string()))?;
    if e.abs() <= 600.0 {
        return Ok(f * e.exp());
    }
    if f == 0.0 {
        return Ok(0.0);
    }
    let log_magnitude = f.abs().ln() + e;
    if log_magnitude > 709.0 {
        return Err(AreaError::Overflow { eta, log_magnitude });
    }
    Ok(f.signum() * log_magnitude.exp())
}

/// `H(s, L) = integral_s^{gamma2} w` by adaptive quadrature, in log-space.
#[allow(non_snake_case)]
pub fn compute_H(ctx: &AreaContext, s: f64, gamma2: f64, l: f64) -> Result<LogScaled, AreaError> {
    if s == gamma2 {
        return Ok(LogScaled::ZERO);
    }
    let c = &ctx.coeffs;
    let p = ctx.p;
    let (lo, hi) = (s.min(gamma2), s.max(gamma2));
    let phi_max = (0..=64)
        .map(|i| c.log_area_weight(p, l, lo + (hi - lo) * i as f64 / 64.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let opts = QuadOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-12,
        max_panels: 20_000,
    };
    Ok(weighted_integral(
        |x| ctx.f.value(x),
        |x| c.log_area_weight(p, l, x),
        phi_max,
        s,
        gamma2,
        &opts,
    )?)
}

/// Extrema of `H(., L)` over `[0, gamma1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HExtrema {
    pub h_min: LogScaled,
    pub s_argmin: f64,
    pub h_max: LogScaled,
    pub s_argmax: f64,
}

/// Extrema of `s -> integral_s^{upper} w` over `[0, gamma1]` from a grid of
/// `resolution` points plus every sign change of `w` (where `dH/ds = -w`
/// vanishes), each located by bisection.
pub(crate) fn extrema_of(weight: &AreaWeight, gamma1: f64, resolution: usize) -> HExtrema {
    let n = resolution.max(64);
    let upper = weight.upper();
    let h = |s: f64| weight.integral_scaled(s, upper);
    let mut candidates: Vec<f64> = Vec::with_capacity(n + 8);
    let grid: Vec<f64> = (0..n)
        .map(|i| if i + 1 == n { gamma1 } else { gamma1 * i as f64 / (n - 1) as f64 })
        .collect();
    candidates.extend(&grid);
    let mut prev = weight.scaled(grid[0]);
    for w in grid.windows(2) {
        let next = weight.scaled(w[1]);
        if prev != 0.0 && next != 0.0 && (prev > 0.0) != (next > 0.0) {
            candidates.push(bisect(|s| weight.scaled(s), w[0], w[1], 1e-14 * gamma1.max(1.0)));
        }
        prev = next;
    }
    let mut best_min = (grid[0], f64::INFINITY);
    let mut best_max = (grid[0], f64::NEG_INFINITY);
    for s in candidates {
        let v = h(s);
        if v < best_min.1 {
            best_min = (s, v);
        }
        if v > best_max.1 {
            best_max = (s, v);
        }
    }
    let scale = weight.log_scale();
    HExtrema {
        h_min: LogScaled::new(best_min.1, scale),
        s_argmin: best_min.0,
        h_max: LogScaled::new(best_max.1, scale),
        s_argmax: best_max.0,
    }
}

/// `h_min`, `h_max` and their arguments over `s` in `[0, gamma1]`.
#[allow(non_snake_case)]
pub fn extremize_H(ctx: &AreaContext, gamma1: f64, gamma2: f64, l: f64, resolution: usize) -> Result<HExtrema, AreaError> {
    check_gammas(ctx, gamma1, gamma2)?;
    let weight = ctx.weight(l, gamma2)?;
    Ok(extrema_of(&weight, gamma1, resolution))
}

fn check_gammas(ctx: &AreaContext, gamma1: f64, gamma2: f64) -> Result<(), AreaError> {
    if !(gamma1 >= 0.0 && gamma1 < gamma2 && gamma2 <= ctx.beta()) {
        return Err(AreaError::Parameter(format!(
            "need 0 <= gamma1 < gamma2 <= beta, got gamma1 = {gamma1}, gamma2 = {gamma2}"
        )));
    }
    Ok(())
}

/// Sampled `H(., L)` on `[0, gamma1]` with its extrema. Values are stored
/// multiplied by `exp(-log_scale)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaProfile {
    pub gamma1: f64,
    pub gamma2: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub p: f64,
    pub log_scale: f64,
    pub s_grid: Vec<f64>,
    pub h_values: Vec<f64>,
    pub h_min: f64,
    pub h_max: f64,
    pub s_argmin: f64,
    pub s_argmax: f64,
    pub condition_holds: bool,
    /// `h_min` in plain units (may be infinite for extreme `L`).
    pub margin: f64,
}

impl AreaProfile {
    /// `(s, H(s))` pairs in plain units.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let k = self.log_scale.exp();
        self.s_grid.iter().zip(&self.h_values).map(move |(&s, &h)| (s, h * k))
    }
}

pub fn area_profile(ctx: &AreaContext, gamma1: f64, gamma2: f64, l: f64, resolution: usize) -> Result<AreaProfile, AreaError> {
    check_gammas(ctx, gamma1, gamma2)?;
    let weight = ctx.weight(l, gamma2)?;
    let ext = extrema_of(&weight, gamma1, resolution);
    let n = resolution.max(2);
    let s_grid: Vec<f64> = (0..n)
        .map(|i| if i + 1 == n { gamma1 } else { gamma1 * i as f64 / (n - 1) as f64 })
        .collect();
    let h_values = s_grid.iter().map(|&s| weight.integral_scaled(s, gamma2)).collect();
    Ok(AreaProfile {
        gamma1,
        gamma2,
        l,
        p: ctx.p,
        log_scale: weight.log_scale(),
        s_grid,
        h_values,
        h_min: ext.h_min.mantissa,
        h_max: ext.h_max.mantissa,
        s_argmin: ext.s_argmin,
        s_argmax: ext.s_argmax,
        condition_holds: ext.h_min.mantissa > 0.0,
        margin: ext.h_min.value(),
    })
}

/// `h_min(L)` over `[0, alpha]` with `gamma2 = beta`, for each `L` in parallel.
pub fn scan_h_min(ctx: &AreaContext, ls: &[f64], resolution: usize) -> Result<Vec<LogScaled>, AreaError> {
    ls.par_iter()
        .map(|&l| extremize_H(ctx, ctx.alpha(), ctx.beta(), l, resolution).map(|e| e.h_min))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::presets;
    use crate::numerics::quad::integrate;

    fn ctx(f: FunctionSpec) -> AreaContext {
        AreaContext::new(&f, &presets::g_one(2.0), None, 2.0).unwrap()
    }

    // Symbolic primitive of f_sign: integral_s^2 f = s^2 (s/2 - 1)^2.
    fn tail_exact(s: f64) -> f64 {
        s * s * (s / 2.0 - 1.0).powi(2)
    }

    #[test]
    fn integrand_values() {
        let c = ctx(presets::f_sign());
        assert_eq!(area_integrand(&c, 0.0, 1.5).unwrap(), 0.375);
        let v = area_integrand(&c, -1.0, 1.5).unwrap();
        assert!((v - 0.375 * 3f64.exp()).abs() < 1e-12);
        assert!((v - 7.5321).abs() < 1e-4);
        for l in [-50.0, 0.0, 7.0] {
            assert_eq!(area_integrand(&c, l, 1.0).unwrap(), 0.0);
        }
        assert!(matches!(area_integrand(&c, -400.0, 1.5), Err(AreaError::Overflow { .. })));
    }

    #[test]
    fn h_against_symbolic_primitive() {
        let c = ctx(presets::f_sign());
        assert!((compute_H(&c, 1.0, 2.0, 0.0).unwrap().value() - 0.25).abs() < 1e-13);
        assert!(compute_H(&c, 0.0, 2.0, 0.0).unwrap().value().abs() < 1e-13);
        assert_eq!(compute_H(&c, 2.0, 2.0, 0.0).unwrap().value(), 0.0);
        let w = c.weight(0.0, 2.0).unwrap();
        for i in 0..=20 {
            let s = 0.1 * i as f64;
            assert!((w.integral_scaled(s, 2.0) - tail_exact(s)).abs() < 1e-13);
        }
    }

    #[test]
    fn extrema_for_nonnegative_and_sign_changing_f() {
        let c = ctx(presets::f_pos());
        for l in [-3.0, 0.0, 2.0] {
            let e = extremize_H(&c, 1.0, 2.0, l, 256).unwrap();
            let direct = compute_H(&c, 1.0, 2.0, l).unwrap();
            assert!(e.h_min.mantissa > 0.0);
            assert!((e.h_min.ratio(&direct) - 1.0).abs() < 1e-10);
            assert!(e.h_min.value() <= e.h_max.value());
        }
        let c = ctx(presets::f_sign());
        let e = extremize_H(&c, 1.0, 2.0, 0.0, 256).unwrap();
        assert_eq!(e.s_argmin, 0.0);
        assert!(e.h_min.value().abs() < 1e-14);
        assert!((e.s_argmax - 1.0).abs() < 1e-12);
        assert!((e.h_max.value() - 0.25).abs() < 1e-13);
    }

    #[test]
    fn derivative_of_h_is_minus_integrand() {
        let c = ctx(presets::f_sign());
        let l = -1.5;
        let w = c.weight(l, 2.0).unwrap();
        let k = w.log_scale().exp();
        let h = 1e-4;
        for i in 1..=20 {
            let s = 0.095 * i as f64;
            let fd = (w.integral_scaled(s + h, 2.0) - w.integral_scaled(s - h, 2.0)) * k / (2.0 * h);
            let exact = area_integrand(&c, l, s).unwrap();
            assert!((fd + exact).abs() <= 1e-6 * exact.abs().max(1e-3), "s = {s}");
        }
    }

    #[test]
    fn scaling_f_scales_extrema() {
        let c1 = ctx(presets::f_sign());
        let c3 = ctx(presets::f_sign().scaled(3.0));
        for l in [-2.0, -0.5, 0.7] {
            let a = extremize_H(&c1, 1.0, 2.0, l, 256).unwrap();
            let b = extremize_H(&c3, 1.0, 2.0, l, 256).unwrap();
            assert!((b.h_min.ratio(&a.h_min) - 3.0).abs() <= 3e-12);
            assert!((b.h_max.ratio(&a.h_max) - 3.0).abs() <= 3e-12);
        }
    }

    #[test]
    fn refinement_is_stable() {
        let c = ctx(presets::f_sign());
        for l in [-1.0, 0.5] {
            let a = extremize_H(&c, 1.0, 2.0, l, 128).unwrap();
            let b = extremize_H(&c, 1.0, 2.0, l, 256).unwrap();
            assert!((a.h_min.value() - b.h_min.value()).abs() <= 1e-12);
        }
    }

    #[test]
    fn profile_bounds_and_tail_identity() {
        let c = ctx(presets::f_sign());
        let prof = area_profile(&c, 1.0, 2.0, -1.0, 200).unwrap();
        assert!(prof.h_values.iter().all(|&h| prof.h_min <= h && h <= prof.h_max));
        let tail = integrate(
            |x| presets::f_sign().value(x) * (2.0 * x).exp(),
            1.0,
            2.0,
            &QuadOptions::absolute(1e-13),
        )
        .unwrap()
        .value;
        let direct = prof.rows().last().unwrap().1;
        assert!((direct - tail).abs() < 1e-10);
        assert!(prof.condition_holds);
    }

    #[test]
    fn schrodinger_weight_matches_classical_signs() {
        let (a, g) = presets::a_schrod(2.0, 2.0, 2.0);
        for f in [presets::f_sign(), presets::f_pos()] {
            let c = AreaContext::new(&f, &g, Some(&a), 2.0).unwrap();
            let w = c.weight(1.0, 2.0).unwrap();
            for i in 0..50 {
                let s = 2.0 * (i as f64 + 0.5) / 50.0;
                let classical = integrate(|x| f.value(x), s, 2.0, &QuadOptions::absolute(1e-13)).unwrap().value;
                let general = w.integral(s, 2.0);
                assert_eq!(general.signum(), classical.signum(), "s = {s}");
                assert!((general.value() - classical).abs() <= 1e-10 * (1.0 + classical.abs()));
            }
        }
    }
}
