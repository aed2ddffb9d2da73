//! Convergence diagnostics for the `L -> -inf` limits of the area profile.
//!
//! Every quantity is formed in log-space so that sequences reaching
//! `L = -1e4` stay finite.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::area::{extremize_H, AreaContext, AreaError, DEFAULT_RESOLUTION};
use crate::funcspace::FunctionSpec;
use crate::numerics::logspace::{weighted_integral, LogScaled};
use crate::numerics::quad::{QuadError, QuadOptions};
use crate::transform::{Coefficients, TransformError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AsymptoticsError {
    #[error(transparent)]
    Area(#[from] AreaError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("h_min({l}) = {h_min:e} is not positive (entry {index}); start the sequence at more negative L")]
    NonPositive { index: usize, l: f64, h_min: f64 },
    #[error("non-finite diagnostic at L = {l}")]
    NonFinite { l: f64 },
}

/// Default sequence `L_k = -5 * 2^k`, `k = 0..5`.
pub fn default_l_sequence() -> Vec<f64> {
    (0..6).map(|k| -5.0 * 2f64.powi(k)).collect()
}

/// Windows `beta - gamma2` used when the lower bound is checked near `beta`.
pub const EPSILON_GRID: [f64; 3] = [0.1, 0.05, 0.01];

pub const HRATIO_BAND: f64 = 0.02;
pub const PLATEAU_BAND: f64 = 0.05;
pub const DECAY_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitDiagnostic {
    pub name: String,
    #[serde(rename = "L_sequence")]
    pub l_sequence: Vec<f64>,
    pub ratio_values: Vec<f64>,
    pub claimed_limit: f64,
    pub converged: bool,
    pub last_gap: f64,
    pub band: f64,
    /// Least-squares slope of `-ln ratio` against `ln(-L)`, when fitted.
    pub fitted_exponent: Option<f64>,
}

impl LimitDiagnostic {
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.l_sequence.iter().copied().zip(self.ratio_values.iter().copied())
    }
}

fn check_sequence(ls: &[f64]) -> Result<(), AsymptoticsError> {
    if ls.is_empty() {
        return Err(AsymptoticsError::Parameter("empty L sequence".into()));
    }
    if ls.iter().any(|&l| !(l < 0.0 && l.is_finite())) {
        return Err(AsymptoticsError::Parameter("L values must be finite and negative".into()));
    }
    if ls.windows(2).any(|w| w[1] >= w[0]) {
        return Err(AsymptoticsError::Parameter("L sequence must be decreasing".into()));
    }
    Ok(())
}

/// Relative size below which a gap to the limit counts as zero.
const GAP_FLOOR: f64 = 1e-12;

/// Gaps to the limit are nonincreasing over the last three entries, up to
/// `floor`.
fn tail_monotone(gaps: &[f64], floor: f64) -> bool {
    let n = gaps.len();
    let k = n.saturating_sub(3);
    gaps[k..].windows(2).all(|w| w[1] <= w[0].max(floor))
}

/// `(-L g(gamma2)) exp(L G(gamma2)) integral_{gamma1}^{gamma2} exp(-L G)`.
pub fn taylor_ratio(g: &FunctionSpec, gamma1: f64, gamma2: f64, l: f64) -> Result<f64, AsymptoticsError> {
    if !(gamma1 >= 0.0 && gamma1 < gamma2) {
        return Err(AsymptoticsError::Parameter(format!(
            "need 0 <= gamma1 < gamma2, got {gamma1}, {gamma2}"
        )));
    }
    if !(l < 0.0) {
        return Err(AsymptoticsError::Parameter(format!("L must be negative, got {l}")));
    }
    let coeffs = Coefficients::new(g, None, gamma2)?;
    taylor_ratio_with(&coeffs, gamma1, gamma2, l)
}

fn taylor_ratio_with(coeffs: &Coefficients, gamma1: f64, gamma2: f64, l: f64) -> Result<f64, AsymptoticsError> {
    let g2 = coeffs.g().value(gamma2);
    if !(g2 > 0.0) {
        return Err(AsymptoticsError::Parameter(format!("g(gamma2) must be positive, got {g2}")));
    }
    let top = -l * coeffs.ghat(gamma2);
    let integral = weighted_integral(
        |_| 1.0,
        |x| -l * coeffs.ghat(x),
        top,
        gamma1,
        gamma2,
        &QuadOptions::relative(1e-13),
    )?;
    let r = integral.mantissa * (-l * g2);
    if !r.is_finite() {
        return Err(AsymptoticsError::NonFinite { l });
    }
    Ok(r)
}

/// `taylor_ratio` along a sequence, with limit 1.
pub fn taylor_diagnostic(g: &FunctionSpec, gamma1: f64, gamma2: f64, ls: &[f64], band: f64) -> Result<LimitDiagnostic, AsymptoticsError> {
    check_sequence(ls)?;
    let coeffs = Coefficients::new(g, None, gamma2)?;
    let ratio_values = ls
        .par_iter()
        .map(|&l| taylor_ratio_with(&coeffs, gamma1, gamma2, l))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(finish("taylor_ratio", ls, ratio_values, 1.0, band, None))
}

fn finish(name: &str, ls: &[f64], ratio_values: Vec<f64>, limit: f64, band: f64, fitted_exponent: Option<f64>) -> LimitDiagnostic {
    let gaps: Vec<f64> = ratio_values.iter().map(|r| (r - limit).abs()).collect();
    let last_gap = *gaps.last().unwrap();
    LimitDiagnostic {
        name: name.into(),
        l_sequence: ls.to_vec(),
        converged: tail_monotone(&gaps, GAP_FLOOR * limit.abs().max(1.0)) && last_gap <= band,
        ratio_values,
        claimed_limit: limit,
        last_gap,
        band,
        fitted_exponent,
    }
}

fn positive_extrema(ctx: &AreaContext, gamma1: f64, gamma2: f64, ls: &[f64]) -> Result<Vec<(LogScaled, LogScaled)>, AsymptoticsError> {
    let ext = ls
        .par_iter()
        .map(|&l| extremize_H(ctx, gamma1, gamma2, l, DEFAULT_RESOLUTION))
        .collect::<Result<Vec<_>, _>>()?;
    ext.into_iter()
        .enumerate()
        .map(|(index, e)| {
            if e.h_min.mantissa > 0.0 {
                Ok((e.h_min, e.h_max))
            } else {
                Err(AsymptoticsError::NonPositive {
                    index,
                    l: ls[index],
                    h_min: e.h_min.value(),
                })
            }
        })
        .collect()
}

/// `h_max(L) / h_min(L)` along `ls`, with limit 1.
pub fn hratio_diagnostic(ctx: &AreaContext, gamma1: f64, gamma2: f64, ls: &[f64]) -> Result<LimitDiagnostic, AsymptoticsError> {
    check_sequence(ls)?;
    let ext = positive_extrema(ctx, gamma1, gamma2, ls)?;
    let ratios = ext.iter().map(|(lo, hi)| hi.ratio(lo)).collect();
    Ok(finish("hratio", ls, ratios, 1.0, HRATIO_BAND, None))
}

/// `C(L) = h_min(L) (-L) exp(p/(p-1) L G(gamma2))`.
pub fn growth_lower_bound(ctx: &AreaContext, gamma1: f64, gamma2: f64, l: f64) -> Result<f64, AsymptoticsError> {
    check_sequence(&[l])?;
    let e = positive_extrema(ctx, gamma1, gamma2, &[l])?;
    Ok(growth_constant(ctx, gamma2, l, &e[0].0))
}

fn growth_constant(ctx: &AreaContext, gamma2: f64, l: f64, h_min: &LogScaled) -> f64 {
    let p = ctx.p();
    let ghat = ctx.coefficients().ghat(gamma2);
    (h_min.ln_abs() + (-l).ln() + p / (p - 1.0) * l * ghat).exp()
}

/// Limit of `C(L)` from Laplace's method at `gamma2`:
/// `(p-1) f(gamma2) a(gamma2)^{1/(p-1)} / (p g(gamma2))`.
pub fn growth_limit(ctx: &AreaContext, gamma2: f64) -> f64 {
    let p = ctx.p();
    let c = ctx.coefficients();
    let g_over_a = c.g().value(gamma2) * (-c.ln_a(gamma2)).exp();
    (p - 1.0) * ctx.f().value(gamma2) * (c.ln_a(gamma2) / (p - 1.0)).exp() / (p * g_over_a)
}

/// `C(L)` along `ls`; converged when consecutive values settle within
/// `PLATEAU_BAND` relative and the values stay positive.
pub fn growth_diagnostic(ctx: &AreaContext, gamma1: f64, gamma2: f64, ls: &[f64]) -> Result<LimitDiagnostic, AsymptoticsError> {
    check_sequence(ls)?;
    let ext = positive_extrema(ctx, gamma1, gamma2, ls)?;
    let values: Vec<f64> = ls
        .iter()
        .zip(&ext)
        .map(|(&l, (lo, _))| growth_constant(ctx, gamma2, l, lo))
        .collect();
    let limit = growth_limit(ctx, gamma2);
    let mut d = finish("growth_constant", ls, values, limit, f64::INFINITY, None);
    let n = d.ratio_values.len();
    let settled = n < 2 || {
        let (a, b) = (d.ratio_values[n - 2], d.ratio_values[n - 1]);
        (b - a).abs() <= PLATEAU_BAND * b.abs()
    };
    d.band = PLATEAU_BAND;
    d.converged = settled && d.ratio_values.iter().all(|&c| c > 0.0);
    Ok(d)
}

/// `C(L)` with `gamma2 = beta - eps` for each window in `eps`.
pub fn growth_lower_bound_eps(ctx: &AreaContext, gamma1: f64, l: f64, eps: &[f64]) -> Result<Vec<(f64, f64)>, AsymptoticsError> {
    eps.par_iter()
        .map(|&e| {
            let gamma2 = ctx.beta() - e;
            growth_lower_bound(ctx, gamma1, gamma2, l).map(|c| (e, c))
        })
        .collect()
}

/// `ln Psi_L(s)` by log-space quadrature of `Psi_L'`.
pub fn log_psi(coeffs: &Coefficients, p: f64, l: f64, s: f64) -> Result<f64, AsymptoticsError> {
    let phi = |x: f64| coeffs.log_dpsi(p, l, x);
    let top = (0..=64)
        .map(|i| phi(s * i as f64 / 64.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let r = weighted_integral(|_| 1.0, phi, top, 0.0, s, &QuadOptions::relative(1e-13))?;
    Ok(r.ln_abs())
}

/// `Psi_L(gamma2)^p / h_min(L)` along `ls`, with limit 0 and the fitted decay
/// exponent in `fitted_exponent`. Converged when the sequence decreases, falls
/// by `DECAY_FACTOR` overall and the exponent is at least `p - 1.2`.
pub fn psi_power_ratio(ctx: &AreaContext, gamma1: f64, gamma2: f64, ls: &[f64]) -> Result<LimitDiagnostic, AsymptoticsError> {
    check_sequence(ls)?;
    let p = ctx.p();
    let ext = positive_extrema(ctx, gamma1, gamma2, ls)?;
    let log_ratios = ls
        .par_iter()
        .zip(&ext)
        .map(|(&l, (lo, _))| Ok(p * log_psi(ctx.coefficients(), p, l, gamma2)? - lo.ln_abs()))
        .collect::<Result<Vec<f64>, AsymptoticsError>>()?;
    let xs: Vec<f64> = ls.iter().map(|l| (-l).ln()).collect();
    let exponent = if ls.len() >= 2 { Some(-slope(&xs, &log_ratios)) } else { None };
    let ratios: Vec<f64> = log_ratios.iter().map(|r| r.exp()).collect();
    let first = ratios[0];
    let last = *ratios.last().unwrap();
    let mut d = finish("psi_power_ratio", ls, ratios, 0.0, f64::INFINITY, exponent);
    let decreasing = d.ratio_values.windows(2).all(|w| w[1] < w[0]);
    d.band = first / DECAY_FACTOR;
    d.converged = decreasing && last <= d.band && exponent.is_some_and(|e| e >= p - 1.0 - 0.2);
    Ok(d)
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
