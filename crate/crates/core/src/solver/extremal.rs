use serde::{Deserialize, Serialize};

use crate::funcspace::FunctionSpec;
use crate::numerics::roots::golden_min;

use super::interval::{branch_profile, PROFILE_POINTS};
use super::radial::solve_radial;
use super::reduced::reduce;
use super::timemap::{build_time_map, find_branches, lambda_at, TimeMapCurve, DEFAULT_RHO_RESOLUTION};
use super::{DomainKind, DomainSpec, ReducedProblem, SolutionProfile, SolverError};

/// Minimum of `lambda(rho)` over admissible levels in `[alpha, beta]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaMin {
    pub value: f64,
    pub s: f64,
    pub rho: f64,
}

/// `lambda_min` from a sampled curve, polished by golden-section search
/// between the neighbours of the grid minimizer.
pub fn lambda_min<P: ReducedProblem + ?Sized>(prob: &P, curve: &TimeMapCurve) -> Result<LambdaMin, SolverError> {
    let comps = curve.components(prob.alpha());
    let mut best: Option<(usize, usize)> = None;
    for (c, comp) in comps.iter().enumerate() {
        for (k, &i) in comp.iter().enumerate() {
            let v = curve.lambda_values[i];
            if best.is_none_or(|(bc, bk)| v < curve.lambda_values[comps[bc][bk]]) {
                best = Some((c, k));
            }
        }
    }
    let (c, k) = best.ok_or(SolverError::Inadmissible {
        l: prob.l(),
        p: prob.p(),
    })?;
    let comp = &comps[c];
    let i = comp[k];
    let grid_value = curve.lambda_values[i];
    if !grid_value.is_finite() {
        return Err(SolverError::Inadmissible { l: prob.l(), p: prob.p() });
    }
    let lo = curve.s_grid[comp[k.saturating_sub(1)]];
    let hi = curve.s_grid[comp[(k + 1).min(comp.len() - 1)]];
    let domain = curve.domain;
    let (s, v) = if hi > lo {
        golden_min(
            |s| {
                let v = lambda_at(prob, &domain, s);
                if v.is_nan() { f64::INFINITY } else { v }
            },
            lo,
            hi,
            1e-10 * prob.s_max(),
            200,
        )
    } else {
        (curve.s_grid[i], grid_value)
    };
    let (s, v) = if v <= grid_value { (s, v) } else { (curve.s_grid[i], grid_value) };
    Ok(LambdaMin {
        value: v,
        s,
        rho: prob.psi(s),
    })
}

/// Smallest `lambda_bar` such that every `lambda > lambda_bar` is attained by
/// an admissible level in `[alpha, beta]`.
///
/// Each run of admissible grid levels contributes the interval between its
/// minimum and maximum; the maximum is infinite when it sits at an end of
/// the run next to an inadmissible level or at the top (where `lambda(rho)`
/// blows up, or where flat-core solutions continue the branch when
/// `lambda(Psi(beta))` is finite).
pub fn lambda_bar_min<P: ReducedProblem + ?Sized>(prob: &P, curve: &TimeMapCurve) -> Result<f64, SolverError> {
    let comps = curve.components(prob.alpha());
    if comps.is_empty() {
        return Err(SolverError::Inadmissible { l: prob.l(), p: prob.p() });
    }
    let top = prob.s_max() * (1.0 - 1e-3);
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for (c, comp) in comps.iter().enumerate() {
        let vals: Vec<f64> = comp.iter().map(|&i| curve.lambda_values[i]).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let n = vals.len();
        let left_blows = n > 1 && vals[0] == hi && vals[0] > vals[1];
        let at_top = c + 1 == comps.len() && curve.s_grid[*comp.last().unwrap()] >= top && prob.degenerate_top();
        let right_blows = at_top || (n > 1 && vals[n - 1] == hi && vals[n - 1] > vals[n - 2]);
        if left_blows || right_blows {
            hi = f64::INFINITY;
        }
        intervals.push((lo, hi));
    }
    if let Ok(m) = lambda_min(prob, curve) {
        for iv in intervals.iter_mut() {
            if (iv.0 - m.value).abs() <= 1e-6 * m.value.abs() {
                iv.0 = iv.0.min(m.value);
            }
        }
    }
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in intervals {
        match merged.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    let tail = merged.last().unwrap();
    Ok(if tail.1.is_infinite() { tail.0 } else { f64::INFINITY })
}

/// The branch with the largest admissible maximum solving `lambda(rho) =
/// lambda`, or `None` when no branch exists.
pub fn maximal_solution<P: ReducedProblem + ?Sized>(prob: &P, lambda: f64, domain: &DomainSpec) -> Result<Option<SolutionProfile>, SolverError> {
    let curve = build_time_map(prob, domain, DEFAULT_RHO_RESOLUTION)?;
    maximal_from_curve(prob, &curve, lambda)
}

pub(crate) fn maximal_from_curve<P: ReducedProblem + ?Sized>(prob: &P, curve: &TimeMapCurve, lambda: f64) -> Result<Option<SolutionProfile>, SolverError> {
    let branches = find_branches(prob, curve, lambda);
    let Some(top) = branches.last() else {
        return Ok(None);
    };
    let domain = curve.domain;
    let mut prof = match domain.kind {
        DomainKind::Interval => branch_profile(prob, top, lambda, &domain, PROFILE_POINTS)?,
        DomainKind::Ball => solve_radial(prob, domain.dim, lambda, domain.size, top.s)?,
    };
    prof.branch_id = branches.len() - 1;
    prof.tangency = top.tangency;
    Ok(Some(prof))
}

/// `lambda_min(L)` for the interval or ball `domain`.
#[allow(non_snake_case)]
pub fn lambda_min_of_L(f: &FunctionSpec, g: &FunctionSpec, a: Option<&FunctionSpec>, p: f64, l: f64, domain: &DomainSpec) -> Result<f64, SolverError> {
    let prob = reduce(f, g, a, p, l)?;
    let curve = build_time_map(&prob, domain, DEFAULT_RHO_RESOLUTION)?;
    Ok(lambda_min(&prob, &curve)?.value)
}

/// `lambda_bar_min(L)` for the interval or ball `domain`.
#[allow(non_snake_case)]
pub fn lambda_bar_min_of_L(f: &FunctionSpec, g: &FunctionSpec, a: Option<&FunctionSpec>, p: f64, l: f64, domain: &DomainSpec) -> Result<f64, SolverError> {
    let prob = reduce(f, g, a, p, l)?;
    let curve = build_time_map(&prob, domain, DEFAULT_RHO_RESOLUTION)?;
    lambda_bar_min(&prob, &curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::presets::{f_pos, f_sign, g_one};
    use crate::solver::{solve_interval, LinearOracle};
    use std::f64::consts::PI;

    fn unit() -> DomainSpec {
        DomainSpec::interval(1.0).unwrap()
    }

    #[test]
    fn linear_lambda_min_is_the_eigenvalue() {
        let lin = LinearOracle::new(2.0);
        let curve = build_time_map(&lin, &unit(), 64).unwrap();
        assert!((lambda_min(&lin, &curve).unwrap().value - PI * PI).abs() < 1e-6);
    }

    #[test]
    fn lambda_min_separates_existence() {
        let prob = reduce(&f_sign(), &g_one(2.0), None, 2.0, -1.0).unwrap();
        let curve = build_time_map(&prob, &unit(), 256).unwrap();
        let m = lambda_min(&prob, &curve).unwrap();
        assert!(m.s > 1.0 && m.s < 2.0);
        assert!(curve.rows().all(|(_, _, v)| v >= m.value * (1.0 - 1e-9)));
        assert!(!solve_interval(&prob, 1.01 * m.value, &unit()).unwrap().is_empty());
        assert!(solve_interval(&prob, 0.5 * m.value, &unit()).unwrap().is_empty());
        let bar = lambda_bar_min(&prob, &curve).unwrap();
        assert!(bar >= m.value);
    }

    #[test]
    fn lambda_min_grows_toward_the_critical_value() {
        let vals: Vec<f64> = [-2.0, -1.0, -0.5]
            .iter()
            .map(|&l| lambda_min_of_L(&f_sign(), &g_one(2.0), None, 2.0, l, &unit()).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] > w[0]), "{vals:?}");
    }

    #[test]
    fn maximal_norm_is_nondecreasing_in_lambda() {
        let prob = reduce(&f_pos(), &g_one(2.0), None, 2.0, -3.0).unwrap();
        let curve = build_time_map(&prob, &unit(), 256).unwrap();
        let mut last = 0.0;
        for lambda in [50.0, 100.0, 200.0, 400.0] {
            let prof = maximal_from_curve(&prob, &curve, lambda).unwrap().unwrap();
            assert!(prof.sup_norm >= last);
            assert!(prof.sup_norm > 1.0 && prof.sup_norm <= 2.0);
            assert!((2.0 - prof.sup_norm).abs() > 1e-6);
            last = prof.sup_norm;
        }
    }

    #[test]
    fn maximal_solution_dominates_other_branches() {
        let prob = reduce(&f_pos(), &g_one(2.0), None, 2.0, -3.0).unwrap();
        let all = solve_interval(&prob, 200.0, &unit()).unwrap();
        let max = maximal_solution(&prob, 200.0, &unit()).unwrap().unwrap();
        assert!(all.len() >= 2);
        assert_eq!(max.branch_id, all.len() - 1);
        for other in &all[..all.len() - 1] {
            assert!(max.sup_norm > other.sup_norm);
        }
        let peak = max.values.iter().copied().fold(0.0, f64::max);
        assert!((peak - max.sup_norm).abs() < 1e-8);
    }

    #[test]
    fn no_maximal_solution_below_lambda_min() {
        let prob = reduce(&f_pos(), &g_one(2.0), None, 3.0, -1.0).unwrap();
        let curve = build_time_map(&prob, &unit(), 256).unwrap();
        let m = lambda_min(&prob, &curve).unwrap();
        assert!(m.value > 50.0);
        assert!(maximal_from_curve(&prob, &curve, 50.0).unwrap().is_none());
    }

    #[test]
    fn lambda_bar_min_decreases_as_l_decreases() {
        let vals: Vec<f64> = [-1.0, -2.0, -4.0]
            .iter()
            .map(|&l| lambda_bar_min_of_L(&f_sign(), &g_one(2.0), None, 2.0, l, &unit()).unwrap())
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
    }
}
