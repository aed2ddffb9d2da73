use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::numerics::quad::{integrate, QuadError, QuadOptions};
use crate::numerics::roots::{bisect_bracket, golden_min};

use super::radial::first_zero_radius;
use super::{DomainKind, DomainSpec, ReducedProblem, SolverError};

/// Default number of uniformly spaced levels in a curve.
pub const DEFAULT_RHO_RESOLUTION: usize = 512;

/// Half-length (interval) or first-zero radius (ball) of the solution with
/// maximum `Psi(s)` at `lambda = 1`, sampled over levels `s`, and the
/// resulting `lambda(rho)` for a target domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeMapCurve {
    pub p: f64,
    pub domain: DomainSpec,
    pub s_grid: Vec<f64>,
    pub rho_grid: Vec<f64>,
    /// NaN where inadmissible or where the time integral did not converge.
    pub t_values: Vec<f64>,
    pub admissible: Vec<bool>,
    /// NaN where inadmissible; infinite where the level is never left.
    pub lambda_values: Vec<f64>,
}

/// A root of `lambda(rho) = lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub s: f64,
    pub rho: f64,
    pub lambda: f64,
    pub tangency: bool,
}

/// Energy condition `F~(Psi s) > F~(Psi t)` for all `t < s`, evaluated from
/// the local maxima of `W(s) = integral_0^s w`.
pub(crate) struct Admissibility {
    maxima: Vec<(f64, f64)>,
    tol: f64,
}

impl Admissibility {
    pub(crate) fn new<P: ReducedProblem + ?Sized>(prob: &P) -> Self {
        let n = 4096;
        let top = prob.s_max();
        let grid: Vec<f64> = (0..=n).map(|i| top * i as f64 / n as f64).collect();
        let ws: Vec<f64> = grid.iter().map(|&s| prob.w(s)).collect();
        let mut maxima = vec![(0.0, 0.0)];
        let mut scale: f64 = 0.0;
        for i in 1..=n {
            scale = scale.max(prob.gap(0.0, grid[i]).abs());
            if ws[i - 1] > 0.0 && ws[i] <= 0.0 {
                let (lo, hi) = bisect_bracket(|s| prob.w(s), grid[i - 1], grid[i], 1e-14 * top, 200);
                let s = 0.5 * (lo + hi);
                maxima.push((s, prob.gap(0.0, s)));
            }
        }
        Self { maxima, tol: 1e-13 * scale }
    }

    pub(crate) fn admissible<P: ReducedProblem + ?Sized>(&self, prob: &P, s: f64) -> bool {
        if !(s > 0.0) {
            return false;
        }
        let w = prob.w(s);
        if w < 0.0 || (w == 0.0 && s < prob.s_max()) {
            return false;
        }
        let big_w = prob.gap(0.0, s);
        self.maxima
            .iter()
            .filter(|(t, _)| *t < s)
            .all(|(_, m)| big_w - m > self.tol)
    }
}

/// Exponent `k` of the substitution `sigma = s (1 - tau^k)`: `p/(p-1)` when
/// `f~(Psi s) > 0`, where the gap vanishes linearly, and `p/(p-2)` at a
/// degenerate top, where it vanishes quadratically.
pub(crate) fn level_exponent(p: f64, ws: f64) -> f64 {
    if ws > 0.0 {
        p / (p - 1.0)
    } else {
        p / (p - 2.0)
    }
}

/// Integrand of the time map after `sigma = s (1 - tau^k)`, which removes
/// the endpoint singularity.
pub(crate) fn time_integrand<P: ReducedProblem + ?Sized>(prob: &P, s: f64, ws: f64, tau: f64) -> f64 {
    let p = prob.p();
    let k = level_exponent(p, ws);
    let sigma = s - s * tau.powf(k);
    // Use the exact distance to the rounded node so that the result is a
    // smooth function of sigma alone.
    let d = s - sigma;
    if ws > 0.0 {
        if d <= 0.0 {
            return prob.dpsi(s) * s * k * (ws * s).powf(-1.0 / p);
        }
        let mut gap = prob.gap(sigma, s);
        if !(gap > 0.0) && d <= 1e-12 * s {
            gap = ws * d;
        }
        return prob.dpsi(sigma) * s * k * (d / s).powf((k - 1.0) / k) * gap.powf(-1.0 / p);
    }
    // Degenerate top: near s the gap is about |w'(s)| d^2 / 2, below the
    // accuracy of the table, so use that form there.
    let curvature = || {
        let h = 1e-4 * s;
        0.5 * (4.0 * prob.w(s - h) - prob.w(s - 2.0 * h) - 3.0 * ws) / (2.0 * h)
    };
    if d <= 0.0 {
        return prob.dpsi(s) * s * k * (curvature() * s * s).powf(-1.0 / p);
    }
    let gap = if d <= 1e-5 * s { curvature() * d * d } else { prob.gap(sigma, s) };
    prob.dpsi(sigma) * s * k * (d / s).powf((k - 1.0) / k) * gap.powf(-1.0 / p)
}

/// `((p-1)/p)^{1/p}`.
pub(crate) fn time_constant(p: f64) -> f64 {
    ((p - 1.0) / p).powf(1.0 / p)
}

/// Half-length at `lambda = 1` of the interval solution with maximum
/// `Psi(s)`; infinite when the top level is degenerate and `p <= 2`.
pub fn half_time<P: ReducedProblem + ?Sized>(prob: &P, s: f64) -> Result<f64, SolverError> {
    let p = prob.p();
    if prob.degenerate_top() && s >= prob.s_max() && p <= 2.0 {
        return Ok(f64::INFINITY);
    }
    let ws = prob.w(s);
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: 1e-11,
        max_panels: 4000,
    };
    let breaks = tau_breakpoints(prob, s, ws);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let piece = |rel_tol| {
            let o = QuadOptions { rel_tol, ..opts };
            integrate(|tau| time_integrand(prob, s, ws, tau), w[0], w[1], &o)
        };
        // Rounding in sigma limits the attainable accuracy near tau = 0.
        let r = match piece(opts.rel_tol) {
            Err(QuadError::Budget { .. }) => piece(1e-9)?,
            r => r?,
        };
        total += r.value;
    }
    Ok(time_constant(p) * total)
}

/// Panel ends for the time integral: the image of `alpha`, where `f` may
/// have a kink.
pub(crate) fn tau_breakpoints<P: ReducedProblem + ?Sized>(prob: &P, s: f64, ws: f64) -> Vec<f64> {
    let k = level_exponent(prob.p(), ws);
    let mut out = vec![0.0, 1.0];
    let alpha = prob.alpha();
    if alpha > 0.0 && alpha < s {
        out.push((1.0 - alpha / s).powf(1.0 / k));
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// `lambda` at which a profile of the given `lambda = 1` size fills `domain`.
pub(crate) fn lambda_from_size(size: f64, p: f64, domain: &DomainSpec) -> f64 {
    let target = match domain.kind {
        DomainKind::Interval => 0.5 * domain.size,
        DomainKind::Ball => domain.size,
    };
    (size / target).powf(p)
}

/// Size at `lambda = 1` for the domain kind: half-time or first-zero radius.
pub(crate) fn size_at<P: ReducedProblem + ?Sized>(prob: &P, domain: &DomainSpec, s: f64) -> Result<f64, SolverError> {
    match domain.kind {
        DomainKind::Interval => half_time(prob, s),
        DomainKind::Ball => Ok(first_zero_radius(prob, domain.dim, s)?.unwrap_or(f64::NAN)),
    }
}

/// Levels: `resolution` uniform points in `(0, s_max)` plus geometric
/// clusters towards `s_max` when `f~` vanishes there and above `alpha`.
pub fn level_grid<P: ReducedProblem + ?Sized>(prob: &P, resolution: usize) -> Vec<f64> {
    let top = prob.s_max();
    let n = resolution.max(8);
    let mut grid: Vec<f64> = (1..=n).map(|i| top * i as f64 / (n + 1) as f64).collect();
    if prob.degenerate_top() {
        let mut e = 2.75;
        while e <= 11.0 {
            grid.push(top - top * 10f64.powf(-e));
            e += 0.25;
        }
        if prob.p() > 2.0 {
            grid.push(top);
        }
    }
    let alpha = prob.alpha();
    if alpha > 0.0 {
        let mut e = 2.75;
        while e <= 12.0 {
            grid.push(alpha + top * 10f64.powf(-e));
            e += 0.5;
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Sample `lambda(rho)` on [`level_grid`] for `domain`.
pub fn build_time_map<P: ReducedProblem + ?Sized>(prob: &P, domain: &DomainSpec, rho_resolution: usize) -> Result<TimeMapCurve, SolverError> {
    let p = prob.p();
    let s_grid = level_grid(prob, rho_resolution);
    let adm = Admissibility::new(prob);
    let admissible: Vec<bool> = s_grid.par_iter().map(|&s| adm.admissible(prob, s)).collect();
    let t_values = s_grid
        .par_iter()
        .zip(&admissible)
        .map(|(&s, &ok)| match ok.then(|| size_at(prob, domain, s)) {
            None | Some(Err(SolverError::Quadrature(QuadError::Budget { .. }))) => Ok(f64::NAN),
            Some(r) => r,
        })
        .collect::<Result<Vec<f64>, SolverError>>()?;
    let admissible: Vec<bool> = admissible.iter().zip(&t_values).map(|(&a, t)| a && !t.is_nan()).collect();
    let lambda_values = t_values
        .iter()
        .map(|&t| if t.is_nan() { f64::NAN } else { lambda_from_size(t, p, domain) })
        .collect();
    Ok(TimeMapCurve {
        p,
        domain: *domain,
        rho_grid: s_grid.iter().map(|&s| prob.psi(s)).collect(),
        s_grid,
        t_values,
        admissible,
        lambda_values,
    })
}

impl TimeMapCurve {
    /// Runs of consecutive admissible grid indices with levels `>= lo`.
    pub(crate) fn components(&self, lo: f64) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        let mut current: Vec<usize> = Vec::new();
        for i in 0..self.s_grid.len() {
            if self.s_grid[i] < lo {
                continue;
            }
            if self.admissible[i] {
                current.push(i);
            } else if !current.is_empty() {
                out.push(std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            out.push(current);
        }
        out
    }

    /// `lambda(rho)` rows `(s, rho, lambda)` over admissible levels.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.s_grid.len())
            .filter(|&i| self.admissible[i])
            .map(|i| (self.s_grid[i], self.rho_grid[i], self.lambda_values[i]))
    }
}

/// `lambda(s)` for the curve's domain, evaluated directly.
pub(crate) fn lambda_at<P: ReducedProblem + ?Sized>(prob: &P, domain: &DomainSpec, s: f64) -> f64 {
    match size_at(prob, domain, s) {
        Ok(t) => lambda_from_size(t, prob.p(), domain),
        Err(_) => f64::NAN,
    }
}

/// All roots of `lambda(rho) = lambda` with levels in `[alpha, s_max]`:
/// bisection across sign changes on the grid and tangencies at grid extrema
/// that touch the target.
pub fn find_branches<P: ReducedProblem + ?Sized>(prob: &P, curve: &TimeMapCurve, lambda: f64) -> Vec<Branch> {
    let domain = curve.domain;
    let lam = |s: f64| lambda_at(prob, &domain, s);
    let mut brackets = Vec::new();
    let mut touches = Vec::new();
    for comp in curve.components(prob.alpha()) {
        for w in comp.windows(2) {
            let (i, j) = (w[0], w[1]);
            let (a, b) = (curve.lambda_values[i] - lambda, curve.lambda_values[j] - lambda);
            if a == 0.0 {
                brackets.push((curve.s_grid[i], curve.s_grid[i]));
            } else if (a < 0.0) != (b < 0.0) && b != 0.0 {
                brackets.push((curve.s_grid[i], curve.s_grid[j]));
            }
        }
        if let Some(&last) = comp.last() {
            if curve.lambda_values[last] == lambda {
                brackets.push((curve.s_grid[last], curve.s_grid[last]));
            }
        }
        for w in comp.windows(3) {
            let (a, b, c) = (curve.lambda_values[w[0]], curve.lambda_values[w[1]], curve.lambda_values[w[2]]);
            let local_min = b < a && b <= c && b > lambda;
            let local_max = b > a && b >= c && b < lambda;
            if local_min || local_max {
                touches.push((curve.s_grid[w[0]], curve.s_grid[w[2]], local_min));
            }
        }
    }
    let mut out: Vec<Branch> = brackets
        .par_iter()
        .map(|&(lo, hi)| {
            let s = if lo == hi {
                lo
            } else {
                let (a, b) = bisect_bracket(|s| lam(s) - lambda, lo, hi, 1e-13 * prob.s_max(), 200);
                0.5 * (a + b)
            };
            Branch {
                s,
                rho: prob.psi(s),
                lambda: lam(s),
                tangency: false,
            }
        })
        .collect();
    let tangent: Vec<Branch> = touches
        .par_iter()
        .filter_map(|&(lo, hi, is_min)| {
            let sign = if is_min { 1.0 } else { -1.0 };
            let (s, v) = golden_min(|s| sign * lam(s), lo, hi, 1e-12 * prob.s_max(), 200);
            let v = sign * v;
            ((v - lambda).abs() <= 1e-8 * lambda).then(|| Branch {
                s,
                rho: prob.psi(s),
                lambda: v,
                tangency: true,
            })
        })
        .collect();
    out.extend(tangent);
    out.sort_by(|a, b| a.s.total_cmp(&b.s));
    out.dedup_by(|a, b| (a.s - b.s).abs() <= 1e-10 * prob.s_max());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::presets::{f_pos, f_sign, g_one};
    use crate::solver::{reduce, LinearOracle};
    use std::f64::consts::PI;

    /// `integral (r-1)(2-r) e^{K r} dr` in closed form.
    fn quad_exp_primitive(r: f64, k: f64) -> f64 {
        let q = -r * r + 3.0 * r - 2.0;
        let q1 = -2.0 * r + 3.0;
        (k * r).exp() * (q / k - q1 / (k * k) - 2.0 / (k * k * k))
    }

    /// Half-time for `f_pos`, `g = 1`, `a = 1` at `p = 2`, from the closed-form
    /// weight `f e^{-2 L s}` and `Psi' = e^{-L s}`, by composite Simpson in
    /// `sigma = s - u^2`.
    fn reference_half_time(l: f64, s: f64) -> f64 {
        let k = -2.0 * l;
        let big_w = |r: f64| if r <= 1.0 { 0.0 } else { quad_exp_primitive(r, k) - quad_exp_primitive(1.0, k) };
        let ws = big_w(s);
        let top = s.sqrt();
        let n = 200_000;
        let h = top / n as f64;
        let g = |u: f64| {
            let sigma = s - u * u;
            let gap = if u < 1e-6 {
                let w = (s - 1.0) * (2.0 - s) * (k * s).exp();
                w * u * u
            } else {
                ws - big_w(sigma)
            };
            if u == 0.0 {
                let w = (s - 1.0) * (2.0 - s) * (k * s).exp();
                return (-l * s).exp() * 2.0 / w.sqrt();
            }
            (-l * sigma).exp() * 2.0 * u / gap.sqrt()
        };
        let mut sum = g(0.0) + g(top);
        for i in 1..n {
            sum += g(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        time_constant(2.0) * sum * h / 3.0
    }

    #[test]
    fn linear_half_time_is_quarter_period() {
        let lin = LinearOracle::new(2.0);
        for s in [0.1, 0.5, 0.9] {
            assert!((half_time(&lin, s).unwrap() - PI / 2.0).abs() < 1e-11);
        }
    }

    #[test]
    fn linear_curve_gives_dirichlet_eigenvalue() {
        let lin = LinearOracle::new(2.0);
        let dom = DomainSpec::interval(1.0).unwrap();
        let curve = build_time_map(&lin, &dom, 32).unwrap();
        for (_, _, lam) in curve.rows() {
            assert!((lam - PI * PI).abs() < 1e-8);
        }
        let dom2 = DomainSpec::interval(2.0).unwrap();
        let curve = build_time_map(&lin, &dom2, 16).unwrap();
        assert!(curve.rows().all(|(_, _, lam)| (lam - PI * PI / 4.0).abs() < 1e-8));
    }

    #[test]
    fn half_time_matches_closed_form_weight() {
        for l in [-1.0, -3.0] {
            let prob = reduce(&f_pos(), &g_one(2.0), None, 2.0, l).unwrap();
            for s in [1.2, 1.6, 1.95] {
                let t = half_time(&prob, s).unwrap();
                let r = reference_half_time(l, s);
                assert!((t - r).abs() < 1e-7 * r, "L={l} s={s}: {t} vs {r}");
            }
        }
    }

    #[test]
    fn degenerate_top_has_infinite_time_for_small_p() {
        let prob = reduce(&f_pos(), &g_one(2.0), None, 2.0, -1.0).unwrap();
        assert!(half_time(&prob, 2.0).unwrap().is_infinite());
        let prob = reduce(&f_pos(), &g_one(2.0), None, 3.0, -1.0).unwrap();
        let top = half_time(&prob, 2.0).unwrap();
        assert!(top.is_finite());
        // T(beta) - T(beta - delta) ~ delta^{(p-2)/p}.
        let d1 = top - half_time(&prob, 2.0 - 1e-6).unwrap();
        let d2 = top - half_time(&prob, 2.0 - 1e-9).unwrap();
        let ratio = d2 / d1;
        assert!(d1 > 0.0 && (ratio - 0.1).abs() < 0.03, "{d1} {d2}");
    }

    #[test]
    fn admissible_levels_start_where_energy_turns_positive() {
        // p = 2, L = -1: w = s(s-1)(2-s) e^{2s}; W(s) = integral_0^s w.
        let prob = reduce(&f_sign(), &g_one(2.0), None, 2.0, -1.0).unwrap();
        let w = |r: f64| r * (r - 1.0) * (2.0 - r) * (2.0 * r).exp();
        let big_w = |s: f64| {
            let n = 20_000;
            let h = s / n as f64;
            (0..n).map(|i| {
                let a = i as f64 * h;
                (w(a) + 4.0 * w(a + 0.5 * h) + w(a + h)) * h / 6.0
            }).sum::<f64>()
        };
        let (mut lo, mut hi) = (1.0, 2.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if big_w(mid) > 0.0 { hi = mid } else { lo = mid }
        }
        let adm = Admissibility::new(&prob);
        assert!(!adm.admissible(&prob, lo - 1e-6));
        assert!(adm.admissible(&prob, hi + 1e-6));
        assert!(!adm.admissible(&prob, 0.5));
    }

    #[test]
    fn branches_solve_the_target() {
        let prob = reduce(&f_pos(), &g_one(2.0), None, 2.0, -2.0).unwrap();
        let dom = DomainSpec::interval(1.0).unwrap();
        let curve = build_time_map(&prob, &dom, 128).unwrap();
        let branches = find_branches(&prob, &curve, 200.0);
        assert!(branches.len() >= 2);
        assert!(branches[0].s > 1.0 && branches.last().unwrap().s < 2.0);
        for b in &branches {
            assert!((b.lambda - 200.0).abs() < 1e-7 * 200.0);
        }
    }

    #[test]
    fn level_grid_is_sorted_and_inside() {
        let prob = reduce(&f_sign(), &g_one(2.0), None, 1.5, -1.0).unwrap();
        let grid = level_grid(&prob, 64);
        assert!(grid.windows(2).all(|w| w[1] > w[0]));
        assert!(grid[0] > 0.0 && *grid.last().unwrap() < 2.0);
        assert!(grid.iter().any(|&s| s > 2.0 - 1e-9));
    }
}
