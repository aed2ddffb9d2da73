use rayon::prelude::*;

use crate::numerics::cheb::{ChebOptions, ChebTable};
use crate::numerics::fd::derivative;

use super::timemap::{build_time_map, find_branches, level_exponent, tau_breakpoints, time_constant, time_integrand, Branch, DEFAULT_RHO_RESOLUTION};
use super::{DomainKind, DomainSpec, ReducedProblem, SolutionProfile, SolverError, Variable};

/// Grid size of reconstructed interval profiles.
pub const PROFILE_POINTS: usize = 2001;
/// Acceptance threshold of the normalized residual.
pub const RESIDUAL_THRESHOLD: f64 = 1e-4;

/// An interval profile with its slope from the first integral.
#[derive(Debug, Clone)]
pub struct IntervalSamples {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub du: Vec<f64>,
}

/// Time-map integrand `h` at one level and its antiderivative `D`, so that
/// the distance from the centre of the solution at `sigma = s (1 - tau^k)`
/// is `c D(tau) / lambda^{1/p}`.
struct LevelMap {
    s: f64,
    k: f64,
    scale: f64,
    breaks: Vec<f64>,
    h: ChebTable,
    d: ChebTable,
}

impl LevelMap {
    fn new<P: ReducedProblem + ?Sized>(prob: &P, s: f64, lambda: f64) -> Result<Self, SolverError> {
        let p = prob.p();
        let ws = prob.w(s);
        if ws < 0.0 || (ws == 0.0 && p <= 2.0) {
            return Err(SolverError::Parameter(format!("level {s} has f~ <= 0")));
        }
        let opts = ChebOptions {
            rel_tol: 1e-12,
            ..ChebOptions::default()
        };
        let breaks = tau_breakpoints(prob, s, ws);
        let h = ChebTable::build_on(|tau| time_integrand(prob, s, ws, tau), &breaks, &opts)?;
        let d = h.antiderivative();
        Ok(Self {
            s,
            k: level_exponent(p, ws),
            scale: time_constant(p) / lambda.powf(1.0 / p),
            breaks,
            h,
            d,
        })
    }

    fn sigma(&self, tau: f64) -> f64 {
        if tau >= 1.0 {
            0.0
        } else {
            self.s * (1.0 - tau.powf(self.k))
        }
    }

    fn distance(&self, tau: f64) -> f64 {
        self.scale * self.d.eval(tau)
    }

    /// Slope `|u'|` at `sigma` from the first integral.
    fn slope<P: ReducedProblem + ?Sized>(&self, prob: &P, lambda: f64, sigma: f64) -> f64 {
        let p = prob.p();
        let gap = if sigma >= self.s { 0.0 } else { prob.gap(sigma, self.s).max(0.0) };
        (p / (p - 1.0) * lambda * gap).powf(1.0 / p) / prob.dpsi(sigma)
    }
}

/// Symmetric solution with maximum `Psi(s)` on `(0, length)` sampled on
/// `points` uniform nodes.
///
/// The distance from the centre is `d(tau) ~ integral_0^tau h`, with `h` the
/// time-map integrand in `sigma = s (1 - tau^k)`; nodes are placed by
/// inverting a Chebyshev table of `d`.
pub fn reconstruct_interval<P: ReducedProblem + ?Sized>(prob: &P, s: f64, lambda: f64, length: f64, points: usize) -> Result<IntervalSamples, SolverError> {
    let map = LevelMap::new(prob, s, lambda)?;
    let total = map.d.eval(1.0);
    let half = 0.5 * length;
    let n = points.max(5) | 1;
    let m = (n - 1) / 2;
    let mut taus = vec![0.0; m + 1];
    // Node j sits at x_j = length j/(n-1), distance half - x_j from the centre.
    for j in 0..=m {
        let target = total * (1.0 - j as f64 / m as f64);
        taus[j] = if j == 0 {
            1.0
        } else if j == m {
            0.0
        } else {
            invert_monotone(&map.d, &map.h, target, taus[j - 1])
        };
    }
    let mut x = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let mut du = Vec::with_capacity(n);
    for (j, &tau) in taus.iter().enumerate() {
        let sigma = if j == m { s } else { map.sigma(tau) };
        x.push(length * j as f64 / (n - 1) as f64);
        u.push(sigma);
        du.push(map.slope(prob, lambda, sigma));
    }
    for j in (0..m).rev() {
        x.push(length - x[j]);
        u.push(u[j]);
        du.push(-du[j]);
    }
    x[m] = half;
    Ok(IntervalSamples { x, u, du })
}
/// Solve `d(tau) = target` for `tau` in `[0, upper]` with `d` increasing.
fn invert_monotone(d: &ChebTable, h: &ChebTable, target: f64, upper: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, upper);
    let mut t = 0.5 * (lo + hi);
    for _ in 0..200 {
        let r = d.eval(t) - target;
        if r == 0.0 {
            return t;
        }
        if r > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let slope = h.eval(t);
        let mut next = t - r / slope;
        if !(next > lo && next < hi) || !slope.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 4.0 * f64::EPSILON * t.max(1e-300) || hi - lo <= 4.0 * f64::EPSILON * hi {
            return next;
        }
        t = next;
    }
    t
}

/// Max-norm of the residual of `-(a|u'|^{p-2}u')' + L g |u'|^p - lambda f`
/// on the rising half of the solution with maximum `Psi(s)`, sampled at about
/// `points / 2` nodes (the other half is its mirror image).
///
/// The flux is differentiated with five-point finite differences on nodes
/// uniform in `tau`, one grid per smooth piece, which follows boundary
/// layers in `x`. Each node's residual is normalized by the sum of the
/// magnitudes of the three terms, floored at `1e-3` of their largest value.
pub fn original_residual<P: ReducedProblem + ?Sized>(prob: &P, s: f64, lambda: f64, points: usize) -> Result<f64, SolverError> {
    let map = LevelMap::new(prob, s, lambda)?;
    let p = prob.p();
    let l = prob.l();
    let half_nodes = points.max(5) / 2 + 1;
    let mut terms: Vec<(f64, f64)> = Vec::new();
    for w in map.breaks.windows(2) {
        let nodes = ((half_nodes as f64 * (w[1] - w[0])).round() as usize).max(9);
        let taus: Vec<f64> = (0..nodes)
            .map(|i| w[0] + (w[1] - w[0]) * i as f64 / (nodes - 1) as f64)
            .collect();
        let x: Vec<f64> = taus.iter().map(|&t| -map.distance(t)).collect();
        let u: Vec<f64> = taus.iter().map(|&t| map.sigma(t)).collect();
        let du: Vec<f64> = u.iter().map(|&sig| map.slope(prob, lambda, sig)).collect();
        let flux: Vec<f64> = u
            .iter()
            .zip(&du)
            .map(|(&u, &du)| prob.a_of(u) * du.powf(p - 1.0))
            .collect();
        let dflux = derivative(&x, &flux, 5);
        terms.extend(u.iter().zip(&du).zip(&dflux).map(|((&u, &du), &df)| {
            let grad = l * prob.g_of(u) * du.powf(p);
            let src = lambda * prob.f_of(u);
            (-df + grad - src, df.abs() + grad.abs() + src.abs())
        }));
    }
    let largest = terms.iter().map(|t| t.1).fold(0.0, f64::max);
    let floor = 1e-3 * largest;
    Ok(terms
        .iter()
        .map(|(r, scale)| r.abs() / scale.max(floor))
        .fold(0.0, f64::max))
}

/// Profile of one branch of the interval problem, with its residual.
pub fn branch_profile<P: ReducedProblem + ?Sized>(prob: &P, branch: &Branch, lambda: f64, domain: &DomainSpec, points: usize) -> Result<SolutionProfile, SolverError> {
    let samples = reconstruct_interval(prob, branch.s, lambda, domain.size, points)?;
    let residual = original_residual(prob, branch.s, lambda, points)?;
    let mut prof = SolutionProfile::new(*domain, Variable::Original, samples.x, samples.u, lambda, prob.l(), prob.p());
    prof.sup_norm = branch.s;
    prof.residual_norm = residual;
    prof.residual_threshold = RESIDUAL_THRESHOLD;
    prof.tangency = branch.tangency;
    Ok(prof)
}

/// Every symmetric solution on the interval with maximum in
/// `[Psi(alpha), Psi(beta)]`, ordered by increasing maximum.
pub fn solve_interval<P: ReducedProblem + ?Sized>(prob: &P, lambda: f64, domain: &DomainSpec) -> Result<Vec<SolutionProfile>, SolverError> {
    if domain.kind != DomainKind::Interval {
        return Err(SolverError::Parameter("solve_interval needs an interval domain".into()));
    }
    let curve = build_time_map(prob, domain, DEFAULT_RHO_RESOLUTION)?;
    let branches = find_branches(prob, &curve, lambda);
    branches
        .par_iter()
        .enumerate()
        .map(|(id, b)| {
            let mut prof = branch_profile(prob, b, lambda, domain, PROFILE_POINTS)?;
            prof.branch_id = id;
            Ok(prof)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::presets::{f_pos, g_one};
    use crate::solver::{reduce, LinearOracle};
    use std::f64::consts::PI;

    #[test]
    fn linear_profile_is_a_sine() {
        let lin = LinearOracle::new(2.0);
        let smp = reconstruct_interval(&lin, 0.7, PI * PI, 1.0, 401).unwrap();
        for (x, u) in smp.x.iter().zip(&smp.u) {
            assert!((u - 0.7 * (PI * x).sin()).abs() < 1e-9, "x={x}");
        }
        for (x, du) in smp.x.iter().zip(&smp.du) {
            assert!((du - 0.7 * PI * (PI * x).cos()).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn profiles_are_symmetric_and_pinned() {
        let prob = reduce(&f_pos(), &g_one(2.0), None, 2.0, -1.0).unwrap();
        let dom = DomainSpec::interval(1.0).unwrap();
        let sols = solve_interval(&prob, 50.0, &dom).unwrap();
        assert_eq!(sols.len(), 2);
        for sol in &sols {
            let n = sol.x.len();
            assert_eq!(n, PROFILE_POINTS);
            for j in 0..n {
                assert!((sol.values[j] - sol.values[n - 1 - j]).abs() <= 1e-10);
            }
            assert_eq!(sol.values[0], 0.0);
            assert_eq!(sol.values[n / 2], sol.sup_norm);
            assert!(sol.x.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn residuals_of_the_original_equation_are_small() {
        let dom = DomainSpec::interval(1.0).unwrap();
        for (p, l, lambda) in [(2.0, -1.0, 50.0), (1.5, -4.0, 200.0), (3.0, -4.0, 50.0)] {
            let prob = reduce(&f_pos(), &g_one(2.0), None, p, l).unwrap();
            let sols = solve_interval(&prob, lambda, &dom).unwrap();
            assert!(!sols.is_empty());
            for sol in sols {
                assert!(sol.residual_ok(), "p={p} L={l}: {}", sol.residual_norm);
            }
        }
    }

    #[test]
    fn residual_detects_a_wrong_lambda() {
        let prob = reduce(&f_pos(), &g_one(2.0), None, 2.0, -1.0).unwrap();
        let dom = DomainSpec::interval(1.0).unwrap();
        let sols = solve_interval(&prob, 50.0, &dom).unwrap();
        let s = sols[0].sup_norm;
        let good = original_residual(&prob, s, 50.0, PROFILE_POINTS).unwrap();
        let map = LevelMap::new(&prob, s, 50.0).unwrap();
        // A profile built for lambda = 50 but checked against lambda = 55.
        let taus: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
        let x: Vec<f64> = taus.iter().map(|&t| -map.distance(t)).collect();
        let u: Vec<f64> = taus.iter().map(|&t| map.sigma(t)).collect();
        let flux: Vec<f64> = u.iter().map(|&sig| map.slope(&prob, 50.0, sig)).collect();
        let dflux = derivative(&x, &flux, 5);
        let worst = u
            .iter()
            .zip(&flux)
            .zip(&dflux)
            .map(|((&u, &du), &df)| (-df - du * du - 55.0 * prob.f_of(u)).abs())
            .fold(0.0, f64::max);
        assert!(good < 1e-6);
        assert!(worst > 1.0);
    }

    #[test]
    fn rejects_ball_domains() {
        let lin = LinearOracle::new(2.0);
        let ball = DomainSpec::ball(1.0, 2).unwrap();
        assert!(matches!(solve_interval(&lin, 10.0, &ball), Err(SolverError::Parameter(_))));
    }
}
