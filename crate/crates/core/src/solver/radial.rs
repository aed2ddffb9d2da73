use crate::numerics::ode::{integrate_until, OdeOptions, Termination, Trajectory};

use super::timemap::{build_time_map, find_branches, DEFAULT_RHO_RESOLUTION};
use super::{DomainKind, DomainSpec, ReducedProblem, SolutionProfile, SolverError, Variable};

/// Largest radius explored before a shot is declared to never reach zero.
const MAX_RADIUS: f64 = 1e6;

fn phi_inv(z: f64, p: f64) -> f64 {
    z.signum() * z.abs().powf(1.0 / (p - 1.0))
}

/// Shoot `(r^{N-1} |v'|^{p-2} v')' = -lambda r^{N-1} f~(v)` from `v(0) = Psi(s0)`
/// in the level coordinate, stopping at the first zero of `v`.
fn shoot<P: ReducedProblem + ?Sized>(prob: &P, dim: usize, s0: f64, lambda: f64) -> Result<Option<Trajectory<2>>, SolverError> {
    let p = prob.p();
    let n = dim as f64;
    let ft = prob.ftilde_at(s0);
    if !(ft > 0.0) || !(s0 > 0.0) {
        return Ok(None);
    }
    let k = p / (p - 1.0);
    let dpsi0 = prob.dpsi(s0);
    // Series start v = Psi(s0) - (p-1)/p (lambda f~/N)^{1/(p-1)} r^k.
    let amp = (p - 1.0) / p * (lambda * ft / n).powf(1.0 / (p - 1.0));
    let r0 = (1e-13 * s0.max(1e-3) * dpsi0 / amp).powf(1.0 / k).min(1e-4);
    let y0 = [s0 - amp * r0.powf(k) / dpsi0, -lambda * ft * r0.powf(n) / n];
    let rhs = |r: f64, y: &[f64; 2]| {
        let s = y[0].clamp(0.0, prob.s_max());
        let vp = phi_inv(y[1] / r.powf(n - 1.0), p);
        [vp / prob.dpsi(s), -lambda * r.powf(n - 1.0) * prob.ftilde_at(y[0].min(prob.s_max()))]
    };
    let opts = OdeOptions {
        h_init: r0,
        ..OdeOptions::default()
    };
    let traj = integrate_until(rhs, r0, y0, MAX_RADIUS, |_, y| y[0], |_, y| y[1] >= 0.0, &opts)?;
    let mut traj = traj;
    if traj.termination != Termination::Event {
        return Ok(None);
    }
    traj.t.insert(0, 0.0);
    traj.y.insert(0, [s0, 0.0]);
    Ok(Some(traj))
}

/// First zero `r*` of the radial solution with `v(0) = Psi(s0)` at
/// `lambda = 1`; `None` when the shot never reaches zero.
pub fn first_zero_radius<P: ReducedProblem + ?Sized>(prob: &P, dim: usize, s0: f64) -> Result<Option<f64>, SolverError> {
    Ok(shoot(prob, dim, s0, 1.0)?.map(|t| *t.t.last().unwrap()))
}

/// Shoot from `v(0) = Psi(s0)` with parameter `lambda`, then rescale by
/// `p`-homogeneity so that the first zero sits at `radius`; the returned
/// profile carries `lambda (r*/radius)^p`.
pub fn solve_radial<P: ReducedProblem + ?Sized>(prob: &P, dim: usize, lambda: f64, radius: f64, s0: f64) -> Result<SolutionProfile, SolverError> {
    if !(s0 > 0.0 && s0 < prob.s_max()) {
        return Err(SolverError::Parameter(format!("starting level {s0} outside (0, {})", prob.s_max())));
    }
    if !(lambda > 0.0 && radius > 0.0) {
        return Err(SolverError::Parameter("lambda and radius must be positive".into()));
    }
    let traj = shoot(prob, dim, s0, lambda)?.ok_or(SolverError::NoZeroCrossing { s0 })?;
    let r_star = *traj.t.last().unwrap();
    let scale = radius / r_star;
    let x: Vec<f64> = traj.t.iter().map(|r| r * scale).collect();
    let mut values: Vec<f64> = traj.y.iter().map(|y| y[0].max(0.0)).collect();
    *values.last_mut().unwrap() = 0.0;
    let domain = if dim >= 2 {
        DomainSpec::ball(radius, dim)?
    } else {
        DomainSpec::interval(2.0 * radius)?
    };
    let lam = lambda * (r_star / radius).powf(prob.p());
    Ok(SolutionProfile::new(domain, Variable::Original, x, values, lam, prob.l(), prob.p()))
}

/// All radial solutions on the ball with parameter `lambda`, ordered by
/// increasing maximum.
pub fn solve_ball<P: ReducedProblem + ?Sized>(prob: &P, lambda: f64, domain: &DomainSpec) -> Result<Vec<SolutionProfile>, SolverError> {
    if domain.kind != DomainKind::Ball {
        return Err(SolverError::Parameter("solve_ball needs a ball domain".into()));
    }
    let curve = build_time_map(prob, domain, DEFAULT_RHO_RESOLUTION)?;
    find_branches(prob, &curve, lambda)
        .into_iter()
        .enumerate()
        .map(|(id, b)| {
            let mut prof = solve_radial(prob, domain.dim, lambda, domain.size, b.s)?;
            prof.branch_id = id;
            prof.tangency = b.tangency;
            prof.sup_norm = b.s;
            Ok(prof)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::presets::{f_pos, f_sign, g_one};
    use crate::numerics::roots::bisect_bracket;
    use crate::solver::{reduce, solve_interval, LinearOracle};
    use std::f64::consts::PI;

    const J01: f64 = 2.404_825_557_695_773;

    #[test]
    fn disk_gives_bessel_eigenvalue() {
        let lin = LinearOracle::new(2.0);
        let r = first_zero_radius(&lin, 2, 0.5).unwrap().unwrap();
        assert!((r * r - J01 * J01).abs() < 1e-6);
        let prof = solve_radial(&lin, 2, 1.0, 1.0, 0.5).unwrap();
        assert!((prof.lambda - J01 * J01).abs() < 1e-4);
    }

    #[test]
    fn three_ball_gives_pi_squared() {
        let lin = LinearOracle::new(2.0);
        let r = first_zero_radius(&lin, 3, 0.3).unwrap().unwrap();
        assert!((r - PI).abs() < 1e-7);
    }

    #[test]
    fn one_dimensional_shot_matches_interval() {
        let prob = reduce(&f_pos(), &g_one(2.0), None, 2.0, -1.0).unwrap();
        let dom = DomainSpec::interval(1.0).unwrap();
        let sols = solve_interval(&prob, 50.0, &dom).unwrap();
        for sol in sols {
            let s = sol.sup_norm;
            let (lo, hi) = bisect_bracket(
                |s0| solve_radial(&prob, 1, 50.0, 0.5, s0).map(|p| p.lambda - 50.0).unwrap_or(f64::NAN),
                s - 1e-3,
                s + 1e-3,
                1e-13,
                200,
            );
            assert!((0.5 * (lo + hi) - s).abs() < 1e-6, "{} vs {s}", 0.5 * (lo + hi));
        }
    }

    #[test]
    fn inadmissible_start_reports_no_solution() {
        let prob = reduce(&f_sign(), &g_one(2.0), None, 2.0, -1.0).unwrap();
        assert!(matches!(solve_radial(&prob, 2, 10.0, 1.0, 0.5), Err(SolverError::NoZeroCrossing { .. })));
        assert!(matches!(solve_radial(&prob, 2, 10.0, 1.0, 0.0), Err(SolverError::Parameter(_))));
        assert!(first_zero_radius(&prob, 2, 1e-9).unwrap().is_none());
    }

    #[test]
    fn ball_profiles_decrease_to_zero() {
        let prob = reduce(&f_pos(), &g_one(2.0), None, 2.0, -2.0).unwrap();
        let ball = DomainSpec::ball(1.0, 2).unwrap();
        let sols = solve_ball(&prob, 200.0, &ball).unwrap();
        assert!(!sols.is_empty());
        for sol in sols {
            assert!((sol.lambda - 200.0).abs() < 1e-6 * 200.0);
            assert_eq!(*sol.values.last().unwrap(), 0.0);
            assert!((*sol.x.last().unwrap() - 1.0).abs() < 1e-12);
            assert!(sol.values.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }
}
