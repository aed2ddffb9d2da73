use std::f64::consts::PI;

use gradreg::solver::{
    branch_profile, build_time_map, find_branches, lambda_bar_min, lambda_min, reduce, solve_radial, Branch, DomainKind, DomainSpec,
    LinearOracle, ReducedProblem, SolutionProfile, TimeMapCurve, PROFILE_POINTS,
};
use serde_json::{json, Value};

use super::{Run, StageStatus};
use crate::output::num;

/// First zero of the Bessel function `J_0`.
const J01: f64 = 2.404_825_557_695_773;

/// Closed-form principal eigenvalue where one is known.
fn eigenvalue_oracle(p: f64, domain: &DomainSpec) -> Option<f64> {
    match domain.kind {
        DomainKind::Interval => {
            let pi_p = 2.0 * PI * (p - 1.0).powf(1.0 / p) / (p * (PI / p).sin());
            Some((p - 1.0) * (pi_p / domain.size).powf(p))
        }
        DomainKind::Ball if p == 2.0 && domain.dim == 2 => Some((J01 / domain.size).powi(2)),
        DomainKind::Ball if p == 2.0 && domain.dim == 3 => Some((PI / domain.size).powi(2)),
        DomainKind::Ball => None,
    }
}

fn profile_at<P: ReducedProblem + ?Sized>(prob: &P, branch: &Branch, lambda: f64, domain: &DomainSpec) -> anyhow::Result<SolutionProfile> {
    Ok(match domain.kind {
        DomainKind::Interval => branch_profile(prob, branch, lambda, domain, PROFILE_POINTS)?,
        DomainKind::Ball => {
            let mut prof = solve_radial(prob, domain.dim, lambda, domain.size, branch.s)?;
            prof.sup_norm = branch.s;
            prof.tangency = branch.tangency;
            prof
        }
    })
}

fn write_curve(run: &mut Run, curve: &TimeMapCurve) -> anyhow::Result<()> {
    let rows = (0..curve.s_grid.len())
        .filter(|&i| curve.admissible[i])
        .map(|i| vec![curve.s_grid[i], curve.rho_grid[i], curve.t_values[i], curve.lambda_values[i]]);
    run.out.write_table("timemap.csv", &["s", "rho", "T", "lambda"], rows)
}

fn write_profile<P: ReducedProblem + ?Sized>(run: &mut Run, prob: &P, id: usize, prof: &SolutionProfile) -> anyhow::Result<Value> {
    let rows = prof.x.iter().zip(&prof.values).map(|(&x, &u)| vec![x, u, prob.psi(u)]);
    let name = format!("profile_{id}.csv");
    run.out.write_table(&name, &["x", "u", "v"], rows)?;
    Ok(json!({
        "file": name,
        "branch_id": id,
        "sup_norm": num(prof.sup_norm),
        "rho": num(prob.psi(prof.sup_norm)),
        "tangency": prof.tangency,
        "residual": num(prof.residual_norm),
        "points": prof.len(),
    }))
}

fn check_residuals(run: &mut Run, profiles: &[Value]) {
    let tol = run.cfg.tolerances.residual;
    let bad: Vec<usize> = profiles
        .iter()
        .enumerate()
        .filter(|(_, p)| p["residual"].as_f64().is_some_and(|r| r > tol))
        .map(|(i, _)| i)
        .collect();
    if bad.is_empty() {
        run.record("residuals", StageStatus::Ok, format!("all computed residuals <= {tol:e}"));
    } else {
        run.record("residuals", StageStatus::Failed, format!("profiles {bad:?} exceed residual tolerance {tol:e}"));
    }
}

fn run_linear(run: &mut Run) {
    let (cfg, prob) = (run.cfg, run.prob);
    let lin = LinearOracle::new(prob.p);
    let domain = prob.domain;
    let Some(curve) = run.stage("timemap", |run| {
        let c = build_time_map(&lin, &domain, cfg.rho_resolution)?;
        write_curve(run, &c)?;
        Ok(c)
    }) else {
        return;
    };
    let Some(m) = run.stage("lambda_min", |_| Ok(lambda_min(&lin, &curve)?)) else {
        return;
    };
    let oracle = eigenvalue_oracle(prob.p, &domain);
    match oracle {
        Some(exact) => {
            let err = (m.value - exact).abs() / exact;
            let status = if err <= 1e-6 { StageStatus::Ok } else { StageStatus::Failed };
            run.record("eigenvalue_check", status, format!("lambda = {} vs {exact}, relative error {err:e}", m.value));
        }
        None => run.record("eigenvalue_check", StageStatus::Ok, "no closed form for this domain and p"),
    }
    let branch = Branch {
        s: lin.s_max,
        rho: lin.s_max,
        lambda: m.value,
        tangency: false,
    };
    let profiles: Vec<Value> = run
        .stage("profiles", |run| {
            let prof = profile_at(&lin, &branch, m.value, &domain)?;
            Ok(vec![write_profile(run, &lin, 0, &prof)?])
        })
        .unwrap_or_default();
    check_residuals(run, &profiles);
    let summary = json!({
        "problem": "linear",
        "p": num(prob.p),
        "domain": domain,
        "lambda_min": num(m.value),
        "eigenvalue_oracle": oracle.map(num),
        "eigenvalue_check": oracle.map(|e| (m.value - e).abs() / e <= 1e-6),
        "profiles": profiles,
    });
    run.stage("summary", |run| run.out.write_json("solve.json", &summary));
}

pub fn run(run: &mut Run) {
    let (cfg, prob) = (run.cfg, run.prob);
    let Some(f) = prob.f.as_ref() else {
        return run_linear(run);
    };
    let l = cfg.scalar_l().expect("checked before the run");
    let lambda = cfg.scalar_lambda().expect("checked before the run");
    let domain = prob.domain;
    let Some(reduced) = run.stage("transform", |_| Ok(reduce(f, &prob.g, prob.a.as_ref(), prob.p, l)?)) else {
        return;
    };
    let Some(curve) = run.stage("timemap", |run| {
        let c = build_time_map(&reduced, &domain, cfg.rho_resolution)?;
        write_curve(run, &c)?;
        Ok(c)
    }) else {
        return;
    };
    let lmin = lambda_min(&reduced, &curve);
    let lbar = lambda_bar_min(&reduced, &curve);
    run.record(
        "extremal",
        StageStatus::Ok,
        match (&lmin, &lbar) {
            (Ok(_), Ok(_)) => String::new(),
            (Err(e), _) | (_, Err(e)) => e.to_string(),
        },
    );
    let branches = find_branches(&reduced, &curve, lambda);
    let profiles: Vec<Value> = run
        .stage("profiles", |run| {
            let mut out = Vec::new();
            for (id, b) in branches.iter().enumerate() {
                let mut prof = profile_at(&reduced, b, lambda, &domain)?;
                prof.branch_id = id;
                out.push(write_profile(run, &reduced, id, &prof)?);
            }
            Ok(out)
        })
        .unwrap_or_default();
    check_residuals(run, &profiles);
    let summary = json!({
        "p": num(prob.p),
        "L": num(l),
        "lambda": num(lambda),
        "alpha": num(prob.alpha),
        "beta": num(prob.beta),
        "domain": domain,
        "lambda_min": lmin.as_ref().map_or(Value::Null, |m| num(m.value)),
        "lambda_min_level": lmin.as_ref().map_or(Value::Null, |m| num(m.s)),
        "lambda_bar_min": lbar.as_ref().map_or(Value::Null, |&b| num(b)),
        "branch_count": branches.len(),
        "maximal_branch": if branches.is_empty() { Value::Null } else { Value::from(branches.len() - 1) },
        "residual_tolerance": num(cfg.tolerances.residual),
        "profiles": profiles,
    });
    run.stage("summary", |run| run.out.write_json("solve.json", &summary));
}
