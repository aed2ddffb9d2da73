use gradreg::area::AreaContext;
use gradreg::asymptotics::{default_l_sequence, growth_diagnostic, hratio_diagnostic, psi_power_ratio, taylor_diagnostic, LimitDiagnostic, HRATIO_BAND};
use gradreg::numerics::quad::{integrate, QuadOptions};
use gradreg::transform::{build_psi, transformed_nonlinearity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::{usage, Run, StageStatus};
use crate::config::{Problem, RunConfig};
use crate::output::{num, nums};

/// Random levels in the area identity check.
pub const IDENTITY_SAMPLES: usize = 20;

/// Fraction of `[gamma1, gamma2]` used as the upper end for diagnostics
/// that need `gamma2 < beta`.
const INNER_FRACTION: f64 = 0.9;

fn gammas(cfg: &RunConfig, prob: &Problem) -> (f64, f64) {
    (cfg.gamma1.unwrap_or(prob.alpha), cfg.gamma2.unwrap_or(prob.beta))
}

fn sequence(cfg: &RunConfig) -> Vec<f64> {
    cfg.l_sequence.clone().unwrap_or_else(default_l_sequence)
}

pub fn precheck(cfg: &RunConfig, prob: &Problem) -> anyhow::Result<()> {
    let (g1, g2) = gammas(cfg, prob);
    if !(0.0 <= g1 && g1 < g2 && g2 <= prob.beta) {
        return Err(usage(format!("need 0 <= gamma1 < gamma2 <= beta, got {g1}, {g2}")));
    }
    let ls = sequence(cfg);
    if ls.is_empty() || ls.iter().any(|&l| !(l < 0.0 && l.is_finite())) || ls.windows(2).any(|w| w[1] >= w[0]) {
        return Err(usage("L_sequence must be a nonempty, strictly decreasing list of negative numbers"));
    }
    Ok(())
}

/// `[a, b]` cut at `c` when `c` is interior; `f` may have a kink at its
/// first zero.
fn split(a: f64, b: f64, c: f64) -> Vec<(f64, f64)> {
    if a < c && c < b {
        vec![(a, c), (c, b)]
    } else {
        vec![(a, b)]
    }
}

fn diagnostic_json(d: &LimitDiagnostic, file: &str) -> Value {
    json!({
        "name": d.name,
        "file": file,
        "L_sequence": nums(&d.l_sequence),
        "ratio_values": nums(&d.ratio_values),
        "claimed_limit": num(d.claimed_limit),
        "converged": d.converged,
        "last_gap": num(d.last_gap),
        "band": num(d.band),
        "fitted_exponent": d.fitted_exponent.map(num),
    })
}

pub fn run(run: &mut Run) {
    let (cfg, prob) = (run.cfg, run.prob);
    let f = prob.nonlinearity("verify").expect("checked before the run");
    let (g1, g2) = gammas(cfg, prob);
    let inner = g1 + INNER_FRACTION * (g2 - g1);
    let ls = sequence(cfg);
    let Some(ctx) = run.stage("context", |_| Ok(AreaContext::new(f, &prob.g, prob.a.as_ref(), prob.p)?)) else {
        return;
    };

    let mut diagnostics = Vec::new();
    type Diag<'c> = Box<dyn Fn() -> anyhow::Result<LimitDiagnostic> + 'c>;
    let jobs: [(&str, Diag); 4] = [
        ("taylor", Box::new(|| Ok(taylor_diagnostic(&prob.g, g1, g2, &ls, HRATIO_BAND)?))),
        ("hratio", Box::new(|| Ok(hratio_diagnostic(&ctx, g1, g2, &ls)?))),
        ("growth", Box::new(|| Ok(growth_diagnostic(&ctx, g1, inner, &ls)?))),
        ("psi_power", Box::new(|| Ok(psi_power_ratio(&ctx, g1, inner, &ls)?))),
    ];
    for (name, job) in jobs.iter() {
        let stage = format!("diagnostic_{name}");
        if let Some(v) = run.stage(&stage, |run| {
            let d = job()?;
            let file = format!("verify_{name}.csv");
            run.out.write_table(&file, &["L", "ratio"], d.rows().map(|(l, r)| vec![l, r]))?;
            if !d.converged {
                run.record(&stage, StageStatus::Indeterminate, format!("not converged: last gap {:e} vs band {:e}", d.last_gap, d.band));
            }
            Ok(diagnostic_json(&d, &file))
        }) {
            diagnostics.push(v);
        }
    }

    let identity = run.stage("area_identity", |run| {
        let l = cfg.l.values()[0];
        let tol = cfg.tolerances.area_identity;
        let table = build_psi(&prob.g, prob.a.as_ref(), prob.p, l, prob.beta, cfg.tolerances.transform)?;
        let tn = transformed_nonlinearity(f, &table)?;
        let coeffs = table.coefficients().clone();
        let top = table.psi_max();
        let v_alpha = table.psi(prob.alpha);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let quad = QuadOptions {
            abs_tol: 1e-3 * tol,
            rel_tol: 1e-13,
            ..QuadOptions::default()
        };
        let mut samples = Vec::with_capacity(IDENTITY_SAMPLES);
        let mut worst = 0.0f64;
        for _ in 0..IDENTITY_SAMPLES {
            let v = rng.gen_range(0.0..top);
            let s = table.psi_inverse(v)?;
            let mut lhs = 0.0;
            for (a, b) in split(v, top, v_alpha) {
                lhs += integrate(|x| tn.ftilde(x).unwrap_or(f64::NAN), a, b, &quad)?.value;
            }
            let mut rhs = 0.0;
            for (a, b) in split(s, prob.beta, prob.alpha) {
                rhs += integrate(|r| f.value(r) * coeffs.log_area_weight(prob.p, l, r).exp(), a, b, &quad)?.value;
            }
            let err = (lhs - rhs).abs() / rhs.abs().max(1.0);
            worst = worst.max(err);
            samples.push(json!({ "v": num(v), "s": num(s), "lhs": num(lhs), "rhs": num(rhs), "error": num(err) }));
        }
        let passed = worst <= tol;
        if !passed {
            run.record("area_identity", StageStatus::Indeterminate, format!("worst error {worst:e} exceeds {tol:e}"));
        }
        Ok(json!({
            "L": num(l),
            "seed": cfg.seed,
            "tolerance": num(tol),
            "max_error": num(worst),
            "passed": passed,
            "samples": samples,
        }))
    });

    let all_converged = diagnostics.len() == jobs.len() && diagnostics.iter().all(|d| d["converged"] == Value::Bool(true));
    let report = json!({
        "gamma1": num(g1),
        "gamma2": num(g2),
        "gamma2_inner": num(inner),
        "all_converged": all_converged,
        "diagnostics": diagnostics,
        "area_identity": identity.unwrap_or(Value::Null),
    });
    run.stage("report", |run| run.out.write_json("verify.json", &report));
}
