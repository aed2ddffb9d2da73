use gradreg::area::{area_profile, check_area_condition, check_flatcore_criterion, find_critical_L, AreaContext, AreaVerdict, FlatCoreVerdict};
use serde_json::{json, Value};

use super::{Run, StageStatus};
use crate::output::num;

pub fn run(run: &mut Run) {
    let (cfg, prob) = (run.cfg, run.prob);
    let f = prob.nonlinearity("analyze").expect("checked before the run");
    let Some(ctx) = run.stage("context", |_| Ok(AreaContext::new(f, &prob.g, prob.a.as_ref(), prob.p)?)) else {
        return;
    };
    let ls = cfg.l.values();

    let evaluations: Vec<Value> = run
        .stage("area_condition", |run| {
            let mut out = Vec::new();
            let mut indeterminate = Vec::new();
            for &l in &ls {
                let r = check_area_condition(&ctx, l)?;
                if r.verdict == AreaVerdict::Indeterminate {
                    indeterminate.push(l);
                }
                out.push(json!({
                    "L": num(l),
                    "verdict": r.verdict,
                    "area_holds": r.holds(),
                    "margin": num(r.margin),
                    "s_argmin": num(r.s_argmin),
                    "tolerance": num(r.tolerance),
                }));
            }
            if !indeterminate.is_empty() {
                run.record("area_condition", StageStatus::Indeterminate, format!("margin within noise at L = {indeterminate:?}"));
            }
            Ok(out)
        })
        .unwrap_or_default();

    run.stage("area_profile", |run| {
        let mut rows = Vec::new();
        for &l in &ls {
            let prof = area_profile(&ctx, prob.alpha, prob.beta, l, cfg.resolution)?;
            rows.extend(prof.rows().map(|(s, h)| vec![l, s, h]));
        }
        run.out.write_table("area_profile.csv", &["L", "s", "H"], rows)
    });

    let critical = run.stage("critical_L", |_| {
        let t = &cfg.tolerances;
        let c = find_critical_L(&ctx, t.critical_l_lo, t.critical_l_hi, t.critical_l)?;
        Ok(json!({
            "value": if c.infinite { num(f64::INFINITY) } else { num(c.value) },
            "infinite": c.infinite,
            "bracket": [num(c.bracket.0), num(c.bracket.1)],
            "margin_below": num(c.margin_below),
            "margin_above": c.margin_above.map(num),
            "iterations": c.iterations,
        }))
    });

    let flatcore = run.stage("flatcore", |run| {
        let window = cfg.tolerances.flatcore_window.unwrap_or(0.5 * (prob.beta - prob.alpha));
        let r = check_flatcore_criterion(f, prob.p, prob.beta, window);
        if r.verdict == FlatCoreVerdict::Indeterminate {
            run.record("flatcore", StageStatus::Indeterminate, "ratio neither settles nor grows across decades");
        }
        Ok(json!({
            "verdict": r.verdict,
            "bounded": r.bounded,
            "sup_ratio": num(r.sup_ratio),
            "decade_maxima": r.decade_maxima.iter().map(|&x| num(x)).collect::<Vec<_>>(),
            "window": num(window),
        }))
    });

    let first = evaluations.first().cloned().unwrap_or(Value::Null);
    let all_hold = !evaluations.is_empty() && evaluations.iter().all(|e| e["area_holds"] == Value::Bool(true));
    let report = json!({
        "p": num(prob.p),
        "alpha": num(prob.alpha),
        "beta": num(prob.beta),
        "area_holds": if evaluations.is_empty() { Value::Null } else { Value::Bool(all_hold) },
        "margin": first["margin"],
        "s_argmin": first["s_argmin"],
        "verdict": first["verdict"],
        "L_tilde": critical.as_ref().map_or(Value::Null, |c| c["value"].clone()),
        "critical_L": critical.unwrap_or(Value::Null),
        "flatcore_bounded": flatcore.as_ref().map_or(Value::Null, |f| f["bounded"].clone()),
        "flatcore": flatcore.unwrap_or(Value::Null),
        "evaluations": evaluations,
    });
    run.stage("report", |run| run.out.write_json("analyze.json", &report));
}
