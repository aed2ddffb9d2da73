use gradreg::solver::{sweep, SweepBase};

use super::{Run, StageStatus};
use crate::output::fmt_num;

const HEADER: [&str; 11] = [
    "parameter",
    "value",
    "L",
    "p",
    "lambda",
    "lambda_min",
    "lambda_bar_min",
    "maximal_norm",
    "branch_count",
    "l_tilde_margin",
    "error",
];

pub fn run(run: &mut Run) {
    let (cfg, prob) = (run.cfg, run.prob);
    let base = SweepBase {
        f: prob.nonlinearity("sweep").expect("checked before the run").clone(),
        g: prob.g.clone(),
        a: prob.a.clone(),
        p: prob.p,
        l: cfg.scalar_l().expect("checked before the run"),
        lambda: cfg.scalar_lambda().expect("checked before the run"),
        domain: prob.domain,
    };
    let parameter = cfg.vary.expect("checked before the run");
    let grid = cfg.grid.clone().unwrap_or_default();
    let records = sweep(&base, parameter, &grid);
    let failed: Vec<f64> = records.iter().filter(|r| r.error.is_some()).map(|r| r.value).collect();
    run.stage("records", |run| {
        let rows = records.iter().map(|r| {
            vec![
                r.parameter.name().to_string(),
                fmt_num(r.value),
                fmt_num(r.l),
                fmt_num(r.p),
                fmt_num(r.lambda),
                fmt_num(r.lambda_min),
                fmt_num(r.lambda_bar_min),
                fmt_num(r.maximal_norm),
                r.branch_count.to_string(),
                fmt_num(r.l_tilde_margin),
                r.error.clone().unwrap_or_default(),
            ]
        });
        run.out.write_csv("sweep.csv", &HEADER, rows)
    });
    if !failed.is_empty() {
        run.record("sweep", StageStatus::Failed, format!("errors at {} = {failed:?}", parameter.name()));
    }
}
