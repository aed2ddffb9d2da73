use gradreg::transform::{build_psi, transformed_nonlinearity};

use super::Run;

pub fn run(run: &mut Run) {
    let (cfg, prob) = (run.cfg, run.prob);
    let f = prob.nonlinearity("transform").expect("checked before the run");
    let l = cfg.scalar_l().expect("checked before the run");
    let Some(table) = run.stage("psi", |_| Ok(build_psi(&prob.g, prob.a.as_ref(), prob.p, l, prob.beta, cfg.tolerances.transform)?)) else {
        return;
    };
    let Some(tn) = run.stage("nonlinearity", |_| Ok(transformed_nonlinearity(f, &table)?)) else {
        return;
    };
    run.stage("table", |run| {
        let rows = tn.sample(cfg.resolution).into_iter().map(|r| vec![r.s, r.psi, r.dpsi, r.ftilde]);
        run.out.write_table("transform.csv", &["s", "psi", "dpsi", "ftilde"], rows)
    });
}
