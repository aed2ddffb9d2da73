use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::area::{check_area_condition, AreaContext};
use crate::funcspace::FunctionSpec;

use super::extremal::{lambda_bar_min, lambda_min, maximal_from_curve};
use super::reduced::reduce;
use super::timemap::{build_time_map, find_branches, TimeMapCurve, DEFAULT_RHO_RESOLUTION};
use super::{DomainSpec, SolverError};

/// Fixed inputs of a sweep; the varied one is overwritten per grid point.
#[derive(Debug, Clone)]
pub struct SweepBase {
    pub f: FunctionSpec,
    pub g: FunctionSpec,
    pub a: Option<FunctionSpec>,
    pub p: f64,
    pub l: f64,
    pub lambda: f64,
    pub domain: DomainSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    #[serde(rename = "L")]
    L,
    #[serde(rename = "p")]
    P,
    #[serde(rename = "lambda")]
    Lambda,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::L => "L",
            SweepParameter::P => "p",
            SweepParameter::Lambda => "lambda",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub parameter: SweepParameter,
    pub value: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub p: f64,
    pub lambda: f64,
    /// NaN when the area condition fails or the point errored.
    pub lambda_min: f64,
    pub lambda_bar_min: f64,
    /// Maximum of the maximal solution; NaN when there is none.
    pub maximal_norm: f64,
    pub branch_count: usize,
    /// Area-condition margin `min_s H(s, L)` at this `(L, p)`.
    pub l_tilde_margin: f64,
    pub error: Option<String>,
}

impl SweepRecord {
    fn empty(parameter: SweepParameter, value: f64, l: f64, p: f64, lambda: f64) -> Self {
        Self {
            parameter,
            value,
            l,
            p,
            lambda,
            lambda_min: f64::NAN,
            lambda_bar_min: f64::NAN,
            maximal_norm: f64::NAN,
            branch_count: 0,
            l_tilde_margin: f64::NAN,
            error: None,
        }
    }
}

fn record_errors(rec: &mut SweepRecord, err: SolverError) {
    let msg = err.to_string();
    rec.error = Some(match rec.error.take() {
        Some(prev) => format!("{prev}; {msg}"),
        None => msg,
    });
}

fn fill(base: &SweepBase, rec: &mut SweepRecord, curve: Option<&TimeMapCurve>) {
    match AreaContext::new(&base.f, &base.g, base.a.as_ref(), rec.p).and_then(|ctx| check_area_condition(&ctx, rec.l)) {
        Ok(r) => rec.l_tilde_margin = r.margin,
        Err(e) => record_errors(rec, e.into()),
    }
    let result = (|| -> Result<(), SolverError> {
        let prob = reduce(&base.f, &base.g, base.a.as_ref(), rec.p, rec.l)?;
        let owned;
        let curve = match curve {
            Some(c) => c,
            None => {
                owned = build_time_map(&prob, &base.domain, DEFAULT_RHO_RESOLUTION)?;
                &owned
            }
        };
        if let Ok(m) = lambda_min(&prob, curve) {
            rec.lambda_min = m.value;
        }
        if let Ok(b) = lambda_bar_min(&prob, curve) {
            rec.lambda_bar_min = b;
        }
        rec.branch_count = find_branches(&prob, curve, rec.lambda).len();
        if let Some(prof) = maximal_from_curve(&prob, curve, rec.lambda)? {
            rec.maximal_norm = prof.sup_norm;
        }
        Ok(())
    })();
    if let Err(e) = result {
        record_errors(rec, e);
    }
}

/// One record per grid value; failures are stored in the record and the
/// sweep continues.
pub fn sweep(base: &SweepBase, parameter: SweepParameter, grid: &[f64]) -> Vec<SweepRecord> {
    if grid.is_empty() {
        return Vec::new();
    }
    let shared = if parameter == SweepParameter::Lambda {
        reduce(&base.f, &base.g, base.a.as_ref(), base.p, base.l)
            .and_then(|prob| build_time_map(&prob, &base.domain, DEFAULT_RHO_RESOLUTION))
            .ok()
    } else {
        None
    };
    grid.par_iter()
        .map(|&value| {
            let (l, p, lambda) = match parameter {
                SweepParameter::L => (value, base.p, base.lambda),
                SweepParameter::P => (base.l, value, base.lambda),
                SweepParameter::Lambda => (base.l, base.p, value),
            };
            let mut rec = SweepRecord::empty(parameter, value, l, p, lambda);
            fill(base, &mut rec, shared.as_ref());
            rec
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::presets::{f_pos, f_sign, g_one};

    fn base(f: FunctionSpec, p: f64, l: f64, lambda: f64) -> SweepBase {
        SweepBase {
            f,
            g: g_one(2.0),
            a: None,
            p,
            l,
            lambda,
            domain: DomainSpec::interval(1.0).unwrap(),
        }
    }

    #[test]
    fn empty_grid_gives_no_records() {
        assert!(sweep(&base(f_pos(), 2.0, -1.0, 50.0), SweepParameter::L, &[]).is_empty());
    }

    #[test]
    fn maximal_norm_grows_as_l_decreases() {
        let recs = sweep(&base(f_pos(), 2.0, -1.0, 50.0), SweepParameter::L, &[-1.0, -2.0, -4.0]);
        assert_eq!(recs.len(), 3);
        assert!(recs.iter().all(|r| r.error.is_none() && r.branch_count >= 1));
        assert!(recs.windows(2).all(|w| w[1].maximal_norm > w[0].maximal_norm));
        assert_eq!(recs[1].l, -2.0);
        assert_eq!(recs[1].parameter.name(), "L");
    }

    #[test]
    fn margin_turns_negative_as_p_decreases() {
        let recs = sweep(&base(f_sign(), 2.0, 1.0, 50.0), SweepParameter::P, &[1.8, 1.4, 1.2, 1.1, 1.05]);
        assert!(recs.iter().any(|r| r.l_tilde_margin < 0.0));
        assert!(recs.iter().all(|r| r.l_tilde_margin.is_finite()));
    }

    #[test]
    fn failures_are_recorded_and_the_sweep_continues() {
        let recs = sweep(&base(f_pos(), 2.0, -1.0, 50.0), SweepParameter::P, &[0.5, 2.0]);
        assert!(recs[0].error.is_some());
        assert!(recs[1].error.is_none());
        assert!(recs[1].maximal_norm.is_finite());
    }

    #[test]
    fn lambda_sweep_reuses_the_curve() {
        let recs = sweep(&base(f_pos(), 2.0, -3.0, 50.0), SweepParameter::Lambda, &[50.0, 100.0, 200.0, 400.0]);
        assert!(recs.windows(2).all(|w| w[1].maximal_norm >= w[0].maximal_norm));
        assert!(recs.iter().all(|r| r.lambda_min == recs[0].lambda_min));
    }

    #[test]
    fn records_serialize_with_parameter_names() {
        let recs = sweep(&base(f_pos(), 2.0, -1.0, 50.0), SweepParameter::Lambda, &[50.0]);
        let json = serde_json::to_string(&recs[0]).unwrap();
        assert!(json.contains("\"parameter\":\"lambda\""));
        assert!(json.contains("\"L\":-1"));
    }
}
