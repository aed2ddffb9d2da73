use serde::{Deserialize, Serialize};

use crate::numerics::logspace::LogScaled;

use super::{extrema_of, AreaContext, AreaError, DEFAULT_RESOLUTION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AreaVerdict {
    Holds,
    Fails,
    /// `|margin|` is below the quadrature noise level.
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub verdict: AreaVerdict,
    /// `min_{s in [0, alpha]} H(s, L)` with `gamma2 = beta`, plain units.
    pub margin: f64,
    pub margin_log: LogScaled,
    pub s_argmin: f64,
    /// Band below which `|margin|` is indeterminate.
    pub tolerance: f64,
    /// Right windows `beta - delta` excluded during the stability check.
    pub deltas: Vec<f64>,
}

impl ConditionReport {
    pub fn holds(&self) -> bool {
        self.verdict == AreaVerdict::Holds
    }
}

fn classify(value: f64, tol: f64) -> AreaVerdict {
    if value.abs() <= tol {
        AreaVerdict::Indeterminate
    } else if value > 0.0 {
        AreaVerdict::Holds
    } else {
        AreaVerdict::Fails
    }
}

/// Whether `integral_s^beta w > 0` for every `s` in `[0, beta)`.
///
/// The infimum is taken over `[0, beta - delta]` for a halving sequence of
/// windows until three consecutive verdicts agree.
pub fn check_area_condition(ctx: &AreaContext, l: f64) -> Result<ConditionReport, AreaError> {
    let alpha = ctx.alpha();
    let beta = ctx.beta();
    let weight = ctx.weight(l, beta)?;
    let base = extrema_of(&weight, alpha, DEFAULT_RESOLUTION);
    let mut deltas = Vec::new();
    let mut verdicts = Vec::new();
    let mut tol = 0.0f64;
    let mut delta = 0.5 * (beta - alpha);
    for _ in 0..16 {
        let ext = extrema_of(&weight, beta - delta, DEFAULT_RESOLUTION);
        tol = 1e-11 * ext.h_max.mantissa.abs().max(base.h_max.mantissa.abs());
        deltas.push(delta);
        verdicts.push(classify(ext.h_min.mantissa, tol));
        let n = verdicts.len();
        if n >= 4 && verdicts[n - 4..].iter().all(|v| *v == verdicts[n - 1]) {
            break;
        }
        delta *= 0.5;
    }
    let windowed = *verdicts.last().unwrap();
    let verdict = match (windowed, classify(base.h_min.mantissa, tol)) {
        (a, b) if a == b => a,
        // A vanishing window minimum with a positive base margin is the forced zero at beta.
        (AreaVerdict::Indeterminate, AreaVerdict::Holds) => AreaVerdict::Holds,
        _ => AreaVerdict::Indeterminate,
    };
    let scale = weight.log_scale().exp();
    Ok(ConditionReport {
        verdict,
        margin: base.h_min.value(),
        margin_log: base.h_min,
        s_argmin: base.s_argmin,
        tolerance: tol * scale,
        deltas,
    })
}

/// The supremum `L~` of gradient strengths for which the area condition holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalL {
    /// `+inf` when `f >= 0`.
    pub value: f64,
    pub infinite: bool,
    pub bracket: (f64, f64),
    /// `h_min` at the lower end of the bracket (positive).
    pub margin_below: f64,
    /// `h_min` at the upper end (negative); absent when infinite.
    pub margin_above: Option<f64>,
    pub expansions: usize,
    pub iterations: usize,
}

const EXPANSION_BUDGET: usize = 80;

/// Locate `L~` by bisection on the sign of `h_min(L)`.
#[allow(non_snake_case)]
pub fn find_critical_L(ctx: &AreaContext, lo_hint: f64, hi_hint: f64, tol_l: f64) -> Result<CriticalL, AreaError> {
    if !(lo_hint < hi_hint) || !(tol_l > 0.0) {
        return Err(AreaError::Parameter(format!(
            "need lo_hint < hi_hint and tol_L > 0, got ({lo_hint}, {hi_hint}), {tol_l}"
        )));
    }
    let alpha = ctx.alpha();
    let beta = ctx.beta();
    let margin = |l: f64| -> Result<LogScaled, AreaError> {
        let w = ctx.weight(l, beta)?;
        Ok(extrema_of(&w, alpha, DEFAULT_RESOLUTION).h_min)
    };
    let nonnegative = (0..=4096).all(|i| ctx.f().value(beta * i as f64 / 4096.0) >= 0.0);
    if nonnegative {
        return Ok(CriticalL {
            value: f64::INFINITY,
            infinite: true,
            bracket: (lo_hint, f64::INFINITY),
            margin_below: margin(lo_hint)?.value(),
            margin_above: None,
            expansions: 0,
            iterations: 0,
        });
    }

    let mut expansions = 0;
    let mut lo = lo_hint;
    let mut m_lo = margin(lo)?;
    let mut step = (hi_hint - lo_hint).max(1.0);
    while m_lo.mantissa <= 0.0 {
        if expansions == EXPANSION_BUDGET {
            let m_hi = margin(hi_hint)?;
            return Err(AreaError::Bracket {
                expansions,
                lo,
                hi: hi_hint,
                margin_lo: m_lo.value(),
                margin_hi: m_hi.value(),
            });
        }
        lo -= step;
        step *= 2.0;
        expansions += 1;
        m_lo = margin(lo)?;
    }
    let mut hi = hi_hint;
    let mut m_hi = margin(hi)?;
    let mut step = (hi_hint - lo_hint).max(1.0);
    while m_hi.mantissa >= 0.0 {
        if expansions == EXPANSION_BUDGET {
            return Err(AreaError::Bracket {
                expansions,
                lo,
                hi,
                margin_lo: m_lo.value(),
                margin_hi: m_hi.value(),
            });
        }
        hi += step;
        step *= 2.0;
        expansions += 1;
        m_hi = margin(hi)?;
    }

    let mut iterations = 0;
    while hi - lo > tol_l {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let m = margin(mid)?;
        if m.mantissa > 0.0 {
            lo = mid;
            m_lo = m;
        } else {
            hi = mid;
            m_hi = m;
        }
        iterations += 1;
    }
    Ok(CriticalL {
        value: 0.5 * (lo + hi),
        infinite: false,
        bracket: (lo, hi),
        margin_below: m_lo.value(),
        margin_above: Some(m_hi.value()),
        expansions,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::area::scan_h_min;
    use crate::funcspace::{presets, FunctionSpec};
    use crate::numerics::quad::{integrate, QuadOptions};

    fn ctx(f: FunctionSpec) -> AreaContext {
        AreaContext::new(&f, &presets::g_one(2.0), None, 2.0).unwrap()
    }

    #[test]
    fn verdicts() {
        let pos = ctx(presets::f_pos());
        for l in [-5.0, -1.0, 0.0, 1.0, 5.0] {
            let r = check_area_condition(&pos, l).unwrap();
            assert_eq!(r.verdict, AreaVerdict::Holds);
            assert!(r.margin > 0.0);
        }
        let sign = ctx(presets::f_sign());
        assert_eq!(check_area_condition(&sign, 0.5).unwrap().verdict, AreaVerdict::Fails);
        assert!(check_area_condition(&sign, 0.5).unwrap().margin < 0.0);
        assert_eq!(check_area_condition(&sign, -0.5).unwrap().verdict, AreaVerdict::Holds);
        assert_eq!(check_area_condition(&sign, 0.0).unwrap().verdict, AreaVerdict::Indeterminate);
    }

    #[test]
    fn classical_condition_without_gradient_term() {
        // With L = 0 the verdict must match a direct quadrature of integral_s^beta f.
        let cases = [
            ("(s-1)*(2-s)*(s-0.1)", true),
            ("(s-1)*(2-s)*(s+0.2)", false),
        ];
        for (text, expected) in cases {
            let f = FunctionSpec::nonlinearity(text, 1.0, 2.0).unwrap();
            let c = ctx(f.clone());
            let direct_min = (0..=400)
                .map(|i| 1.0 * i as f64 / 400.0)
                .map(|s| integrate(|x| f.value(x), s, 2.0, &QuadOptions::default()).unwrap().value)
                .fold(f64::INFINITY, f64::min);
            let r = check_area_condition(&c, 0.0).unwrap();
            assert_eq!(r.holds(), direct_min > 0.0, "{text}");
            assert_eq!(r.holds(), expected);
        }
    }

    #[test]
    fn critical_l_for_presets() {
        let pos = find_critical_L(&ctx(presets::f_pos()), -1.0, 1.0, 1e-6).unwrap();
        assert!(pos.infinite && pos.value.is_infinite());
        let sign = find_critical_L(&ctx(presets::f_sign()), -1.0, 1.0, 1e-6).unwrap();
        assert!(sign.value.abs() <= 1e-5, "{sign:?}");
        assert!(sign.bracket.1 - sign.bracket.0 <= 1e-6);
        let shifted = find_critical_L(&ctx(presets::f_sign()), 3.0, 4.0, 1e-6).unwrap();
        assert!(shifted.value.abs() <= 1e-5 && shifted.expansions > 0);
    }

    #[test]
    fn single_sign_change_over_l() {
        let c = ctx(presets::f_sign());
        let ls: Vec<f64> = (0..40).map(|i| -2.0 + 4.0 * i as f64 / 39.0).collect();
        let m = scan_h_min(&c, &ls, 256).unwrap();
        let signs: Vec<bool> = m.iter().map(|h| h.mantissa > 0.0).collect();
        let changes = signs.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(changes, 1);
        assert!(signs[0] && !signs[39]);
    }

    #[test]
    fn scaling_leaves_critical_l_unchanged() {
        let a = find_critical_L(&ctx(presets::f_sign()), -1.0, 1.0, 1e-6).unwrap();
        let b = find_critical_L(&ctx(presets::f_sign().scaled(7.0)), -1.0, 1.0, 1e-6).unwrap();
        assert!((a.value - b.value).abs() <= 1e-6);
        let r1 = check_area_condition(&ctx(presets::f_sign()), -0.3).unwrap();
        let r7 = check_area_condition(&ctx(presets::f_sign().scaled(7.0)), -0.3).unwrap();
        assert_eq!(r1.verdict, r7.verdict);
        assert!((r7.margin / r1.margin - 7.0).abs() <= 7e-12);
    }
}
