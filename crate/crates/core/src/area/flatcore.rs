use serde::{Deserialize, Serialize};

use crate::funcspace::FunctionSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlatCoreVerdict {
    Bounded,
    Unbounded,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatCoreReport {
    pub verdict: FlatCoreVerdict,
    pub bounded: bool,
    /// Largest sampled `|f(s)| / (beta - s)^{p-1}`: the estimate of `M`.
    pub sup_ratio: f64,
    /// Maximum of the ratio within each decade of `beta - s`, outermost first.
    pub decade_maxima: Vec<f64>,
}

const DECADES: usize = 10;
const PER_DECADE: usize = 20;

/// Sample `r(s) = |f(s)| / (beta - s)^{p-1}` on `beta - s = window * 10^{-t}`,
/// `t` in `[0, 10]`, and classify its behaviour as `s -> beta`.
pub fn check_flatcore_criterion(f: &FunctionSpec, p: f64, beta: f64, window: f64) -> FlatCoreReport {
    let mut maxima = vec![0.0f64; DECADES];
    for (d, m) in maxima.iter_mut().enumerate() {
        for j in 0..=PER_DECADE {
            let t = d as f64 + j as f64 / PER_DECADE as f64;
            let s = beta - window * 10f64.powf(-t);
            let gap = beta - s;
            if gap <= 0.0 {
                continue;
            }
            let r = f.value(s).abs() / gap.powf(p - 1.0);
            if r.is_finite() {
                *m = m.max(r);
            } else {
                *m = f64::INFINITY;
            }
        }
    }
    let sup_ratio = maxima.iter().copied().fold(0.0, f64::max);
    let n = maxima.len();
    let (a, b, c) = (maxima[n - 3], maxima[n - 2], maxima[n - 1]);
    let hi = a.max(b).max(c);
    let lo = a.min(b).min(c);
    let floor = 1e-12 * hi;
    let within_two = hi == 0.0 || (lo > 0.0 && hi <= 2.0 * lo);
    let nonincreasing = b <= a + floor && c <= b + floor;
    let shrinking = (c - b).abs() <= 0.5 * (b - a).abs() + floor;
    let verdict = if !hi.is_finite() || (b > 0.0 && c > 2.0 * b) {
        FlatCoreVerdict::Unbounded
    } else if nonincreasing || (within_two && shrinking) {
        FlatCoreVerdict::Bounded
    } else {
        FlatCoreVerdict::Indeterminate
    };
    FlatCoreReport {
        verdict,
        bounded: verdict == FlatCoreVerdict::Bounded,
        sup_ratio,
        decade_maxima: maxima,
    }
}
