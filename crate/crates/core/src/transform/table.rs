use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::funcspace::FunctionSpec;
use crate::numerics::cheb::ChebTable;
use crate::solver::{SolutionProfile, Variable};

use super::{Coefficients, TransformError, MAX_EXPONENT};

/// Tabulated `Psi_L(s) = integral_0^s a^{1/(p-1)} exp(-L G_a/(p-1))` on `[0, beta]`.
#[derive(Debug, Clone)]
pub struct TransformTable {
    coeffs: Arc<Coefficients>,
    p: f64,
    l: f64,
    beta: f64,
    tol: f64,
    dpsi: ChebTable,
    psi: ChebTable,
    psi_breaks: Vec<f64>,
}

/// One exported row of a transform table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformRow {
    pub s: f64,
    pub psi: f64,
    pub dpsi: f64,
}

/// Build the transform for `g` (and optional diffusion `a`) on `[0, beta]`.
pub fn build_psi(
    g: &FunctionSpec,
    a: Option<&FunctionSpec>,
    p: f64,
    l: f64,
    beta: f64,
    tol: f64,
) -> Result<TransformTable, TransformError> {
    let coeffs = Arc::new(Coefficients::new(g, a, beta)?);
    TransformTable::new(coeffs, p, l, tol)
}

impl TransformTable {
    pub fn new(coeffs: Arc<Coefficients>, p: f64, l: f64, tol: f64) -> Result<Self, TransformError> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(TransformError::Parameter(format!("p must exceed 1, got {p}")));
        }
        if !l.is_finite() || !(tol > 0.0) {
            return Err(TransformError::Parameter(format!("bad L = {l} or tol = {tol}")));
        }
        let beta = coeffs.upper();
        let (s_max, e_max) = Coefficients::sampled_max(0.0, beta, |s| coeffs.log_dpsi(p, l, s));
        if e_max > MAX_EXPONENT {
            return Err(TransformError::Overflow { s: s_max, exponent: e_max });
        }
        let span = (l * coeffs.ghat(beta) / (p - 1.0)).abs();
        let opts = Coefficients::table_options(span);
        let dpsi = ChebTable::build(|s| coeffs.log_dpsi(p, l, s).exp(), 0.0, beta, &opts)?;
        let psi = dpsi.antiderivative();
        let mut psi_breaks = psi.break_values();
        psi_breaks[0] = 0.0;
        for i in 1..psi_breaks.len() {
            if !(psi_breaks[i] > psi_breaks[i - 1]) {
                return Err(TransformError::Parameter(format!(
                    "Psi is not strictly increasing near s = {}",
                    psi.breaks()[i]
                )));
            }
        }
        Ok(Self {
            coeffs,
            p,
            l,
            beta,
            tol,
            dpsi,
            psi,
            psi_breaks,
        })
    }

    pub fn coefficients(&self) -> &Arc<Coefficients> {
        &self.coeffs
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// `Psi(s)` for `s` in `[0, beta]` (clamped).
    pub fn psi(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        self.psi.eval(s)
    }

    /// `Psi'(s)`.
    pub fn dpsi(&self, s: f64) -> f64 {
        self.dpsi.eval(s)
    }

    /// `Psi(beta)`.
    pub fn psi_max(&self) -> f64 {
        *self.psi_breaks.last().unwrap()
    }

    /// `Psi(b) - Psi(a)` without cancellation for nearby arguments.
    pub fn psi_between(&self, a: f64, b: f64) -> f64 {
        self.dpsi.integrate(a, b)
    }

    /// Panel boundaries of the table.
    pub fn s_grid(&self) -> &[f64] {
        self.psi.breaks()
    }

    pub fn psi_values(&self) -> &[f64] {
        &self.psi_breaks
    }

    pub fn dpsi_values(&self) -> Vec<f64> {
        self.s_grid().iter().map(|&s| self.dpsi(s)).collect()
    }

    /// `Psi^{-1}(v)` by safeguarded Newton inside the bracketing panel;
    /// `|Psi(s) - v| <= tol * max(1, v)` on return.
    pub fn psi_inverse(&self, v: f64) -> Result<f64, TransformError> {
        let top = self.psi_max();
        let slack = self.tol.max(4.0 * f64::EPSILON * top);
        if !(v >= -slack && v <= top + slack) {
            return Err(TransformError::OutOfRange { value: v, lo: 0.0, hi: top });
        }
        if v <= 0.0 {
            return Ok(0.0);
        }
        if v >= top {
            return Ok(self.beta);
        }
        let i = self.psi_breaks.partition_point(|&b| b <= v).clamp(1, self.psi_breaks.len() - 1);
        let breaks = self.psi.breaks();
        let (mut lo, mut hi) = (breaks[i - 1], breaks[i]);
        if self.psi_breaks[i - 1] == v {
            return Ok(lo);
        }
        let mut s = lo + (hi - lo) * (v - self.psi_breaks[i - 1]) / (self.psi_breaks[i] - self.psi_breaks[i - 1]);
        for _ in 0..100 {
            let r = self.psi.eval(s) - v;
            if r == 0.0 {
                return Ok(s);
            }
            if r > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            let mut next = s - r / self.dpsi.eval(s);
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - s).abs() <= 2.0 * f64::EPSILON * s.abs() || hi - lo <= 2.0 * f64::EPSILON * hi {
                return Ok(next);
            }
            s = next;
        }
        Ok(s)
    }

    /// `n` uniformly spaced rows over `[0, beta]`.
    pub fn sample(&self, n: usize) -> Vec<TransformRow> {
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let s = if i + 1 == n { self.beta } else { self.beta * i as f64 / (n - 1) as f64 };
                TransformRow {
                    s,
                    psi: self.psi(s),
                    dpsi: self.dpsi(s),
                }
            })
            .collect()
    }
}

fn map_profile(
    profile: &SolutionProfile,
    from: Variable,
    to: Variable,
    lo: f64,
    hi: f64,
    slack: f64,
    f: impl Fn(f64) -> Result<f64, TransformError>,
) -> Result<SolutionProfile, TransformError> {
    if profile.variable != from {
        return Err(TransformError::Parameter(format!(
            "expected a profile in the {from:?} variable, got {:?}",
            profile.variable
        )));
    }
    let values = profile
        .values
        .iter()
        .map(|&u| {
            if !(u >= lo - slack && u <= hi + slack) {
                return Err(TransformError::OutOfRange { value: u, lo, hi });
            }
            f(u.clamp(lo, hi))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let sup_norm = f(profile.sup_norm.clamp(lo, hi))?;
    Ok(SolutionProfile {
        variable: to,
        values,
        sup_norm,
        ..profile.clone()
    })
}

/// Apply `Psi` pointwise to a profile of `u` values in `[0, beta]`.
pub fn pushforward_solution(u: &SolutionProfile, table: &TransformTable) -> Result<SolutionProfile, TransformError> {
    map_profile(u, Variable::Original, Variable::Transformed, 0.0, table.beta(), table.tol(), |s| Ok(table.psi(s)))
}

/// Apply `Psi^{-1}` pointwise to a profile of `v` values in `[0, Psi(beta)]`.
pub fn pullback_solution(v: &SolutionProfile, table: &TransformTable) -> Result<SolutionProfile, TransformError> {
    map_profile(v, Variable::Transformed, Variable::Original, 0.0, table.psi_max(), table.tol(), |x| {
        table.psi_inverse(x)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::presets;
    use crate::solver::DomainSpec;
    use proptest::prelude::*;

    fn table(g: &FunctionSpec, p: f64, l: f64) -> TransformTable {
        build_psi(g, None, p, l, 2.0, 1e-10).unwrap()
    }

    #[test]
    fn identity_without_gradient_term() {
        for p in [1.5, 2.0, 3.0] {
            let t = table(&presets::g_zero(2.0), p, 3.0);
            assert!((t.psi(1.5) - 1.5).abs() <= 1e-12);
            let t = table(&presets::g_one(2.0), p, 0.0);
            assert!((t.psi(1.5) - 1.5).abs() <= 1e-12);
        }
    }

    #[test]
    fn exponential_closed_forms() {
        let g = presets::g_one(2.0);
        let minus = table(&g, 2.0, -1.0);
        let plus = table(&g, 2.0, 1.0);
        assert!((minus.psi(1.0) - (std::f64::consts::E - 1.0)).abs() <= 1e-9);
        assert!((plus.psi(2.0) - (1.0 - (-2.0f64).exp())).abs() <= 1e-9);
        assert!((minus.dpsi(0.5) - 0.5f64.exp()).abs() <= 1e-12);
    }

    #[test]
    fn inverse_closed_form_and_endpoints() {
        let t = table(&presets::g_one(2.0), 2.0, -1.0);
        assert_eq!(t.psi_inverse(0.0).unwrap(), 0.0);
        assert!((t.psi_inverse(std::f64::consts::E - 1.0).unwrap() - 1.0).abs() <= 1e-8);
        assert!((t.psi_inverse(t.psi_max()).unwrap() - 2.0).abs() <= 1e-8);
        assert!(matches!(t.psi_inverse(-1.0), Err(TransformError::OutOfRange { .. })));
        assert!(matches!(t.psi_inverse(t.psi_max() + 1.0), Err(TransformError::OutOfRange { .. })));
    }

    #[test]
    fn table_invariants() {
        for l in [-4.0, -1.0, 0.5, 3.0] {
            let t = table(&presets::g_lin(2.0), 2.5, l);
            let s = t.s_grid();
            let v = t.psi_values();
            assert_eq!(v[0], 0.0);
            assert!(v.windows(2).all(|w| w[1] > w[0]));
            for (&si, dv) in s.iter().zip(t.dpsi_values()) {
                let exact = (-l * (0.5 * si * si + si) / 1.5).exp();
                assert!((dv - exact).abs() <= 1e-10 * exact.max(1.0));
                assert!((t.psi_inverse(t.psi(si)).unwrap() - si).abs() <= 10.0 * t.tol());
            }
            // Finite-difference slope against tabulated derivative.
            let h = 1e-5;
            for i in 1..20 {
                let x = 0.1 * i as f64;
                let fd = (t.psi(x + h) - t.psi(x - h)) / (2.0 * h);
                assert!((fd - t.dpsi(x)).abs() <= 100.0 * t.tol() * t.dpsi(x).max(1.0));
            }
        }
    }

    #[test]
    fn overflow_is_reported() {
        let err = build_psi(&presets::g_one(2.0), None, 2.0, -1000.0, 2.0, 1e-10).unwrap_err();
        match err {
            TransformError::Overflow { s, .. } => assert_eq!(s, 2.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn norm_equivalence() {
        let t = table(&presets::g_one(2.0), 2.0, -2.0);
        let (pa, pb) = (t.psi(1.0), t.psi(2.0));
        for i in 0..=200 {
            let u = 0.01 * i as f64;
            let inside = (1.0..=2.0).contains(&u);
            let v = t.psi(u);
            assert_eq!(inside, v >= pa && v <= pb, "u = {u}");
        }
    }

    fn profile(values: Vec<f64>) -> SolutionProfile {
        let n = values.len();
        let x = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        SolutionProfile::new(DomainSpec::interval(1.0).unwrap(), Variable::Original, x, values, 1.0, -1.0, 2.0)
    }

    #[test]
    fn push_and_pull_profiles() {
        let t = table(&presets::g_one(2.0), 2.0, -1.0);
        let zero = pushforward_solution(&profile(vec![0.0; 5]), &t).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0));
        let top = pushforward_solution(&profile(vec![2.0; 5]), &t).unwrap();
        assert!(top.values.iter().all(|&v| v == t.psi_max()));
        let u: Vec<f64> = (0..101).map(|i| 2.0 * (std::f64::consts::PI * i as f64 / 100.0).sin()).collect();
        let u = profile(u.into_iter().map(|x| x.max(0.0)).collect());
        let v = pushforward_solution(&u, &t).unwrap();
        assert!((v.sup_norm - t.psi(u.sup_norm)).abs() <= t.tol());
        let back = pullback_solution(&v, &t).unwrap();
        for (a, b) in back.values.iter().zip(&u.values) {
            assert!((a - b).abs() <= 10.0 * t.tol());
        }
        assert!(pushforward_solution(&profile(vec![0.0, 2.5]), &t).is_err());
        assert!(pullback_solution(&u, &t).is_err());
    }

    proptest! {
        #[test]
        fn inverse_is_monotone_and_accurate(a in 0.0f64..1.0, b in 0.0f64..1.0, l in -6.0f64..6.0) {
            let t = table(&presets::g_lin(2.0), 2.0, l);
            let (va, vb) = (a.min(b) * t.psi_max(), a.max(b) * t.psi_max());
            let (sa, sb) = (t.psi_inverse(va).unwrap(), t.psi_inverse(vb).unwrap());
            prop_assert!(sa <= sb);
            prop_assert!((t.psi(sa) - va).abs() <= t.tol() * va.max(1.0));
        }
    }
}
