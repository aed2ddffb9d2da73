use crate::funcspace::FunctionSpec;
use crate::numerics::cheb::{ChebOptions, ChebTable};

use super::TransformError;

/// The `L`-independent ingredients of the transform: `g`, the optional
/// diffusion `a`, and `G_a(s) = integral_0^s g/a`, tabulated on `[0, hi]`.
#[derive(Debug, Clone)]
pub struct Coefficients {
    g: FunctionSpec,
    a: Option<FunctionSpec>,
    hi: f64,
    ghat: ChebTable,
    ln_a: Option<ChebTable>,
}

impl Coefficients {
    pub fn new(g: &FunctionSpec, a: Option<&FunctionSpec>, hi: f64) -> Result<Self, TransformError> {
        if !(hi > 0.0 && hi.is_finite()) {
            return Err(TransformError::Parameter(format!("upper end must be positive, got {hi}")));
        }
        let ln_a = match a {
            Some(a) => {
                for i in 0..=1024 {
                    let s = hi * i as f64 / 1024.0;
                    let v = a.value(s);
                    if !(v > 0.0) {
                        return Err(TransformError::Parameter(format!(
                            "diffusion must be positive, a({s}) = {v}"
                        )));
                    }
                }
                Some(ChebTable::build(|s| a.value(s).ln(), 0.0, hi, &ChebOptions::default())?)
            }
            None => None,
        };
        let opts = ChebOptions::default();
        let ratio = ChebTable::build(
            |s| match a {
                Some(a) => g.value(s) / a.value(s),
                None => g.value(s),
            },
            0.0,
            hi,
            &opts,
        )?;
        Ok(Self {
            g: g.clone(),
            a: a.cloned(),
            hi,
            ghat: ratio.antiderivative(),
            ln_a,
        })
    }

    pub fn g(&self) -> &FunctionSpec {
        &self.g
    }

    pub fn a(&self) -> Option<&FunctionSpec> {
        self.a.as_ref()
    }

    pub fn upper(&self) -> f64 {
        self.hi
    }

    /// `integral_0^s g/a` (equals `G(s)` when `a` is absent).
    pub fn ghat(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        self.ghat.eval(s)
    }

    /// `ln a(s)`, zero when `a` is absent.
    pub fn ln_a(&self, s: f64) -> f64 {
        self.ln_a.as_ref().map_or(0.0, |t| t.eval(s))
    }

    /// `ln Psi_L'(s) = (ln a(s) - L G_a(s)) / (p - 1)`.
    pub fn log_dpsi(&self, p: f64, l: f64, s: f64) -> f64 {
        (self.ln_a(s) - l * self.ghat(s)) / (p - 1.0)
    }

    /// Exponent of the area weight without `f`:
    /// `ln a(s)/(p-1) - p/(p-1) L G_a(s)`.
    pub fn log_area_weight(&self, p: f64, l: f64, s: f64) -> f64 {
        (self.ln_a(s) - p * l * self.ghat(s)) / (p - 1.0)
    }

    /// Chebyshev options whose tolerance sits above the rounding noise of
    /// `exp(phi)` when `|phi|` reaches `exponent`.
    pub(crate) fn table_options(exponent: f64) -> ChebOptions {
        let noise = 16.0 * f64::EPSILON * (1.0 + exponent.abs());
        ChebOptions {
            rel_tol: noise.max(ChebOptions::default().rel_tol),
            ..ChebOptions::default()
        }
    }

    /// Maximum of `phi` over a uniform sample of `[lo, hi]`.
    pub(crate) fn sampled_max(lo: f64, hi: f64, phi: impl Fn(f64) -> f64) -> (f64, f64) {
        let n = 2048;
        let mut best = (lo, f64::NEG_INFINITY);
        for i in 0..=n {
            let s = lo + (hi - lo) * i as f64 / n as f64;
            let v = phi(s);
            if v > best.1 {
                best = (s, v);
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::presets;

    #[test]
    fn ghat_of_constant_and_schrodinger() {
        let c = Coefficients::new(&presets::g_one(2.0), None, 2.0).unwrap();
        assert!((c.ghat(1.3) - 1.3).abs() < 1e-14);
        assert_eq!(c.ghat(0.0), 0.0);
        let (a, g) = presets::a_schrod(2.0, 2.0, 2.0);
        let c = Coefficients::new(&g, Some(&a), 2.0).unwrap();
        // g/a = 2s/(1+2s^2) integrates to ln(1+2s^2)/2.
        for s in [0.1, 0.7, 1.5, 2.0] {
            let exact = 0.5 * (1.0f64 + 2.0 * s * s).ln();
            assert!((c.ghat(s) - exact).abs() < 1e-13);
            assert!((c.ln_a(s) - (1.0f64 + 2.0 * s * s).ln()).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_nonpositive_diffusion() {
        let a = FunctionSpec::diffusion("s - 1", 2.0).unwrap();
        let err = Coefficients::new(&presets::g_one(2.0), Some(&a), 2.0).unwrap_err();
        assert!(matches!(err, TransformError::Parameter(_)));
    }
}
