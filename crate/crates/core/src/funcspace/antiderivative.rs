use std::collections::HashMap;
use std::sync::Mutex;

use crate::numerics::quad::{integrate_panels, kronrod15, Panel, QuadError, QuadOptions};

use super::spec::FunctionSpec;

/// `G(s) = integral_0^s g` for a [`FunctionSpec`] over its domain.
///
/// Built once by adaptive Gauss–Kronrod subdivision to an absolute
/// tolerance; evaluations reuse the accepted panels plus one 15-point rule on
/// the partial panel. Results are memoized per argument.
#[derive(Debug)]
pub struct Antiderivative {
    base: FunctionSpec,
    tol: f64,
    panels: Vec<Panel>,
    prefix: Vec<f64>,
    cache: Mutex<HashMap<u64, f64>>,
}

impl Clone for Antiderivative {
    fn clone(&self) -> Self {
        Self {
            base: self.base.clone(),
            tol: self.tol,
            panels: self.panels.clone(),
            prefix: self.prefix.clone(),
            cache: Mutex::new(HashMap::new()),
        }
    }
}

impl Antiderivative {
    pub fn new(base: &FunctionSpec, tol: f64) -> Result<Self, QuadError> {
        let (lo, hi) = base.domain();
        let opts = QuadOptions {
            abs_tol: 0.5 * tol,
            rel_tol: 0.0,
            max_panels: 20_000,
        };
        let (_, panels) = integrate_panels(|s| base.value(s), lo, hi, &opts)?;
        let mut prefix = Vec::with_capacity(panels.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for p in &panels {
            acc += p.value;
            prefix.push(acc);
        }
        Ok(Self {
            base: base.clone(),
            tol,
            panels,
            prefix,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn base(&self) -> &FunctionSpec {
        &self.base
    }

    pub fn panel_count(&self) -> usize {
        self.panels.len()
    }

    /// `G(s)`, with `s` clamped to the domain. `G(0) = 0` exactly.
    pub fn eval(&self, s: f64) -> f64 {
        let (lo, hi) = self.base.domain();
        let s = s.clamp(lo, hi);
        if s == lo {
            return 0.0;
        }
        if let Some(v) = self.cache.lock().unwrap().get(&s.to_bits()) {
            return *v;
        }
        let v = self.compute(s);
        self.cache.lock().unwrap().insert(s.to_bits(), v);
        v
    }

    fn compute(&self, s: f64) -> f64 {
        let i = self.panels.partition_point(|p| p.b <= s);
        if i >= self.panels.len() {
            return *self.prefix.last().unwrap();
        }
        let panel = &self.panels[i];
        if s == panel.a {
            return self.prefix[i];
        }
        let mut f = |x: f64| self.base.value(x);
        let partial = kronrod15(&mut f, panel.a, s).map(|p| p.value).unwrap_or(f64::NAN);
        self.prefix[i] + partial
    }

    /// `G(b) - G(a)`.
    pub fn between(&self, a: f64, b: f64) -> f64 {
        self.eval(b) - self.eval(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::spec::presets;
    use crate::numerics::quad::integrate;
    use proptest::prelude::*;

    fn weight(text: &str) -> FunctionSpec {
        FunctionSpec::weight(text, 2.0).unwrap()
    }

    #[test]
    fn closed_forms() {
        let g = Antiderivative::new(&presets::g_one(2.0), 1e-12).unwrap();
        assert!((g.eval(2.0) - 2.0).abs() <= 1e-12);
        assert_eq!(g.eval(0.0), 0.0);
        let g = Antiderivative::new(&weight("s"), 1e-10).unwrap();
        assert!((g.eval(2.0) - 2.0).abs() <= 1e-10);
        let g = Antiderivative::new(&weight("exp(s)"), 1e-10).unwrap();
        assert!((g.eval(1.0) - (std::f64::consts::E - 1.0)).abs() <= 1e-10);
    }

    #[test]
    fn tighter_tolerance_never_hurts() {
        let cases: [(&str, fn(f64) -> f64); 3] = [
            ("3", |s| 3.0 * s),
            ("s", |s| 0.5 * s * s),
            ("exp(s)", |s| s.exp_m1()),
        ];
        for (text, exact) in cases {
            let mut prev = f64::INFINITY;
            for tol in [1e-4, 5e-5, 2.5e-5, 1.25e-5, 1e-8, 5e-9] {
                let g = Antiderivative::new(&weight(text), tol).unwrap();
                let err = (0..=40)
                    .map(|i| 0.05 * i as f64)
                    .map(|s| (g.eval(s) - exact(s)).abs())
                    .fold(0.0, f64::max);
                assert!(err <= prev.max(1e-14), "{text}: {err} > {prev} at tol {tol}");
                prev = err;
            }
        }
    }

    #[test]
    fn monotone_for_positive_integrand() {
        let g = Antiderivative::new(&presets::g_lin(2.0), 1e-10).unwrap();
        let mut last = -1.0;
        for i in 0..=1000 {
            let v = g.eval(0.002 * i as f64);
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn shared_across_threads() {
        let g = Antiderivative::new(&weight("sin(3*s) + 2"), 1e-11).unwrap();
        let uncached: Vec<f64> = (0..64).map(|i| g.compute(i as f64 / 32.0)).collect();
        std::thread::scope(|scope| {
            for _ in 0..4 {
                scope.spawn(|| {
                    for (i, u) in uncached.iter().enumerate() {
                        assert_eq!(g.eval(i as f64 / 32.0), *u);
                    }
                });
            }
        });
    }

    proptest! {
        #[test]
        fn additivity(a in 0.0f64..2.0, b in 0.0f64..2.0) {
            let tol = 1e-9;
            let spec = weight("exp(-s) * cos(2*s) + 1.5");
            let g = Antiderivative::new(&spec, tol).unwrap();
            let (a, b) = (a.min(b), a.max(b));
            let direct = integrate(|s| spec.value(s), a, b, &QuadOptions::absolute(1e-13)).unwrap().value;
            prop_assert!((g.eval(b) - (g.eval(a) + direct)).abs() <= 2.0 * tol);
        }
    }
}
