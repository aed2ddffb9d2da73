use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::funcspace::FunctionSpec;
use crate::numerics::cheb::ChebTable;
use crate::numerics::logspace::LogScaled;

use super::{Coefficients, TransformError, TransformTable};

/// The area integrand `w(s) = f(s) a(s)^{1/(p-1)} exp(-p/(p-1) L G_a(s))`
/// on `[0, upper]`, tabulated as `w(s) exp(-log_scale)` so that it stays in
/// range for large `|L|`.
#[derive(Debug, Clone)]
pub struct AreaWeight {
    coeffs: Arc<Coefficients>,
    f: FunctionSpec,
    p: f64,
    l: f64,
    upper: f64,
    log_scale: f64,
    table: ChebTable,
}

impl AreaWeight {
    pub fn new(coeffs: Arc<Coefficients>, f: &FunctionSpec, p: f64, l: f64, upper: f64) -> Result<Self, TransformError> {
        if !(p > 1.0) || !l.is_finite() {
            return Err(TransformError::Parameter(format!("bad p = {p} or L = {l}")));
        }
        if !(upper > 0.0 && upper <= coeffs.upper()) {
            return Err(TransformError::Parameter(format!(
                "upper end {upper} outside (0, {}]",
                coeffs.upper()
            )));
        }
        let (_, log_scale) = Coefficients::sampled_max(0.0, upper, |s| coeffs.log_area_weight(p, l, s));
        let table = ChebTable::build(
            |s| f.value(s) * (coeffs.log_area_weight(p, l, s) - log_scale).exp(),
            0.0,
            upper,
            &Coefficients::table_options(p / (p - 1.0) * l * coeffs.ghat(upper)),
        )?;
        Ok(Self {
            coeffs,
            f: f.clone(),
            p,
            l,
            upper,
            log_scale,
            table,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn f(&self) -> &FunctionSpec {
        &self.f
    }

    pub fn coefficients(&self) -> &Arc<Coefficients> {
        &self.coeffs
    }

    /// Direct evaluation in log-space.
    pub fn integrand(&self, s: f64) -> LogScaled {
        LogScaled::new(self.f.value(s), self.coeffs.log_area_weight(self.p, self.l, s))
    }

    /// Tabulated `w(s) exp(-log_scale)`.
    pub fn scaled(&self, s: f64) -> f64 {
        self.table.eval(s)
    }

    /// `integral_a^b w * exp(-log_scale)`.
    pub fn integral_scaled(&self, a: f64, b: f64) -> f64 {
        self.table.integrate(a, b)
    }

    pub fn integral(&self, a: f64, b: f64) -> LogScaled {
        LogScaled::new(self.integral_scaled(a, b), self.log_scale)
    }

    pub fn table(&self) -> &ChebTable {
        &self.table
    }
}

/// `f~(v) = f(Psi^{-1} v) exp(-L G_a(Psi^{-1} v))` with its primitive.
#[derive(Debug, Clone)]
pub struct TransformedNonlinearity {
    table: TransformTable,
    weight: AreaWeight,
}

/// One exported row: `s`, `Psi(s)`, `Psi'(s)` and `f~(Psi(s))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NonlinearityRow {
    pub s: f64,
    pub psi: f64,
    pub dpsi: f64,
    pub ftilde: f64,
}

/// Pair a nonlinearity with a transform built on the same `[0, beta]`.
pub fn transformed_nonlinearity(f: &FunctionSpec, table: &TransformTable) -> Result<TransformedNonlinearity, TransformError> {
    TransformedNonlinearity::new(f, table)
}

impl TransformedNonlinearity {
    pub fn new(f: &FunctionSpec, table: &TransformTable) -> Result<Self, TransformError> {
        let beta = f
            .beta()
            .ok_or_else(|| TransformError::Parameter("f must be a nonlinearity with zeros".into()))?;
        if (beta - table.beta()).abs() > 1e-12 * beta {
            return Err(TransformError::Parameter(format!(
                "f has beta = {beta} but the table covers [0, {}]",
                table.beta()
            )));
        }
        let weight = AreaWeight::new(table.coefficients().clone(), f, table.p(), table.l(), beta)?;
        Ok(Self {
            table: table.clone(),
            weight,
        })
    }

    pub fn table(&self) -> &TransformTable {
        &self.table
    }

    pub fn weight(&self) -> &AreaWeight {
        &self.weight
    }

    pub fn f(&self) -> &FunctionSpec {
        self.weight.f()
    }

    pub fn alpha(&self) -> f64 {
        self.f().alpha().unwrap()
    }

    pub fn beta(&self) -> f64 {
        self.table.beta()
    }

    /// `f~(Psi(s))`.
    pub fn ftilde_at(&self, s: f64) -> f64 {
        let c = self.table.coefficients();
        self.f().value(s) * (-self.table.l() * c.ghat(s)).exp()
    }

    /// `f~(v)`.
    pub fn ftilde(&self, v: f64) -> Result<f64, TransformError> {
        Ok(self.ftilde_at(self.table.psi_inverse(v)?))
    }

    /// `w(s) = f~(Psi(s)) Psi'(s)`, the area integrand (plain value).
    pub fn w(&self, s: f64) -> f64 {
        self.weight.scaled(s) * self.weight.log_scale().exp()
    }

    /// `F~(Psi(s2)) - F~(Psi(s1)) = integral_{s1}^{s2} w`.
    pub fn gap(&self, s1: f64, s2: f64) -> f64 {
        self.weight.integral_scaled(s1, s2) * self.weight.log_scale().exp()
    }

    /// `F~(v) = integral_0^v f~`.
    pub fn big_f(&self, v: f64) -> Result<f64, TransformError> {
        Ok(self.gap(0.0, self.table.psi_inverse(v)?))
    }

    /// `integral_v^{Psi(beta)} f~`.
    pub fn tail(&self, v: f64) -> Result<f64, TransformError> {
        Ok(self.gap(self.table.psi_inverse(v)?, self.beta()))
    }

    pub fn sample(&self, n: usize) -> Vec<NonlinearityRow> {
        self.table
            .sample(n)
            .into_iter()
            .map(|r| NonlinearityRow {
                s: r.s,
                psi: r.psi,
                dpsi: r.dpsi,
                ftilde: self.ftilde_at(r.s),
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcspace::presets;
    use crate::numerics::quad::{integrate, QuadOptions};
    use crate::transform::build_psi;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(f: &FunctionSpec, l: f64) -> TransformedNonlinearity {
        let t = build_psi(&presets::g_one(2.0), None, 2.0, l, 2.0, 1e-10).unwrap();
        TransformedNonlinearity::new(f, &t).unwrap()
    }

    #[test]
    fn identity_transform_leaves_f_unchanged() {
        let f = presets::f_sign();
        let n = setup(&f, 0.0);
        for i in 0..=100 {
            let v = 0.02 * i as f64;
            assert!((n.ftilde(v).unwrap() - f.value(v)).abs() <= 1e-12);
        }
    }

    #[test]
    fn composition_closed_form() {
        let f = presets::f_sign();
        let n = setup(&f, -1.0);
        // f~(v) = f(log(1+v)) (1+v).
        for v in [0.3, 1.0, 2.5, 5.0] {
            let s = (1.0f64 + v).ln();
            let exact = s * (s - 1.0) * (2.0 - s) * (1.0 + v);
            assert!((n.ftilde(v).unwrap() - exact).abs() <= 1e-9 * exact.abs().max(1.0));
        }
        assert!(n.ftilde(std::f64::consts::E - 1.0).unwrap().abs() <= 1e-9);
    }

    #[test]
    fn zeros_and_sign_are_preserved() {
        for f in [presets::f_sign(), presets::f_pos()] {
            for l in [-3.0, 1.0] {
                let n = setup(&f, l);
                let t = n.table();
                assert!(n.ftilde(t.psi(1.0)).unwrap().abs() <= 1e-9);
                assert!(n.ftilde(t.psi(2.0)).unwrap().abs() <= 1e-9);
                for i in 1..200 {
                    let v = t.psi_max() * i as f64 / 200.0;
                    let s = t.psi_inverse(v).unwrap();
                    let fv = n.ftilde(v).unwrap();
                    assert_eq!(fv.signum() == f.value(s).signum(), true, "v = {v}");
                    if s > 1.0 + 1e-9 && s < 2.0 - 1e-9 {
                        assert!(fv > 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn area_identity_by_independent_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for f in [presets::f_sign(), presets::f_pos()] {
            let n = setup(&f, -1.0);
            let t = n.table();
            let top = t.psi_max();
            for _ in 0..20 {
                let v = rng.gen_range(0.0..top);
                let lhs = integrate(|x| n.ftilde(x).unwrap(), v, top, &QuadOptions::absolute(1e-12)).unwrap().value;
                let s = t.psi_inverse(v).unwrap();
                let rhs = integrate(|r| f.value(r) * (2.0 * r).exp(), s, 2.0, &QuadOptions::absolute(1e-12)).unwrap().value;
                assert!((lhs - rhs).abs() <= 5e-10, "{lhs} vs {rhs}");
                assert!((n.tail(v).unwrap() - rhs).abs() <= 5e-10);
            }
        }
    }

    #[test]
    fn log_scaled_weight_survives_extreme_l() {
        let c = Arc::new(Coefficients::new(&presets::g_one(2.0), None, 2.0).unwrap());
        let w = AreaWeight::new(c, &presets::f_sign(), 2.0, -1.0e4, 1.9).unwrap();
        let h = w.integral(1.0, 1.9);
        assert!(h.mantissa > 0.0 && h.ln_abs().is_finite());
        // Laplace estimate: f(1.9) e^{2e4 * 1.9} / 2e4.
        let est = (1.9f64 * 0.9 * 0.1).ln() + 2.0e4 * 1.9 - (2.0e4f64).ln();
        assert!((h.ln_abs() - est).abs() < 1e-3);
    }
}
