//! Piecewise Chebyshev interpolants on adaptively refined panels.
//!
//! A [`ChebTable`] stores one degree-16 Chebyshev series per panel. Panels are
//! split until the trailing coefficients drop below a tolerance relative to
//! the panel's own magnitude, so exponentially graded functions are resolved
//! near their small end as well as their large end. Kinks and jumps are
//! isolated by a depth cap instead of being refined forever.

use thiserror::Error;

use super::quad::gauss_legendre10;

/// Number of Chebyshev–Lobatto samples per panel (degree + 1).
pub const NODES: usize = 17;
const DEG: usize = NODES - 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChebError {
    #[error("non-finite value {value} at x = {x}")]
    NonFinite { x: f64, value: f64 },
    #[error("panel budget of {0} exhausted")]
    Budget(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct ChebOptions {
    pub rel_tol: f64,
    pub max_depth: u32,
    pub max_panels: usize,
    pub initial_panels: usize,
    /// Panels whose values stay below this magnitude are accepted as is.
    pub abs_floor: f64,
}

impl Default for ChebOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-14,
            max_depth: 48,
            max_panels: 20_000,
            initial_panels: 4,
            abs_floor: 1e-280,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChebTable {
    breaks: Vec<f64>,
    coeffs: Vec<Vec<f64>>,
    panel_integrals: Vec<f64>,
    prefix: Vec<f64>,
}

fn lobatto_points() -> [f64; NODES] {
    let mut t = [0.0; NODES];
    for (j, tj) in t.iter_mut().enumerate() {
        // Ascending order: t_0 = -1, t_DEG = 1.
        *tj = -(std::f64::consts::PI * j as f64 / DEG as f64).cos();
    }
    t[0] = -1.0;
    t[DEG] = 1.0;
    t[DEG / 2] = 0.0;
    t
}

/// Coefficients of the interpolant through values at ascending Lobatto points.
fn coefficients(values: &[f64; NODES]) -> Vec<f64> {
    let n = DEG as f64;
    let mut c = vec![0.0; NODES];
    for (k, ck) in c.iter_mut().enumerate() {
        let mut sum = 0.0;
        for (j, &v) in values.iter().enumerate() {
            // values are ordered at t_j = -cos(pi j / n) = cos(pi (n - j) / n)
            let m = DEG - j;
            let w = if m == 0 || m == DEG { 0.5 } else { 1.0 };
            sum += w * v * (std::f64::consts::PI * (m * k) as f64 / n).cos();
        }
        *ck = 2.0 * sum / n;
    }
    c[0] *= 0.5;
    c[DEG] *= 0.5;
    c
}

fn clenshaw(c: &[f64], t: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &ck in c.iter().skip(1).rev() {
        let b0 = 2.0 * t * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    t * b1 - b2 + c[0]
}

/// Integral of the series over t in [-1, 1].
fn series_integral(c: &[f64]) -> f64 {
    c.iter()
        .enumerate()
        .filter(|(k, _)| k % 2 == 0)
        .map(|(k, &ck)| 2.0 * ck / (1.0 - (k * k) as f64))
        .sum()
}

impl ChebTable {
    /// Adaptive build over `[a, b]`.
    pub fn build<F>(mut f: F, a: f64, b: f64, opts: &ChebOptions) -> Result<Self, ChebError>
    where
        F: FnMut(f64) -> f64,
    {
        assert!(b > a, "ChebTable::build requires a < b");
        let n0 = opts.initial_panels.max(1);
        let width = (b - a) / n0 as f64;
        let ends: Vec<f64> = (0..=n0)
            .map(|i| if i == n0 { b } else { a + width * i as f64 })
            .collect();
        Self::build_on(&mut f, &ends, opts)
    }

    /// Like [`ChebTable::build`] with the given increasing panel ends, so that
    /// known kinks fall on panel boundaries.
    pub fn build_on<F>(mut f: F, ends: &[f64], opts: &ChebOptions) -> Result<Self, ChebError>
    where
        F: FnMut(f64) -> f64,
    {
        assert!(ends.len() >= 2 && ends.windows(2).all(|w| w[1] > w[0]), "panel ends must increase");
        let t = lobatto_points();
        let mut breaks = vec![ends[0]];
        let mut coeffs = Vec::new();
        for w in ends.windows(2) {
            Self::refine(&mut f, w[0], w[1], 0, &t, opts, &mut breaks, &mut coeffs)?;
        }
        Ok(Self::from_parts(breaks, coeffs))
    }

    #[allow(clippy::too_many_arguments)]
    fn refine<F>(
        f: &mut F,
        l: f64,
        r: f64,
        depth: u32,
        t: &[f64; NODES],
        opts: &ChebOptions,
        breaks: &mut Vec<f64>,
        coeffs: &mut Vec<Vec<f64>>,
    ) -> Result<(), ChebError>
    where
        F: FnMut(f64) -> f64,
    {
        if coeffs.len() >= opts.max_panels {
            return Err(ChebError::Budget(opts.max_panels));
        }
        let mid = 0.5 * (l + r);
        let half = 0.5 * (r - l);
        let mut values = [0.0; NODES];
        let mut scale: f64 = 0.0;
        for (v, &tj) in values.iter_mut().zip(t.iter()) {
            let x = if tj == -1.0 {
                l
            } else if tj == 1.0 {
                r
            } else {
                mid + half * tj
            };
            let fx = f(x);
            if !fx.is_finite() {
                return Err(ChebError::NonFinite { x, value: fx });
            }
            scale = scale.max(fx.abs());
            *v = fx;
        }
        let c = coefficients(&values);
        let tail = c[DEG].abs() + c[DEG - 1].abs() + c[DEG - 2].abs();
        // Rounding of the nodes themselves perturbs the samples by about
        // eps * |x| * |f'|, which dominates on narrow panels.
        let node_noise = 64.0 * f64::EPSILON * l.abs().max(r.abs()) / (r - l);
        let ok = tail <= (opts.rel_tol + node_noise) * scale || scale <= opts.abs_floor;
        let splittable = depth < opts.max_depth && mid > l && mid < r;
        if ok || !splittable {
            coeffs.push(c);
            breaks.push(r);
            return Ok(());
        }
        Self::refine(f, l, mid, depth + 1, t, opts, breaks, coeffs)?;
        Self::refine(f, mid, r, depth + 1, t, opts, breaks, coeffs)
    }

    fn from_parts(breaks: Vec<f64>, coeffs: Vec<Vec<f64>>) -> Self {
        let panel_integrals: Vec<f64> = coeffs
            .iter()
            .zip(breaks.windows(2))
            .map(|(c, w)| series_integral(c) * 0.5 * (w[1] - w[0]))
            .collect();
        let mut prefix = Vec::with_capacity(panel_integrals.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for v in &panel_integrals {
            acc += v;
            prefix.push(acc);
        }
        Self {
            breaks,
            coeffs,
            panel_integrals,
            prefix,
        }
    }

    pub fn lower(&self) -> f64 {
        self.breaks[0]
    }

    pub fn upper(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    /// Panel boundaries, ascending.
    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn panel_count(&self) -> usize {
        self.coeffs.len()
    }

    /// Index of the panel containing `x` (clamped).
    pub fn panel_of(&self, x: f64) -> usize {
        let n = self.coeffs.len();
        match self.breaks[1..n].binary_search_by(|b| b.total_cmp(&x)) {
            Ok(i) => i + 1,
            Err(i) => i,
        }
        .min(n - 1)
    }

    fn eval_in(&self, i: usize, x: f64) -> f64 {
        let l = self.breaks[i];
        let r = self.breaks[i + 1];
        let t = ((2.0 * x - l - r) / (r - l)).clamp(-1.0, 1.0);
        clenshaw(&self.coeffs[i], t)
    }

    /// Evaluate at `x`, clamped to the table's interval.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(self.lower(), self.upper());
        self.eval_in(self.panel_of(x), x)
    }

    /// Integral over `[a, b]`; partial panels use a Gauss rule that is exact
    /// for the stored polynomials, so short intervals carry no cancellation.
    pub fn integrate(&self, a: f64, b: f64) -> f64 {
        if a == b {
            return 0.0;
        }
        if a > b {
            return -self.integrate(b, a);
        }
        let a = a.clamp(self.lower(), self.upper());
        let b = b.clamp(self.lower(), self.upper());
        let ia = self.panel_of(a);
        let ib = self.panel_of(b);
        if ia == ib {
            return gauss_legendre10(|x| self.eval_in(ia, x), a, b);
        }
        let head = gauss_legendre10(|x| self.eval_in(ia, x), a, self.breaks[ia + 1]);
        let tail = gauss_legendre10(|x| self.eval_in(ib, x), self.breaks[ib], b);
        let middle = self.prefix[ib] - self.prefix[ia + 1];
        head + middle + tail
    }

    /// Integral over the whole table.
    pub fn total(&self) -> f64 {
        *self.prefix.last().unwrap()
    }

    /// The antiderivative table `x -> integral from lower() to x`.
    pub fn antiderivative(&self) -> ChebTable {
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        let mut cum = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            let h = 0.5 * (self.breaks[i + 1] - self.breaks[i]);
            let n = c.len();
            let get = |k: usize| if k < n { c[k] } else { 0.0 };
            let mut b = vec![0.0; n + 1];
            b[1] = get(0) - 0.5 * get(2);
            for (k, bk) in b.iter_mut().enumerate().skip(2) {
                *bk = (get(k - 1) - get(k + 1)) / (2.0 * k as f64);
            }
            for bk in b.iter_mut() {
                *bk *= h;
            }
            let at_left: f64 = b
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &bk)| if k % 2 == 0 { bk } else { -bk })
                .sum();
            b[0] = cum - at_left;
            cum += self.panel_integrals[i];
            coeffs.push(b);
        }
        Self::from_parts(self.breaks.clone(), coeffs)
    }

    /// Values at the panel boundaries.
    pub fn break_values(&self) -> Vec<f64> {
        let mut out: Vec<f64> = (0..self.coeffs.len())
            .map(|i| clenshaw(&self.coeffs[i], -1.0))
            .collect();
        let last = self.coeffs.len() - 1;
        out.push(clenshaw(&self.coeffs[last], 1.0));
        out
    }

    /// Maximum of |f| over all interpolation nodes.
    pub fn max_abs_sampled(&self) -> f64 {
        let t = lobatto_points();
        let mut m: f64 = 0.0;
        for c in &self.coeffs {
            for &tj in &t {
                m = m.max(clenshaw(c, tj).abs());
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_polynomial_exactly() {
        let t = ChebTable::build(|x| 3.0 * x * x - x + 2.0, -1.0, 2.0, &ChebOptions::default())
            .unwrap();
        for i in 0..=30 {
            let x = -1.0 + 3.0 * i as f64 / 30.0;
            assert!((t.eval(x) - (3.0 * x * x - x + 2.0)).abs() < 1e-13);
        }
        assert!((t.total() - 13.5).abs() < 1e-12);
    }

    #[test]
    fn exponential_has_small_relative_error_everywhere() {
        let k = 40.0;
        let t = ChebTable::build(|x| (k * x).exp(), 0.0, 2.0, &ChebOptions::default()).unwrap();
        for i in 0..=200 {
            let x = 2.0 * i as f64 / 200.0;
            let e = (k * x).exp();
            assert!((t.eval(x) - e).abs() / e < 1e-13, "x = {x}");
        }
        let anti = t.antiderivative();
        for &x in &[0.0, 1e-3, 0.5, 1.7, 2.0] {
            let exact = ((k * x).exp() - 1.0) / k;
            let got = anti.eval(x);
            assert!((got - exact).abs() <= 1e-13 * exact.max(1e-300) + 1e-300, "x = {x}");
        }
    }

    #[test]
    fn integrate_matches_antiderivative() {
        let t = ChebTable::build(|x| x.sin() + 2.0, 0.0, 3.0, &ChebOptions::default()).unwrap();
        let anti = t.antiderivative();
        for &(a, b) in &[(0.1, 2.9), (1.0, 1.0 + 1e-9), (2.5, 0.3)] {
            let direct = t.integrate(a, b);
            let exact = 2.0 * (0.5 * (a + b)).sin() * (0.5 * (b - a)).sin() + 2.0 * (b - a);
            assert!((direct - exact).abs() < 1e-13 * exact.abs().max(1e-9));
            assert!((anti.eval(b) - anti.eval(a) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn kink_is_isolated() {
        let t = ChebTable::build(|x: f64| (x - 1.0).abs(), 0.0, 2.0, &ChebOptions::default())
            .unwrap();
        assert!(t.panel_count() < 400);
        assert!((t.total() - 1.0).abs() < 1e-12);
        assert!((t.eval(0.3) - 0.7).abs() < 1e-13);
    }
}
