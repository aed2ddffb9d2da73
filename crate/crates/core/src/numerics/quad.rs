//! Adaptive Gauss–Kronrod (7/15) quadrature with global error control.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use thiserror::Error;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];

// Gauss weights for the odd Kronrod abscissae (index 1, 3, 5, 7 of XGK).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Ten-point Gauss–Legendre nodes on [-1, 1] (positive half).
const GL10_X: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL10_W: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982_0,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("non-finite integrand value {value} at x = {x}")]
    NonFinite { x: f64, value: f64 },
    #[error("tolerance {tol:e} not reached within {panels} panels (estimated error {error:e})")]
    Budget { tol: f64, panels: usize, error: f64 },
}

/// Tolerance and panel budget for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_panels: 4000,
        }
    }
}

impl QuadOptions {
    pub fn absolute(tol: f64) -> Self {
        Self {
            abs_tol: tol,
            rel_tol: 0.0,
            ..Self::default()
        }
    }

    pub fn relative(tol: f64) -> Self {
        Self {
            abs_tol: 0.0,
            rel_tol: tol,
            ..Self::default()
        }
    }
}

/// One accepted subinterval of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Panel {
    pub a: f64,
    pub b: f64,
    pub value: f64,
    pub error: f64,
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Single 15-point Kronrod rule with the embedded 7-point Gauss estimate.
pub fn kronrod15<F>(f: &mut F, a: f64, b: f64) -> Result<Panel, QuadError>
where
    F: FnMut(f64) -> f64,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut eval = |x: f64| -> Result<f64, QuadError> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(QuadError::NonFinite { x, value: v })
        }
    };

    let fc = eval(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut samples = [(0.0, 0.0); 7];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        samples[j] = (f1, f2);
        kronrod += w * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut resasc = WGK[7] * (fc - mean).abs();
    for (j, &(f1, f2)) in samples.iter().enumerate() {
        resasc += WGK[j] * ((f1 - mean).abs() + (f2 - mean).abs());
    }
    let value = kronrod * half;
    let resasc = resasc * half.abs();
    let mut error = ((kronrod - gauss) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    // Floor the estimate at a few ulps of the panel's magnitude.
    let error = error.max(50.0 * f64::EPSILON * value.abs());
    Ok(Panel { a, b, value, error })
}

/// Fixed ten-point Gauss–Legendre rule on `[a, b]`; exact for degree 19.
pub fn gauss_legendre10<F>(mut f: F, a: f64, b: f64) -> f64
where
    F: FnMut(f64) -> f64,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut sum = 0.0;
    for (&x, &w) in GL10_X.iter().zip(GL10_W.iter()) {
        sum += w * (f(c - h * x) + f(c + h * x));
    }
    sum * h
}

/// Adaptive integration returning the accepted panel partition, sorted by left endpoint.
pub fn integrate_panels<F>(
    mut f: F,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<(QuadResult, Vec<Panel>), QuadError>
where
    F: FnMut(f64) -> f64,
{
    if a == b {
        let panel = Panel {
            a,
            b,
            value: 0.0,
            error: 0.0,
        };
        return Ok((
            QuadResult {
                value: 0.0,
                error: 0.0,
                evaluations: 0,
            },
            vec![panel],
        ));
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let mut heap = BinaryHeap::new();
    let first = kronrod15(&mut f, lo, hi)?;
    let mut value = first.value;
    let mut error = first.error;
    let mut evaluations = 15;
    heap.push(first);

    let min_width = (hi - lo) * 1e-15;
    let mut done: Vec<Panel> = Vec::new();
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= tol {
            break;
        }
        if heap.len() + done.len() >= opts.max_panels {
            return Err(QuadError::Budget {
                tol,
                panels: heap.len() + done.len(),
                error,
            });
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if worst.b - worst.a <= min_width || mid <= worst.a || mid >= worst.b {
            // Cannot split further; freeze this panel.
            done.push(worst);
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let left = kronrod15(&mut f, worst.a, mid)?;
        let right = kronrod15(&mut f, mid, worst.b)?;
        evaluations += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }

    let mut panels: Vec<Panel> = heap.into_vec();
    panels.extend(done);
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    // Resum to shed drift from the running updates.
    let value: f64 = panels.iter().map(|p| p.value).sum();
    let error: f64 = panels.iter().map(|p| p.error).sum();
    Ok((
        QuadResult {
            value: sign * value,
            error,
            evaluations,
        },
        panels,
    ))
}

/// Adaptive integration of `f` over `[a, b]` (either orientation).
pub fn integrate<F>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult, QuadError>
where
    F: FnMut(f64) -> f64,
{
    integrate_panels(f, a, b, opts).map(|(r, _)| r)
}
