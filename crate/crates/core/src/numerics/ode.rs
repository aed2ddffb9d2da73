//! Dormand–Prince 5(4) integrator with terminal zero-crossing events.

use thiserror::Error;

use super::roots::brent;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("step budget of {0} exhausted")]
    Budget(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-11,
            atol: 1e-13,
            h_init: 1e-4,
            h_max: f64::INFINITY,
            max_steps: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    /// The event function reached zero at the last recorded time.
    Event,
    /// The abort predicate fired.
    Aborted,
    /// Integration reached `t_end`.
    End,
}

#[derive(Debug, Clone)]
pub struct Trajectory<const N: usize> {
    pub t: Vec<f64>,
    pub y: Vec<[f64; N]>,
    pub termination: Termination,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn lin<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        *o += h * acc;
    }
    out
}

/// One Dormand–Prince step. Returns (y_new, error estimate vector).
fn dp_step<F, const N: usize>(rhs: &F, t: f64, y: &[f64; N], k1: &[f64; N], h: f64) -> ([f64; N], [f64; N])
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let k2 = rhs(t + C2 * h, &lin(y, h, &[(A21, k1)]));
    let k3 = rhs(t + C3 * h, &lin(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = rhs(t + C4 * h, &lin(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = rhs(
        t + C5 * h,
        &lin(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    );
    let k6 = rhs(
        t + h,
        &lin(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    );
    let y_new = lin(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = rhs(t + h, &y_new);
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    (y_new, err)
}

/// Integrate `y' = rhs(t, y)` from `(t0, y0)` towards `t_end`, stopping at
/// the first time `event` drops to zero or below (located to near machine
/// precision by re-stepping from the last accepted state) or when `abort`
/// returns true.
pub fn integrate_until<F, E, A, const N: usize>(
    rhs: F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    event: E,
    abort: A,
    opts: &OdeOptions,
) -> Result<Trajectory<N>, OdeError>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    E: Fn(f64, &[f64; N]) -> f64,
    A: Fn(f64, &[f64; N]) -> bool,
{
    let mut t = t0;
    let mut y = y0;
    let mut ts = vec![t];
    let mut ys = vec![y];
    let mut h = opts.h_init.min(t_end - t0);
    let mut k1 = rhs(t, &y);

    for _ in 0..opts.max_steps {
        if t >= t_end {
            return Ok(Trajectory {
                t: ts,
                y: ys,
                termination: Termination::End,
            });
        }
        h = h.min(t_end - t).min(opts.h_max);
        if h <= 1e-15 * t.abs().max(1e-300) {
            return Err(OdeError::StepUnderflow { t });
        }
        let (y_new, err) = dp_step(&rhs, t, &y, &k1, h);
        if y_new.iter().any(|v| !v.is_finite()) {
            h *= 0.25;
            continue;
        }
        let mut norm: f64 = 0.0;
        for i in 0..N {
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            norm = norm.max((err[i] / sc).abs());
        }
        if norm > 1.0 {
            h *= (0.9 * norm.powf(-0.2)).max(0.2);
            continue;
        }

        let t_new = t + h;
        if event(t_new, &y_new) <= 0.0 {
            // Locate the crossing inside (t, t_new] with exact re-steps.
            let y_at = |s: f64| dp_step(&rhs, t, &y, &k1, s).0;
            let g = |s: f64| if s == 0.0 { event(t, &y) } else { event(t + s, &y_at(s)) };
            let s = brent(g, 0.0, h, 1e-15 * t_new.abs().max(1e-12), 200);
            let y_cross = y_at(s);
            if !y_cross.iter().all(|v| v.is_finite()) {
                return Err(OdeError::NonFinite { t: t + s });
            }
            ts.push(t + s);
            ys.push(y_cross);
            return Ok(Trajectory {
                t: ts,
                y: ys,
                termination: Termination::Event,
            });
        }

        t = t_new;
        y = y_new;
        k1 = rhs(t, &y);
        ts.push(t);
        ys.push(y);
        if abort(t, &y) {
            return Ok(Trajectory {
                t: ts,
                y: ys,
                termination: Termination::Aborted,
            });
        }
        let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).min(5.0) };
        h *= factor;
    }
    Err(OdeError::Budget(opts.max_steps))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_zero() {
        // y'' = -y, y(0) = 1, y'(0) = 0: first zero at pi/2.
        let traj = integrate_until(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [1.0, 0.0],
            10.0,
            |_, y| y[0],
            |_, _| false,
            &OdeOptions::default(),
        )
        .unwrap();
        assert_eq!(traj.termination, Termination::Event);
        let t_star = *traj.t.last().unwrap();
        assert!((t_star - std::f64::consts::FRAC_PI_2).abs() < 1e-10);
    }

    #[test]
    fn reaches_end_without_event() {
        let traj = integrate_until(
            |_, y: &[f64; 1]| [-y[0]],
            0.0,
            [1.0],
            3.0,
            |_, y| y[0],
            |_, _| false,
            &OdeOptions::default(),
        )
        .unwrap();
        assert_eq!(traj.termination, Termination::End);
        assert!((traj.y.last().unwrap()[0] - (-3f64).exp()).abs() < 1e-10);
    }
}
