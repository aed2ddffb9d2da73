//! Bracketing root finders and a golden-section minimizer.

/// Bisection on the sign of `f` over a bracket `[a, b]` with `f(a)` and
/// `f(b)` of opposite sign (zero counts as its own sign class and ends the
/// search). Stops when the bracket is narrower than `tol`.
///
/// Returns the final bracket `(lo, hi)` with `sign(f(lo)) == sign(f(a))`.
pub fn bisect_bracket<F>(mut f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let fa = f(a);
    let mut lo = a;
    let mut hi = b;
    let positive_at_lo = fa > 0.0;
    for _ in 0..max_iter {
        if (hi - lo).abs() <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return (mid, mid);
        }
        if (fm > 0.0) == positive_at_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, hi)
}

/// Midpoint of [`bisect_bracket`].
pub fn bisect<F>(f: F, a: f64, b: f64, tol: f64) -> f64
where
    F: FnMut(f64) -> f64,
{
    let (lo, hi) = bisect_bracket(f, a, b, tol, 200);
    0.5 * (lo + hi)
}

/// Brent's method for a sign-changing bracket.
pub fn brent<F>(mut f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> f64
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return b;
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    b
}

/// Golden-section search for a minimum of `f` on `[a, b]`.
/// Returns `(x_min, f(x_min))`.
pub fn golden_min<F>(mut f: F, a: f64, b: f64, tol: f64, max_iter: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if (b - a).abs() <= tol {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14);
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn bracket_keeps_sign_of_left_end() {
        let (lo, hi) = bisect_bracket(|x| 1.0 - x, 0.0, 3.0, 1e-10, 200);
        assert!(1.0 - lo > 0.0 && 1.0 - hi < 0.0);
        assert!(hi - lo <= 1e-10);
    }

    #[test]
    fn brent_cubic() {
        let r = brent(|x| x * x * x - x - 1.0, 1.0, 2.0, 1e-15, 100);
        assert!((r * r * r - r - 1.0).abs() < 1e-13);
    }

    #[test]
    fn golden_parabola() {
        let (x, fx) = golden_min(|x| (x - 0.3) * (x - 0.3) + 1.0, -1.0, 2.0, 1e-10, 200);
        assert!((x - 0.3).abs() < 1e-7);
        assert!((fx - 1.0).abs() < 1e-15);
    }
}
