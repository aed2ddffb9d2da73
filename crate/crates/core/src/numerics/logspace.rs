//! Reals stored as `mantissa * exp(log_scale)` and integrals of
//! exponentially weighted integrands that would overflow in plain `f64`.

use serde::{Deserialize, Serialize};

use super::quad::{integrate, QuadError, QuadOptions};

/// A real number `mantissa * exp(log_scale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogScaled {
    pub mantissa: f64,
    pub log_scale: f64,
}

impl LogScaled {
    pub const ZERO: LogScaled = LogScaled {
        mantissa: 0.0,
        log_scale: 0.0,
    };

    pub fn new(mantissa: f64, log_scale: f64) -> Self {
        Self {
            mantissa,
            log_scale,
        }
    }

    pub fn from_f64(x: f64) -> Self {
        Self::new(x, 0.0)
    }

    /// Plain value; may overflow to infinity.
    pub fn value(&self) -> f64 {
        if self.mantissa == 0.0 {
            0.0
        } else {
            self.mantissa * self.log_scale.exp()
        }
    }

    /// `ln |x|` (negative infinity for zero).
    pub fn ln_abs(&self) -> f64 {
        self.mantissa.abs().ln() + self.log_scale
    }

    pub fn signum(&self) -> f64 {
        if self.mantissa == 0.0 {
            0.0
        } else {
            self.mantissa.signum()
        }
    }

    /// Rescale to a different exponent.
    pub fn rescaled(&self, log_scale: f64) -> Self {
        if self.mantissa == 0.0 {
            return Self::new(0.0, log_scale);
        }
        Self::new(self.mantissa * (self.log_scale - log_scale).exp(), log_scale)
    }

    /// `self / other` as a plain real; assumes the quotient is representable.
    pub fn ratio(&self, other: &LogScaled) -> f64 {
        self.mantissa / other.mantissa * (self.log_scale - other.log_scale).exp()
    }

    pub fn scale_by(&self, c: f64) -> Self {
        Self::new(self.mantissa * c, self.log_scale)
    }

    pub fn add(&self, other: &LogScaled) -> Self {
        let s = self.log_scale.max(other.log_scale);
        let a = self.rescaled(s);
        let b = other.rescaled(s);
        Self::new(a.mantissa + b.mantissa, s)
    }
}

/// `integral_a^b h(x) exp(phi(x)) dx` where `phi_max` bounds `phi` on the
/// interval from above (an approximate bound is fine: it only sets the scale).
pub fn weighted_integral<H, P>(
    h: H,
    phi: P,
    phi_max: f64,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<LogScaled, QuadError>
where
    H: Fn(f64) -> f64,
    P: Fn(f64) -> f64,
{
    let r = integrate(|x| h(x) * (phi(x) - phi_max).exp(), a, b, opts)?;
    Ok(LogScaled::new(r.value, phi_max))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn huge_exponential_integral() {
        // integral_0^2 e^{k x} dx with k = 2e4 overflows in plain arithmetic.
        let k = 2.0e4;
        let r = weighted_integral(|_| 1.0, |x| k * x, 2.0 * k, 0.0, 2.0, &QuadOptions::relative(1e-13))
            .unwrap();
        assert!(r.value().is_infinite());
        let expected_ln = 2.0 * k - k.ln() + (-(2.0 * k)).exp().ln_1p();
        assert!((r.ln_abs() - expected_ln).abs() < 1e-12);
    }

    #[test]
    fn ratio_and_add() {
        let a = LogScaled::new(3.0, 800.0);
        let b = LogScaled::new(1.5, 800.0 - 2f64.ln());
        assert!((a.ratio(&b) - 4.0).abs() < 1e-12);
        let c = a.add(&LogScaled::new(-3.0, 800.0));
        assert_eq!(c.mantissa, 0.0);
        assert_eq!(LogScaled::from_f64(2.5).value(), 2.5);
    }
}
