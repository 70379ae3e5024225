use serde::{Deserialize, Serialize};

use super::convolution::{autoconvolve_dd, fft_error_bound, fft_f64, ConvMethod};
use super::DiscreteFunction;
use crate::dd::{gamma, DoubleDouble, UNIT_ROUNDOFF};
use crate::error::{Error, Result};

/// A double-double value together with a bound on its relative error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounded {
    pub value: DoubleDouble,
    pub rel_err: f64,
}

impl Bounded {
    /// Absolute error bound.
    pub fn abs_err(&self) -> f64 {
        self.rel_err * self.value.to_f64().abs()
    }

    /// `value^(1/4)` as two square roots.
    fn fourth_root(self) -> Self {
        Bounded { value: self.value.sqrt().sqrt(), rel_err: self.rel_err / 4.0 + 4.0 * UNIT_ROUNDOFF }
    }
}

/// `sum_s (f*f)(s)^2` in double-double with its rounding bound.
pub(crate) fn l4hat_pow4_bounded(f: &DiscreteFunction) -> (Bounded, ConvMethod) {
    if f.is_zero() {
        return (Bounded { value: DoubleDouble::ZERO, rel_err: 0.0 }, ConvMethod::Direct);
    }
    let m = f.support_len();
    let len = 2 * m - 1;
    let gamma_sum = gamma(len + 1);
    match ConvMethod::for_lengths(m, m) {
        ConvMethod::Direct => {
            let s4 = sum_squares(&autoconvolve_dd(f.values()));
            let s4_abs = if f.is_nonnegative() { s4 } else { sum_squares(&autoconvolve_dd(f.abs().values())) };
            // |dh(s)| <= gamma_m (|f|*|f|)(s), then the sum of squares
            let gamma_conv = gamma(m + 1);
            let coeff = (2.0 * gamma_conv + gamma_conv * gamma_conv) * (1.0 + gamma_sum) + gamma_sum;
            let rel_err = coeff * s4_abs.to_f64() / s4.to_f64();
            (Bounded { value: s4, rel_err }, ConvMethod::Direct)
        }
        ConvMethod::Fft => {
            let h = fft_f64(f.values(), f.values());
            let s4: DoubleDouble = h.iter().map(|&x| DoubleDouble::from_product(x, x)).sum();
            let delta = fft_error_bound(f.values(), f.values());
            let norm = s4.to_f64().sqrt() + delta;
            let abs_err = 2.0 * norm * delta + delta * delta;
            let rel_err = abs_err / s4.to_f64() + gamma_sum;
            (Bounded { value: s4, rel_err }, ConvMethod::Fft)
        }
    }
}

fn sum_squares(h: &[DoubleDouble]) -> DoubleDouble {
    h.iter().map(|&x| x * x).sum()
}

/// `||f^||_4` with its relative error bound.
pub(crate) fn l4hat_bounded(f: &DiscreteFunction) -> Bounded {
    l4hat_pow4_bounded(f).0.fourth_root()
}

/// `sum_a |f(a)|^q` in double-double.
pub(crate) fn lq_pow_sum_bounded(f: &DiscreteFunction, q: DoubleDouble) -> Bounded {
    let mut sum = DoubleDouble::ZERO;
    let mut worst_term = 0.0f64;
    for &v in f.values().iter().filter(|v| **v != 0.0) {
        let x = DoubleDouble::from(v.abs());
        sum += x.powf(q);
        // exp turns the absolute error of q ln|x| into a relative one
        let arg = (q.to_f64() * v.abs().ln()).abs();
        worst_term = worst_term.max((2.0 * arg + 4.0) * UNIT_ROUNDOFF);
    }
    Bounded { value: sum, rel_err: worst_term + gamma(f.support_len() + 1) }
}

/// `||f||_q` for a double-double exponent.
pub(crate) fn lq_bounded(f: &DiscreteFunction, q: DoubleDouble) -> Bounded {
    let p = lq_pow_sum_bounded(f, q);
    if p.value.is_zero() {
        return p;
    }
    let inv_q = q.recip();
    let value = p.value.powf(inv_q);
    let ln_p = p.value.to_f64().ln().abs();
    let rel_err = p.rel_err * inv_q.to_f64() + (2.0 * ln_p * inv_q.to_f64() + 6.0) * UNIT_ROUNDOFF;
    Bounded { value, rel_err }
}

fn check_exponent(q: f64) -> Result<()> {
    if q.is_finite() && q >= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(q))
    }
}

/// `(sum |f(a)|^q)^(1/q)`; zero for the zero function.
pub fn lq_norm(f: &DiscreteFunction, q: f64) -> Result<f64> {
    check_exponent(q)?;
    Ok(lq_bounded(f, DoubleDouble::from(q)).value.to_f64())
}

/// `||f^||_4^4 = ||f*f||_2^2`.
pub fn fourier_l4_pow4(f: &DiscreteFunction) -> f64 {
    l4hat_pow4_bounded(f).0.value.to_f64()
}

/// `sum_{a,b,c} f(a) f(b) f(c) f(a+b-c)` by direct enumeration, O(m^3).
///
/// Independent of the convolution path; used to re-check certificates.
pub fn l4_pow4_quadruple_sum(f: &DiscreteFunction) -> DoubleDouble {
    let v = f.values();
    let m = v.len() as i64;
    let mut acc = DoubleDouble::ZERO;
    for a in 0..m {
        for b in 0..m {
            let ab = DoubleDouble::from_product(v[a as usize], v[b as usize]);
            if ab.is_zero() {
                continue;
            }
            for c in 0..m {
                let d = a + b - c;
                if !(0..m).contains(&d) {
                    continue;
                }
                acc += ab * DoubleDouble::from_product(v[c as usize], v[d as usize]);
            }
        }
    }
    acc
}

/// Comparison of `||f^||_4` against `||f||_q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub q: f64,
    pub l4hat: f64,
    pub lq: f64,
    pub ratio: f64,
    /// Relative rounding bound on `ratio`.
    pub err: f64,
}

impl RatioReport {
    /// True when `||f^||_4 <= ||f||_q` is consistent with the computed values.
    pub fn inequality_holds(&self) -> bool {
        self.ratio <= 1.0 + self.err
    }
}

pub fn ratio_report(f: &DiscreteFunction, q: f64) -> Result<RatioReport> {
    check_exponent(q)?;
    if f.is_zero() {
        return Err(Error::ZeroFunction);
    }
    let l4 = l4hat_bounded(f);
    let lq = lq_bounded(f, DoubleDouble::from(q));
    let ratio = l4.value / lq.value;
    Ok(RatioReport {
        q,
        l4hat: l4.value.to_f64(),
        lq: lq.value.to_f64(),
        ratio: ratio.to_f64(),
        err: l4.rel_err + lq.rel_err + 2.0 * UNIT_ROUNDOFF,
    })
}
