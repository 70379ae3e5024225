//! Double-double arithmetic.
//!
//! A [`DoubleDouble`] is the unevaluated sum `hi + lo` of two `f64` with
//! `|lo| <= ulp(hi) / 2`, which carries roughly 106 bits of mantissa. The
//! algorithms are the classical error-free transformations (Knuth two-sum,
//! FMA two-product) plus the QD-library style `sqrt`, `exp` and `ln`.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Unit roundoff assumed for error bounds on double-double results.
///
/// Plain additions and products are accurate to about 2^-104; transcendental
/// functions lose a few more bits, so bounds use 2^-100 throughout.
pub const UNIT_ROUNDOFF: f64 = 7.888_609_052_210_118e-31;

/// Unit roundoff of IEEE binary64.
pub const F64_UNIT_ROUNDOFF: f64 = f64::EPSILON / 2.0;

/// `gamma(n) = n u / (1 - n u)` for the double-double unit roundoff.
pub fn gamma(n: usize) -> f64 {
    let nu = n as f64 * UNIT_ROUNDOFF;
    nu / (1.0 - nu)
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// 2^k as an f64, for k in the normal exponent range.
fn pow2(k: i32) -> f64 {
    debug_assert!((-1022..=1023).contains(&k));
    f64::from_bits(((k + 1023) as u64) << 52)
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    pub const ZERO: Self = Self { hi: 0.0, lo: 0.0 };
    pub const ONE: Self = Self { hi: 1.0, lo: 0.0 };
    pub const PI: Self = Self {
        hi: 3.141_592_653_589_793_116e0,
        lo: 1.224_646_799_147_353_207e-16,
    };
    pub const LN2: Self = Self {
        hi: 6.931_471_805_599_452_862e-1,
        lo: 2.319_046_813_846_299_558e-17,
    };

    /// Builds a normalized value from two arbitrary components.
    pub fn new(hi: f64, lo: f64) -> Self {
        let (hi, lo) = two_sum(hi, lo);
        Self { hi, lo }
    }

    /// Exact product of two doubles.
    #[inline]
    pub fn from_product(a: f64, b: f64) -> Self {
        let (hi, lo) = two_prod(a, b);
        Self { hi, lo }
    }

    #[inline]
    pub fn hi(self) -> f64 {
        self.hi
    }

    #[inline]
    pub fn lo(self) -> f64 {
        self.lo
    }

    /// Nearest `f64`.
    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    pub fn is_zero(self) -> bool {
        self.hi == 0.0
    }

    pub fn abs(self) -> Self {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    /// Multiplication by 2^k (exact barring overflow/underflow).
    pub fn ldexp(self, k: i32) -> Self {
        let mut x = self;
        let mut k = k;
        while k != 0 {
            let step = k.clamp(-1000, 1000);
            let s = pow2(step);
            x = Self { hi: x.hi * s, lo: x.lo * s };
            k -= step;
        }
        x
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return if self.hi == 0.0 { Self::ZERO } else { Self { hi: f64::NAN, lo: f64::NAN } };
        }
        let x = 1.0 / self.hi.sqrt();
        let ax = self.hi * x;
        let resid = (self - Self::from_product(ax, ax)).hi;
        let (hi, lo) = two_sum(ax, resid * x * 0.5);
        Self { hi, lo }
    }

    pub fn exp(self) -> Self {
        const SQUARINGS: i32 = 9;
        if self.hi > 709.78 {
            return Self { hi: f64::INFINITY, lo: 0.0 };
        }
        if self.hi < -745.2 {
            return Self::ZERO;
        }
        if self.is_zero() {
            return Self::ONE;
        }
        let k = (self.hi / Self::LN2.hi).round();
        let r = (self - Self::LN2 * k).ldexp(-SQUARINGS);

        // expm1(r) by Taylor series; |r| < 7e-4 so ~10 terms reach 1e-34
        let mut term = r;
        let mut s = r;
        for i in 2..30 {
            term = term * r / i as f64;
            s += term;
            if term.hi.abs() <= 1e-34 * s.hi.abs() {
                break;
            }
        }
        // expm1(2x) = 2 expm1(x) + expm1(x)^2
        for _ in 0..SQUARINGS {
            s = s.ldexp(1) + s * s;
        }
        (s + 1.0).ldexp(k as i32)
    }

    pub fn ln(self) -> Self {
        if self.hi <= 0.0 {
            return Self {
                hi: if self.hi == 0.0 { f64::NEG_INFINITY } else { f64::NAN },
                lo: 0.0,
            };
        }
        if self == Self::ONE {
            return Self::ZERO;
        }
        // Newton on exp(y) = x: y <- y + x exp(-y) - 1
        let mut y = Self::from(self.hi.ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - 1.0;
        }
        y
    }

    /// `self^e` for `self >= 0`.
    pub fn powf(self, e: Self) -> Self {
        if self.is_zero() {
            return if e.hi > 0.0 { Self::ZERO } else { Self::from(f64::INFINITY) };
        }
        if self == Self::ONE {
            return Self::ONE;
        }
        (e * self.ln()).exp()
    }

    pub fn powi(self, n: u32) -> Self {
        let mut base = self;
        let mut acc = Self::ONE;
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc *= base;
            }
            base = base * base;
            n >>= 1;
        }
        acc
    }

    pub fn recip(self) -> Self {
        Self::ONE / self
    }

    pub fn max(self, other: Self) -> Self {
        if self >= other {
            self
        } else {
            other
        }
    }
}

impl From<f64> for DoubleDouble {
    fn from(hi: f64) -> Self {
        Self { hi, lo: 0.0 }
    }
}

impl From<u64> for DoubleDouble {
    fn from(v: u64) -> Self {
        let hi = v as f64;
        // rounding error of the conversion, exact in i128
        let lo = (v as i128 - hi as i128) as f64;
        Self::new(hi, lo)
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&other.lo),
            ord => Some(ord),
        }
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        Self { hi: -self.hi, lo: -self.lo }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, b: Self) -> Self {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Self { hi, lo }
    }
}

impl Add<f64> for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, b: f64) -> Self {
        let (s1, s2) = two_sum(self.hi, b);
        let (hi, lo) = quick_two_sum(s1, s2 + self.lo);
        Self { hi, lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Sub<f64> for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, b: f64) -> Self {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, b: Self) -> Self {
        let (p1, p2) = two_prod(self.hi, b.hi);
        let p2 = p2 + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p1, p2);
        Self { hi, lo }
    }
}

impl Mul<f64> for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, b: f64) -> Self {
        let (p1, p2) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p1, p2 + self.lo * b);
        Self { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b * q1;
        let q2 = r.hi / b.hi;
        let r = r - b * q2;
        let q3 = r.hi / b.hi;
        let (q1, q2) = quick_two_sum(q1, q2);
        Self { hi: q1, lo: q2 } + q3
    }
}

impl Div<f64> for DoubleDouble {
    type Output = Self;
    fn div(self, b: f64) -> Self {
        let q1 = self.hi / b;
        let r = self - Self::from_product(q1, b);
        let q2 = r.hi / b;
        let r = r - Self::from_product(q2, b);
        let q3 = r.hi / b;
        let (q1, q2) = quick_two_sum(q1, q2);
        Self { hi: q1, lo: q2 } + q3
    }
}

impl AddAssign for DoubleDouble {
    #[inline]
    fn add_assign(&mut self, b: Self) {
        *self = *self + b;
    }
}

impl AddAssign<f64> for DoubleDouble {
    #[inline]
    fn add_assign(&mut self, b: f64) {
        *self = *self + b;
    }
}

impl SubAssign for DoubleDouble {
    fn sub_assign(&mut self, b: Self) {
        *self = *self - b;
    }
}

impl MulAssign for DoubleDouble {
    fn mul_assign(&mut self, b: Self) {
        *self = *self * b;
    }
}

impl Sum for DoubleDouble {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::ZERO, |a, b| a + b)
    }
}

impl fmt::Display for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::decimal::format_dd(*self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // reference (hi, lo) splits from 50-digit mpmath evaluations
    fn close(x: DoubleDouble, hi: f64, lo: f64, rel: f64) -> bool {
        let diff = (x - DoubleDouble::new(hi, lo)).to_f64().abs();
        diff <= rel * hi.abs()
    }

    #[test]
    fn constants_match_reference() {
        // ln 2 and pi split into (hi, lo) with mpmath
        assert_eq!(DoubleDouble::LN2.hi, std::f64::consts::LN_2);
        assert_eq!(DoubleDouble::PI.hi, std::f64::consts::PI);
        let two = DoubleDouble::from(2.0);
        assert!(close(two.ln(), DoubleDouble::LN2.hi, DoubleDouble::LN2.lo, 1e-31));
    }

    #[test]
    fn exp_ln_reference_values() {
        // exp(1) = 2.718281828459045 + 1.4456468917292502e-16
        assert!(close(DoubleDouble::ONE.exp(), 2.718281828459045, 1.4456468917292502e-16, 1e-31));
        // ln(19) = 2.9444389791664403 + 1.9776172119535626e-16
        let l19 = DoubleDouble::from(19.0).ln();
        assert!(close(l19, 2.9444389791664403, 1.9776172119535626e-16, 1e-31));
        // ln(670) = 6.507277712385012 + 1.1825917566842968e-16
        let l670 = DoubleDouble::from(670.0).ln();
        assert!(close(l670, 6.507277712385012, 1.1825917566842968e-16, 1e-30));
        // exp(-10) = 4.5399929762484854e-05 - 2.637554055327531e-21
        let e = DoubleDouble::from(-10.0).exp();
        assert!(close(e, 4.5399929762484854e-05, -2.637554055327531e-21, 1e-30));
    }

    #[test]
    fn sqrt_of_three_squares_back() {
        let s = DoubleDouble::from(3.0).sqrt();
        let back = s * s - 3.0;
        assert!(back.to_f64().abs() < 1e-30);
    }

    #[test]
    fn division_inverts_multiplication() {
        let a = DoubleDouble::new(1.0 / 3.0, 1e-18);
        let b = DoubleDouble::from(7.25);
        let r = (a * b) / b - a;
        assert!(r.to_f64().abs() < 1e-31);
    }

    #[test]
    fn powf_round_trips_through_ln() {
        let x = DoubleDouble::from(1.1);
        let q = DoubleDouble::from(4.0) / DoubleDouble::from(3.0);
        let y = x.powf(q).powf(q.recip());
        assert!((y - x).to_f64().abs() < 1e-30);
        assert_eq!(DoubleDouble::ONE.powf(q), DoubleDouble::ONE);
    }

    #[test]
    fn exact_integer_conversion() {
        let v = (1u64 << 60) + 12345;
        let d = DoubleDouble::from(v);
        assert_eq!(d.hi as i128 + d.lo as i128, v as i128);
    }
}
