//! Exact decimal conversion for [`DoubleDouble`] and `f64`.
//!
//! Both components of a double-double are dyadic rationals, so their sum has
//! a finite decimal expansion; formatting rounds that exact value to
//! [`DD_DIGITS`] significant digits, which is enough for parsing to recover
//! the same pair.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::dd::DoubleDouble;
use crate::error::{Error, Result};

/// Significant digits written for double-double values.
pub const DD_DIGITS: usize = 34;

fn f64_to_rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite f64")
}

fn dd_to_rational(x: DoubleDouble) -> BigRational {
    f64_to_rational(x.hi()) + f64_to_rational(x.lo())
}

fn pow10(k: u32) -> BigInt {
    num_traits::pow(BigInt::from(10u32), k as usize)
}

/// Round `num / den` to the nearest integer, ties to even.
fn round_div(num: &BigInt, den: &BigInt) -> BigInt {
    let (q, r) = num.div_mod_floor(den);
    let twice = r * 2u32;
    match twice.cmp(den) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1u32,
        std::cmp::Ordering::Equal => {
            if q.is_even() {
                q
            } else {
                q + 1u32
            }
        }
    }
}

/// Digits and power of ten with `value ~= digits * 10^exp10`, where
/// `digits` has exactly `sig` decimal digits.
fn to_digits(value: &BigRational, approx: f64, sig: usize) -> (BigInt, i32) {
    let abs = value.abs();
    let mut e10 = approx.abs().log10().floor() as i32;
    let lower = pow10(sig as u32 - 1);
    let upper = pow10(sig as u32);
    loop {
        let p = e10 - (sig as i32 - 1);
        let (num, den) = if p >= 0 {
            (abs.numer().clone(), abs.denom() * pow10(p as u32))
        } else {
            (abs.numer() * pow10((-p) as u32), abs.denom().clone())
        };
        let d = round_div(&num, &den);
        if d >= upper {
            e10 += 1;
        } else if d < lower {
            e10 -= 1;
        } else {
            return (d, p);
        }
    }
}

fn render(negative: bool, digits: BigInt, exp10: i32) -> String {
    let mut s = digits.to_string();
    let mut exp10 = exp10;
    while s.len() > 1 && s.ends_with('0') {
        s.pop();
        exp10 += 1;
    }
    // position of the decimal point relative to the digit string
    let point = s.len() as i32 + exp10;
    let body = if (-5..=21).contains(&point) {
        if exp10 >= 0 {
            format!("{s}{}", "0".repeat(exp10 as usize))
        } else if point > 0 {
            format!("{}.{}", &s[..point as usize], &s[point as usize..])
        } else {
            format!("0.{}{s}", "0".repeat((-point) as usize))
        }
    } else {
        let (first, rest) = s.split_at(1);
        let sci = point - 1;
        if rest.is_empty() {
            format!("{first}e{sci}")
        } else {
            format!("{first}.{rest}e{sci}")
        }
    };
    if negative {
        format!("-{body}")
    } else {
        body
    }
}

/// Decimal string for a double-double, [`DD_DIGITS`] significant digits
/// with trailing zeros removed.
pub fn format_dd(x: DoubleDouble) -> String {
    if !x.is_finite() {
        return format!("{}", x.to_f64());
    }
    if x.is_zero() {
        return "0".to_string();
    }
    let value = dd_to_rational(x);
    let (digits, exp10) = to_digits(&value, x.hi(), DD_DIGITS);
    render(value.is_negative(), digits, exp10)
}

/// Shortest round-trip decimal string for an `f64`.
pub fn format_f64(x: f64) -> String {
    format!("{x:?}")
}

fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    let (negative, s) = match s.as_bytes().first()? {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("0{int_part}{frac_part}").parse().ok()?;
    let exp10 = exponent.checked_sub(frac_part.len() as i32)?;
    let mut value = if exp10 >= 0 {
        BigRational::from_integer(digits * pow10(exp10 as u32))
    } else {
        BigRational::new(digits, pow10((-exp10) as u32))
    };
    if negative {
        value = -value;
    }
    Some(value)
}

/// Parses a decimal string into the nearest double-double.
pub fn parse_dd(s: &str) -> Result<DoubleDouble> {
    let value = parse_rational(s).ok_or_else(|| Error::Decimal(s.to_string()))?;
    if value.is_zero() {
        return Ok(DoubleDouble::ZERO);
    }
    let hi = value.to_f64().filter(|h| h.is_finite()).ok_or_else(|| Error::Decimal(s.to_string()))?;
    let rest = value - f64_to_rational(hi);
    let lo = rest.to_f64().unwrap_or(0.0);
    Ok(DoubleDouble::new(hi, lo))
}

/// Parses a decimal string into an `f64` (round to nearest).
pub fn parse_f64(s: &str) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::Decimal(s.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formats_simple_values() {
        assert_eq!(format_dd(DoubleDouble::from(6.0)), "6");
        assert_eq!(format_dd(DoubleDouble::from(0.5)), "0.5");
        assert_eq!(format_dd(DoubleDouble::from(-1250.0)), "-1250");
        assert_eq!(format_dd(DoubleDouble::from(1e-30)), "1.000000000000000083336420607585985e-30");
        assert_eq!(format_dd(DoubleDouble::ZERO), "0");
    }

    #[test]
    fn pi_to_thirty_four_digits() {
        // pi = 3.14159265358979323846264338327950288...; the double-double
        // approximation agrees to about 32 digits
        let s = format_dd(DoubleDouble::PI);
        assert!(s.starts_with("3.1415926535897932384626433832795"), "{s}");
    }

    #[test]
    fn parses_plain_and_scientific() {
        assert_eq!(parse_dd("0.1").unwrap().hi(), 0.1);
        assert_eq!(parse_dd("-2.5e3").unwrap().to_f64(), -2500.0);
        assert_eq!(parse_dd("1e0").unwrap().to_f64(), 1.0);
        assert!(parse_dd("abc").is_err());
        assert!(parse_dd("1.2.3").is_err());
        assert!(parse_dd("").is_err());
    }

    proptest! {
        #[test]
        fn dd_round_trip(hi in -1e12f64..1e12, frac in -0.5f64..0.5) {
            prop_assume!(hi != 0.0);
            let ulp = f64::from_bits(hi.abs().to_bits() + 1) - hi.abs();
            let x = DoubleDouble::new(hi, frac * ulp);
            let back = parse_dd(&format_dd(x)).unwrap();
            // 34 digits pin a double-double down to well below its own
            // rounding error, though not always to the identical pair
            prop_assert!((back - x).abs().to_f64() <= 1e-33 * hi.abs());
            prop_assert_eq!(format_dd(back), format_dd(x));
        }

        #[test]
        fn f64_round_trip(x in proptest::num::f64::NORMAL) {
            prop_assert_eq!(parse_f64(&format_f64(x)).unwrap(), x);
        }
    }
}
