use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::DiscreteFunction;
use crate::dd::DoubleDouble;

/// Largest support length convolved by direct summation.
pub const FFT_THRESHOLD: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvMethod {
    /// O(m^2) summation, each output accumulated in double-double.
    Direct,
    /// Zero-padded complex FFT in `f64`.
    Fft,
}

impl ConvMethod {
    pub fn for_lengths(a: usize, b: usize) -> Self {
        if a.max(b) <= FFT_THRESHOLD {
            ConvMethod::Direct
        } else {
            ConvMethod::Fft
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Convolved {
    pub function: DiscreteFunction,
    pub method: ConvMethod,
}

/// `f * g`, choosing the method from the support lengths.
pub fn convolve(f: &DiscreteFunction, g: &DiscreteFunction) -> Convolved {
    convolve_with(f, g, ConvMethod::for_lengths(f.support_len(), g.support_len()))
}

pub fn convolve_with(f: &DiscreteFunction, g: &DiscreteFunction, method: ConvMethod) -> Convolved {
    if f.is_zero() || g.is_zero() {
        return Convolved { function: DiscreteFunction::zero(), method };
    }
    let values = match method {
        ConvMethod::Direct => direct_dd(f.values(), g.values()).into_iter().map(DoubleDouble::to_f64).collect(),
        ConvMethod::Fft => fft_f64(f.values(), g.values()),
    };
    Convolved { function: DiscreteFunction::canonical(f.offset() + g.offset(), values), method }
}

/// Full linear convolution, every output accumulated in double-double.
pub(crate) fn direct_dd(a: &[f64], b: &[f64]) -> Vec<DoubleDouble> {
    if std::ptr::eq(a, b) {
        return autoconvolve_dd(a);
    }
    let mut out = vec![DoubleDouble::ZERO; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += DoubleDouble::from_product(x, y);
        }
    }
    out
}

/// `a * a`; each cross term is formed once and doubled exactly.
pub(crate) fn autoconvolve_dd(a: &[f64]) -> Vec<DoubleDouble> {
    let m = a.len();
    if m == 0 {
        return Vec::new();
    }
    let mut out = vec![DoubleDouble::ZERO; 2 * m - 1];
    for (s, slot) in out.iter_mut().enumerate() {
        let lo = s.saturating_sub(m - 1);
        let hi = s / 2;
        let mut acc = DoubleDouble::ZERO;
        for i in lo..=hi {
            let j = s - i;
            if i == j {
                continue;
            }
            acc += DoubleDouble::from_product(a[i], a[j]);
        }
        acc = acc.ldexp(1);
        if s % 2 == 0 {
            acc += DoubleDouble::from_product(a[s / 2], a[s / 2]);
        }
        *slot = acc;
    }
    out
}

/// Full linear convolution through a zero-padded FFT of power-of-two size.
pub(crate) fn fft_f64(a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = a.len() + b.len() - 1;
    let size = fft_size(a.len(), b.len());
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);

    let padded = |v: &[f64]| {
        let mut buf = vec![Complex::new(0.0, 0.0); size];
        for (slot, &x) in buf.iter_mut().zip(v) {
            slot.re = x;
        }
        buf
    };
    let mut fa = padded(a);
    forward.process(&mut fa);
    if std::ptr::eq(a, b) {
        for z in fa.iter_mut() {
            *z = *z * *z;
        }
    } else {
        let mut fb = padded(b);
        forward.process(&mut fb);
        for (x, y) in fa.iter_mut().zip(&fb) {
            *x *= y;
        }
    }
    inverse.process(&mut fa);
    let scale = 1.0 / size as f64;
    fa[..len].iter().map(|z| z.re * scale).collect()
}

pub(crate) fn fft_size(la: usize, lb: usize) -> usize {
    (la + lb - 1).next_power_of_two()
}

/// Bound on the 2-norm of the error of [`fft_f64`]:
/// `c (log2 N + 1) u ||a||_1 ||b||_2` with a generous constant `c`.
pub(crate) fn fft_error_bound(a: &[f64], b: &[f64]) -> f64 {
    let size = fft_size(a.len(), b.len()) as f64;
    let l1: f64 = a.iter().map(|x| x.abs()).sum();
    let l2: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    16.0 * (size.log2() + 1.0) * crate::dd::F64_UNIT_ROUNDOFF * l1 * l2
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn naive(a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len() + b.len() - 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        out
    }

    #[test]
    fn delta_is_identity() {
        let d = DiscreteFunction::delta(0);
        assert_eq!(convolve(&d, &d).function, d);
        let f = DiscreteFunction::new(-2, vec![1.0, -3.0, 0.5]).unwrap();
        assert_eq!(convolve(&f, &DiscreteFunction::delta(5)).function, f.translated(5));
    }

    #[test]
    fn small_indicator_examples() {
        let pair = DiscreteFunction::indicator(0, 2);
        let c = convolve(&pair, &pair);
        assert_eq!(c.method, ConvMethod::Direct);
        assert_eq!(c.function.offset(), 0);
        assert_eq!(c.function.values(), &[1.0, 2.0, 1.0]);

        let triple = DiscreteFunction::indicator(-1, 3);
        let c = convolve(&triple, &triple).function;
        assert_eq!(c.offset(), -2);
        assert_eq!(c.values(), &[1.0, 2.0, 3.0, 2.0, 1.0]);
    }

    #[test]
    fn zero_function_annihilates() {
        let f = DiscreteFunction::indicator(3, 4);
        assert!(convolve(&f, &DiscreteFunction::zero()).function.is_zero());
    }

    #[test]
    fn auto_and_cross_direct_agree_with_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for len in [1usize, 2, 7, 40] {
            let a: Vec<f64> = (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..len + 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let auto: Vec<f64> = autoconvolve_dd(&a).into_iter().map(DoubleDouble::to_f64).collect();
            for (x, y) in auto.iter().zip(naive(&a, &a)) {
                assert!((x - y).abs() < 1e-13);
            }
            let cross: Vec<f64> = direct_dd(&a, &b).into_iter().map(DoubleDouble::to_f64).collect();
            for (x, y) in cross.iter().zip(naive(&a, &b)) {
                assert!((x - y).abs() < 1e-13);
            }
        }
    }

    fn max_rel_diff(x: &[f64], y: &[f64]) -> f64 {
        let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
    }

    #[test]
    fn fft_and_direct_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (la, lb) in [(5usize, 9usize), (1000, 1000), (5000, 300), (1 << 13, 1 << 13), (1 << 15, 1 << 10)] {
            let a: Vec<f64> = (0..la).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..lb).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f = DiscreteFunction::new(0, a.clone()).unwrap();
            let g = DiscreteFunction::new(0, b.clone()).unwrap();
            let direct = convolve_with(&f, &g, ConvMethod::Direct).function;
            let fft = convolve_with(&f, &g, ConvMethod::Fft).function;
            assert!(max_rel_diff(fft.values(), direct.values()) < 1e-10, "{la}x{lb}");

            // the folded error bound really bounds the deviation
            let err2: f64 =
                fft.values().iter().zip(direct.values()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            assert!(err2 <= fft_error_bound(&a, &b));
        }
    }

    #[test]
    fn method_switches_at_threshold() {
        assert_eq!(ConvMethod::for_lengths(FFT_THRESHOLD, 3), ConvMethod::Direct);
        assert_eq!(ConvMethod::for_lengths(FFT_THRESHOLD + 1, 3), ConvMethod::Fft);
    }
}
