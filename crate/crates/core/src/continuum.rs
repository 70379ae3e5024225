//! Gaussians on the real line: closed-form norms of `g(x) = exp(-x^2 / A)`
//! and its Fourier transform, and quadrature routes that check them.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Relative tolerance between successive refinements of a quadrature.
pub const QUADRATURE_TOL: f64 = 1e-11;

/// `g(x) = exp(-x^2 / a_param)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianSpec {
    a_param: f64,
}

impl GaussianSpec {
    pub fn new(a_param: f64) -> Result<Self> {
        if a_param.is_finite() && a_param > 0.0 {
            Ok(Self { a_param })
        } else {
            Err(Error::InvalidParameter(format!("Gaussian width must be positive and finite, got {a_param}")))
        }
    }

    pub fn a_param(&self) -> f64 {
        self.a_param
    }

    pub fn eval(&self, x: f64) -> f64 {
        (-x * x / self.a_param).exp()
    }
}

fn check_q(q: f64) -> Result<()> {
    if q.is_finite() && q > 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidExponent(q))
    }
}

/// `||g^||_4 = (1/2 (pi A)^(3/2))^(1/4)`.
pub fn gaussian_l4hat(spec: GaussianSpec) -> f64 {
    (0.5 * (PI * spec.a_param).powf(1.5)).powf(0.25)
}

/// `||g||_q = ((pi A / q)^(1/2))^(1/q)`.
pub fn gaussian_lq(spec: GaussianSpec, q: f64) -> Result<f64> {
    check_q(q)?;
    Ok((PI * spec.a_param / q).sqrt().powf(1.0 / q))
}

/// `||g^||_4 / ||g||_q = (q^(4/q) pi^(3-4/q) A^(3-4/q) / 4)^(1/8)`.
pub fn gaussian_ratio(spec: GaussianSpec, q: f64) -> Result<f64> {
    check_q(q)?;
    let e = 3.0 - 4.0 / q;
    Ok((0.25 * q.powf(4.0 / q) * PI.powf(e) * spec.a_param.powf(e)).powf(0.125))
}

/// Sharp constant `(4 sqrt(3) / 9)^(1/4)` of `||g^||_4 <= C ||g||_{4/3}` on
/// the real line, attained by Gaussians.
pub fn beckner_constant() -> f64 {
    (4.0 * 3f64.sqrt() / 9.0).powf(0.25)
}

/// `3 sqrt(3) / 4 = 9 / (4 sqrt(3))`, the base of the logarithm in the
/// asymptotic lower bound for `t_n`.
pub fn beckner_companion() -> f64 {
    3.0 * 3f64.sqrt() / 4.0
}

fn simpson_weight(i: usize, n: usize) -> f64 {
    if i == 0 || i == n {
        1.0
    } else if i % 2 == 1 {
        4.0
    } else {
        2.0
    }
}

/// Composite Simpson rule with `n` (even) subintervals.
fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let s: f64 = (0..=n).map(|i| simpson_weight(i, n) * f(a + i as f64 * h)).sum();
    s * h / 3.0
}

/// Simpson with subinterval doubling until two successive values agree
/// to [`QUADRATURE_TOL`].
fn simpson_refined<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, start: usize) -> Result<f64> {
    const MAX_SUBINTERVALS: usize = 1 << 24;
    let mut n = start.max(2) & !1;
    let mut coarse = simpson(&f, a, b, n);
    loop {
        n *= 2;
        let fine = simpson(&f, a, b, n);
        if (fine - coarse).abs() <= QUADRATURE_TOL * fine.abs() {
            return Ok(fine);
        }
        if n >= MAX_SUBINTERVALS {
            return Err(Error::NotConverged { coarse, fine });
        }
        coarse = fine;
    }
}

/// `||g*g||_2^2` on a uniform grid over `[-truncation, truncation]`: the
/// inner convolution integral and the outer squared integral are both
/// composite Simpson sums.
fn grid_l4hat_pow4(spec: GaussianSpec, truncation: f64, step: f64) -> f64 {
    let n = (((2.0 * truncation / step).round() as usize).max(2) + 1) & !1;
    let h = 2.0 * truncation / n as f64;
    let g: Vec<f64> = (0..=n).map(|i| spec.eval(-truncation + i as f64 * h)).collect();
    let wg: Vec<f64> = g.iter().enumerate().map(|(i, v)| simpson_weight(i, n) * v).collect();

    // conv[j] approximates (g*g)(-2T + j h); it is symmetric about j = n
    let conv_at = |j: usize| -> f64 {
        let lo = j.saturating_sub(n);
        let hi = j.min(n);
        (lo..=hi).map(|i| wg[i] * g[j - i]).sum::<f64>() * h / 3.0
    };
    let total: f64 = (0..=n)
        .map(|j| {
            let c = conv_at(j);
            let w = simpson_weight(j, 2 * n);
            // mirror j -> 2n - j, counted once at the centre
            if j == n {
                w * c * c
            } else {
                2.0 * w * c * c
            }
        })
        .sum();
    total * h / 3.0
}

/// Quadrature value of `||g^||_4^4 = ||g*g||_2^2`, refined once by halving
/// the step; fails if the two values disagree beyond [`QUADRATURE_TOL`].
pub fn quadrature_l4hat_pow4(spec: GaussianSpec, truncation: f64, step: f64) -> Result<f64> {
    if !(truncation > 0.0 && step > 0.0) {
        return Err(Error::InvalidParameter(format!("truncation {truncation} and step {step} must be positive")));
    }
    let coarse = grid_l4hat_pow4(spec, truncation, step);
    let fine = grid_l4hat_pow4(spec, truncation, step / 2.0);
    if (fine - coarse).abs() <= QUADRATURE_TOL * fine.abs() {
        Ok(fine)
    } else {
        Err(Error::NotConverged { coarse, fine })
    }
}

/// Truncation where `g` falls below `e^-40` (about 4e-18) of its peak.
pub fn default_truncation(spec: GaussianSpec) -> f64 {
    (40.0 * spec.a_param).sqrt()
}

/// [`quadrature_l4hat_pow4`] with a tail below 1e-16 and a step of
/// `sqrt(A) / 8`.
pub fn quadrature_l4hat_pow4_auto(spec: GaussianSpec) -> Result<f64> {
    quadrature_l4hat_pow4(spec, default_truncation(spec), spec.a_param.sqrt() / 8.0)
}

/// Quadrature value of `||g||_q^q = int g(x)^q dx`.
pub fn quadrature_lq_pow(spec: GaussianSpec, q: f64) -> Result<f64> {
    check_q(q)?;
    let t = default_truncation(spec);
    simpson_refined(|x| spec.eval(x).powf(q), -t, t, 64)
}

/// `||g_M^||_4^4` for the truncation `g_M = g 1_[-M, M]`.
///
/// The inner convolution has the closed form
/// `(g_M * g_M)(z) = exp(-z^2/2A) s sqrt(pi) erf((M - |z|/2) / s)` with
/// `s = sqrt(A/2)` for `|z| <= 2M`; the outer integral is Simpson.
pub fn truncated_l4hat_pow4(spec: GaussianSpec, m: f64) -> Result<f64> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidParameter(format!("truncation point must be positive, got {m}")));
    }
    let a = spec.a_param;
    let s = (a / 2.0).sqrt();
    let conv = |z: f64| (-z * z / (2.0 * a)).exp() * s * PI.sqrt() * libm::erf((m - z / 2.0) / s);
    Ok(2.0 * simpson_refined(|z| conv(z).powi(2), 0.0, 2.0 * m, 256)?)
}

/// `||g_M||_q^q = int_{-M}^{M} g(x)^q dx`.
pub fn truncated_lq_pow(spec: GaussianSpec, q: f64, m: f64) -> Result<f64> {
    check_q(q)?;
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidParameter(format!("truncation point must be positive, got {m}")));
    }
    Ok(2.0 * simpson_refined(|x| spec.eval(x).powf(q), 0.0, m, 256)?)
}
