//! Explicit violations of `||f^||_4 <= ||f||_q` and the lower bounds on
//! `t_n` they imply.
//!
//! A certificate stores `f`, `q`, both sides in double-double together
//! with a rigorous bound `err` on the rounding error of `lhs - rhs`. It is
//! valid when `margin > err > 0`, `q > 4/3` and the support of `f` fits in
//! an interval of length `n`; a valid certificate shows `q_n < q`, hence
//! `t_n > 4/q`.

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::continuum::{self, GaussianSpec};
use crate::dd::{gamma, DoubleDouble, UNIT_ROUNDOFF};
use crate::decimal::{format_dd, format_f64, parse_dd, parse_f64};
use crate::discrete::{
    energy_interval_formula, l4_pow4_quadruple_sum, l4hat_bounded, lq_bounded, Bounded, DiscreteFunction,
};
use crate::error::{Error, Result};

/// Default cap on the support length of a sampled Gaussian.
pub const GAUSSIAN_SUPPORT_CAP: u64 = 1 << 22;

/// Certificates with support up to this length are re-checked with the
/// quadruple-sum evaluation of `||f^||_4^4`.
pub const QUADRUPLE_SUM_LIMIT: usize = 64;

/// Number of `2^-j` steps in the perturbation scan.
pub const PERTURBATION_SCAN_STEPS: u32 = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertificateKind {
    Gaussian,
    Perturbation,
    Explicit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub n: u64,
    pub q: DoubleDouble,
    pub f: DiscreteFunction,
    /// `||f^||_4`.
    pub lhs: DoubleDouble,
    /// `||f||_q`.
    pub rhs: DoubleDouble,
    pub margin: DoubleDouble,
    /// Bound on `|computed margin - true margin|`.
    pub err: f64,
    pub implied_t_bound: DoubleDouble,
    pub valid: bool,
}

fn four_thirds() -> DoubleDouble {
    DoubleDouble::from(4.0) / DoubleDouble::from(3.0)
}

fn check_n(n: u64) -> Result<()> {
    if n >= 2 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("n must be at least 2, got {n}")))
    }
}

fn assemble(kind: CertificateKind, n: u64, q: DoubleDouble, f: DiscreteFunction, lhs: Bounded, rhs: Bounded) -> Certificate {
    let margin = lhs.value - rhs.value;
    let err = lhs.abs_err() + rhs.abs_err() + 2.0 * UNIT_ROUNDOFF * lhs.value.to_f64().abs();
    let fits = f.support_len() as u64 <= n;
    let valid = fits && q > four_thirds() && err > 0.0 && margin > DoubleDouble::from(err);
    Certificate {
        kind,
        n,
        q,
        implied_t_bound: DoubleDouble::from(4.0) / q,
        f,
        lhs: lhs.value,
        rhs: rhs.value,
        margin,
        err,
        valid,
    }
}

impl Certificate {
    /// Whether the support of `f` fits in an interval of length `n`.
    pub fn fits(&self) -> bool {
        self.f.support_len() as u64 <= self.n
    }

    /// Recomputes both sides without the convolution path when the
    /// support is at most [`QUADRUPLE_SUM_LIMIT`], otherwise through
    /// [`evaluate`] again. The result carries its own verdict.
    pub fn recompute(&self) -> Result<Certificate> {
        if self.f.support_len() > QUADRUPLE_SUM_LIMIT {
            return evaluate(self.kind, self.n, self.q, self.f.clone());
        }
        let m = self.f.support_len();
        let s4 = l4_pow4_quadruple_sum(&self.f);
        let s4_abs = l4_pow4_quadruple_sum(&self.f.abs());
        let terms = m * m * m;
        let rel = (gamma(terms + 1) + 4.0 * UNIT_ROUNDOFF) * s4_abs.to_f64() / s4.to_f64();
        let lhs = Bounded { value: s4.sqrt().sqrt(), rel_err: rel / 4.0 + 4.0 * UNIT_ROUNDOFF };
        let rhs = lq_bounded(&self.f, self.q);
        Ok(assemble(self.kind, self.n, self.q, self.f.clone(), lhs, rhs))
    }

    /// True when an independent recomputation agrees that the certificate
    /// is valid and its stored sides lie within the combined error bounds.
    pub fn revalidates(&self) -> bool {
        let Ok(again) = self.recompute() else {
            return false;
        };
        let tol = DoubleDouble::from(self.err + again.err);
        again.valid
            && self.valid
            && (again.lhs - self.lhs).abs() <= tol
            && (again.rhs - self.rhs).abs() <= tol
            && (again.implied_t_bound - self.implied_t_bound).abs() <= DoubleDouble::from(1e-25)
    }
}

/// Evaluates both sides of `||f^||_4 <= ||f||_q` for `f` and records the
/// verdict.
pub fn evaluate(kind: CertificateKind, n: u64, q: DoubleDouble, f: DiscreteFunction) -> Result<Certificate> {
    check_n(n)?;
    if !q.is_finite() || q < DoubleDouble::ONE {
        return Err(Error::InvalidExponent(q.to_f64()));
    }
    if f.is_zero() {
        return Err(Error::ZeroFunction);
    }
    let lhs = l4hat_bounded(&f);
    let rhs = lq_bounded(&f, q);
    Ok(assemble(kind, n, q, f, lhs, rhs))
}

/// `I = {-floor((n-1)/2), ..., floor(n/2)}`, returned as (start, length).
pub fn perturbation_interval(n: u64) -> (i64, usize) {
    (-(((n - 1) / 2) as i64), n as usize)
}

/// `q = 4 / log_n((2n^3 + n) / 3)`, the exponent at which `1_I` attains
/// equality.
pub fn perturbation_exponent(n: u64) -> Result<DoubleDouble> {
    check_n(n)?;
    let energy = energy_interval_formula(n).to_f64().unwrap_or(f64::INFINITY);
    if energy >= 2f64.powi(53) {
        return Err(Error::InvalidParameter(format!("n = {n} is too large for an exact interval energy in f64")));
    }
    let ln_e = DoubleDouble::from(energy).ln();
    let ln_n = DoubleDouble::from(n).ln();
    Ok(DoubleDouble::from(4.0) * ln_n / ln_e)
}

/// `f = 1_I + eps delta_0` at the perturbation exponent.
///
/// `eps = 0` is accepted: it gives equality, so the certificate is never
/// valid.
pub fn build_perturbation_certificate(n: u64, eps: f64) -> Result<Certificate> {
    if n < 3 {
        return Err(Error::InvalidParameter(format!("the perturbation construction needs n >= 3, got {n}")));
    }
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!("eps must lie in [0, 1], got {eps}")));
    }
    let (start, len) = perturbation_interval(n);
    let f = DiscreteFunction::indicator(start, len).add(&DiscreteFunction::delta(0).scaled(eps));
    evaluate(CertificateKind::Perturbation, n, perturbation_exponent(n)?, f)
}

/// Scans `eps = 2^-j`, `j = 1..=20`, and keeps the valid certificate with
/// the largest margin (ties to the smaller `eps`). If none is valid the
/// largest-margin candidate is returned as is.
pub fn best_perturbation_certificate(n: u64) -> Result<(f64, Certificate)> {
    let candidates = (1..=PERTURBATION_SCAN_STEPS)
        .into_par_iter()
        .map(|j| {
            let eps = 0.5f64.powi(j as i32);
            build_perturbation_certificate(n, eps).map(|c| (eps, c))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(f64, Certificate)> = None;
    for (eps, cert) in candidates {
        let better = match &best {
            None => true,
            Some((best_eps, b)) => {
                (cert.valid && !b.valid)
                    || (cert.valid == b.valid
                        && (cert.margin > b.margin || (cert.margin == b.margin && eps < *best_eps)))
            }
        };
        if better {
            best = Some((eps, cert));
        }
    }
    Ok(best.expect("scan is nonempty"))
}

/// `sum_{a in I} (1_I * 1_I)(a)` by exact integer convolution.
pub fn interval_overlap_sum(n: u64) -> BigUint {
    if n == 0 {
        return BigUint::from(0u32);
    }
    let len = n as usize;
    // (1_I * 1_I) on index s = a + b - 2 start, a, b in 0..len
    let mut conv = vec![0u64; 2 * len - 1];
    for a in 0..len {
        for b in 0..len {
            conv[a + b] += 1;
        }
    }
    let (start, _) = perturbation_interval(n);
    (0..len as i64)
        .map(|i| {
            let point = start + i;
            let idx = point - 2 * start;
            usize::try_from(idx).ok().and_then(|i| conv.get(i)).copied().unwrap_or(0)
        })
        .fold(BigUint::from(0u32), |acc, c| acc + c)
}

/// `ceil(3 n^2 / 4)`.
pub fn overlap_formula(n: u64) -> BigUint {
    (BigUint::from(n) * n * 3u32 + 3u32) / 4u32
}

/// The sampled-Gaussian schedule for a given `n` and `eps`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianScheduleParams {
    pub eps: f64,
    pub n: u64,
    pub k: u64,
    pub a_param: f64,
    pub m_trunc: u64,
    #[serde(with = "dd_string")]
    pub q: DoubleDouble,
}

impl GaussianScheduleParams {
    /// `k = floor((n-1)/2)`, `A = k^(2 - eps/10)`, `M = floor(k^(1 - eps/100))`
    /// and `q = 4 / (3 - (1+eps) log_n(3 sqrt(3) / 4))`.
    pub fn new(n: u64, eps: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("the Gaussian construction needs n >= 3, got {n}")));
        }
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidParameter(format!("eps must lie in (0, 1], got {eps}")));
        }
        let k = (n - 1) / 2;
        let kf = k as f64;
        let a_param = kf.powf(2.0 - eps / 10.0);
        let m_trunc = (kf.powf(1.0 - eps / 100.0).floor() as u64).min(k);
        let companion = DoubleDouble::from(27.0).sqrt() / 4.0;
        let log_n = companion.ln() / DoubleDouble::from(n).ln();
        let q = DoubleDouble::from(4.0) / (DoubleDouble::from(3.0) - (DoubleDouble::from(1.0) + eps) * log_n);
        Ok(Self { eps, n, k, a_param, m_trunc, q })
    }

    /// Schedule for `n = 2k + 1`.
    pub fn from_k(k: u64, eps: f64) -> Result<Self> {
        Self::new(2 * k + 1, eps)
    }

    pub fn spec(&self) -> GaussianSpec {
        GaussianSpec::new(self.a_param).expect("k >= 1 gives a positive width")
    }
}

/// `f(m) = exp(-m^2 / A)` for `-M <= m <= M` (or `-M <= m < M` when
/// `half_open`).
pub fn gaussian_samples(params: &GaussianScheduleParams, half_open: bool) -> DiscreteFunction {
    let m = params.m_trunc as i64;
    let end = if half_open { m - 1 } else { m };
    let values = (-m..=end).map(|x| (-((x * x) as f64) / params.a_param).exp()).collect();
    DiscreteFunction::new(-m, values).expect("Gaussian samples are finite")
}

pub fn build_gaussian_certificate(params: &GaussianScheduleParams) -> Result<Certificate> {
    build_gaussian_certificate_capped(params, GAUSSIAN_SUPPORT_CAP)
}

pub fn build_gaussian_certificate_capped(params: &GaussianScheduleParams, cap: u64) -> Result<Certificate> {
    let size = 2 * params.m_trunc + 1;
    if size > cap {
        return Err(Error::CapExceeded { what: "Gaussian support", size: size as u128, cap: cap as u128 });
    }
    evaluate(CertificateKind::Gaussian, params.n, params.q, gaussian_samples(params, false))
}

/// Measured distances between the continuous Gaussian, its truncation
/// `g_M`, and the samples `f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationReport {
    pub k: u64,
    pub eps: f64,
    pub a_param: f64,
    pub m_trunc: u64,
    pub q: f64,
    /// `||g^||_4`, closed form.
    pub l4hat_continuum: f64,
    /// `||g_M^||_4`, quadrature.
    pub l4hat_truncated: f64,
    /// `||f^||_4` with `f` on `{-M..M}`.
    pub l4hat_discrete: f64,
    /// `||f^||_4` with `f` on `{-M..M-1}`.
    pub l4hat_discrete_half_open: f64,
    pub lq_continuum: f64,
    pub lq_truncated: f64,
    pub lq_discrete: f64,
    pub lq_discrete_half_open: f64,
    /// Rounding bound shared by the discrete values.
    pub discrete_err: f64,
    /// `max_m sup_{x in [m, m+1)} |g_M(x) - f(m)| / f(m)` over `-M <= m < M`.
    pub pointwise_deviation: f64,
    /// `|||f^||_4 / ||g_M^||_4 - 1|`.
    pub l4_deviation: f64,
    /// `|||f||_q / ||g_M||_q - 1|`.
    pub lq_deviation: f64,
    pub l4_deviation_half_open: f64,
    pub lq_deviation_half_open: f64,
    /// `||g^||_4 - ||g_M^||_4`.
    pub truncation_deficit: f64,
    /// `exp(-k^(eps/20))`.
    pub truncation_bound: f64,
}

impl DiscretizationReport {
    pub fn truncation_within_bound(&self) -> bool {
        self.truncation_deficit <= self.truncation_bound
    }

    /// Difference between the two support conventions, relative to `||f^||_4`.
    pub fn parity_gap(&self) -> f64 {
        (self.l4hat_discrete - self.l4hat_discrete_half_open).abs() / self.l4hat_discrete
    }
}

pub fn continuum_discretization_report(params: &GaussianScheduleParams) -> Result<DiscretizationReport> {
    let spec = params.spec();
    let q = params.q.to_f64();
    let m = params.m_trunc as f64;
    let a = params.a_param;

    let l4hat_truncated = continuum::truncated_l4hat_pow4(spec, m)?.powf(0.25);
    let lq_truncated = continuum::truncated_lq_pow(spec, q, m)?.powf(1.0 / q);

    let sym = gaussian_samples(params, false);
    let half = gaussian_samples(params, true);
    let (l4_sym, l4_half) = (l4hat_bounded(&sym), l4hat_bounded(&half));
    let (lq_sym, lq_half) = (lq_bounded(&sym, params.q), lq_bounded(&half, params.q));
    let discrete_err = [l4_sym, l4_half, lq_sym, lq_half].iter().map(|b| b.rel_err).fold(0.0, f64::max);

    // g is monotone on each cell, so the sup sits at the far endpoint;
    // the largest ratio comes from the leftmost cell m = -M
    let pointwise_deviation = (-(params.m_trunc as i64)..params.m_trunc as i64)
        .map(|c| {
            let r = (-(2.0 * c as f64 + 1.0) / a).exp();
            (r - 1.0).abs()
        })
        .fold(0.0, f64::max);

    let dev = |x: f64, y: f64| (x / y - 1.0).abs();
    let l4hat_continuum = continuum::gaussian_l4hat(spec);
    Ok(DiscretizationReport {
        k: params.k,
        eps: params.eps,
        a_param: a,
        m_trunc: params.m_trunc,
        q,
        l4hat_continuum,
        l4hat_truncated,
        l4hat_discrete: l4_sym.value.to_f64(),
        l4hat_discrete_half_open: l4_half.value.to_f64(),
        lq_continuum: continuum::gaussian_lq(spec, q)?,
        lq_truncated,
        lq_discrete: lq_sym.value.to_f64(),
        lq_discrete_half_open: lq_half.value.to_f64(),
        discrete_err,
        pointwise_deviation,
        l4_deviation: dev(l4_sym.value.to_f64(), l4hat_truncated),
        lq_deviation: dev(lq_sym.value.to_f64(), lq_truncated),
        l4_deviation_half_open: dev(l4_half.value.to_f64(), l4hat_truncated),
        lq_deviation_half_open: dev(lq_half.value.to_f64(), lq_truncated),
        truncation_deficit: l4hat_continuum - l4hat_truncated,
        truncation_bound: (-(params.k as f64).powf(params.eps / 20.0)).exp(),
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len()) as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// A strict lower bound `t_n > t_lower` obtained from a valid certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsContribution {
    pub n: u64,
    pub kind: CertificateKind,
    #[serde(with = "dd_string")]
    pub t_lower: DoubleDouble,
    pub strict: bool,
}

pub fn certificate_to_bound(cert: &Certificate) -> Result<BoundsContribution> {
    if cert.q <= four_thirds() {
        return Err(Error::InvalidParameter(format!(
            "a certificate at q = {} <= 4/3 would contradict Hausdorff-Young",
            format_dd(cert.q)
        )));
    }
    if !cert.valid {
        return Err(Error::InvalidCertificate { margin: cert.margin.to_f64(), err: cert.err });
    }
    Ok(BoundsContribution { n: cert.n, kind: cert.kind, t_lower: cert.implied_t_bound, strict: true })
}

mod dd_string {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::dd::DoubleDouble;
    use crate::decimal::{format_dd, parse_dd};

    pub fn serialize<S: Serializer>(x: &DoubleDouble, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_dd(*x))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DoubleDouble, D::Error> {
        let s = String::deserialize(d)?;
        parse_dd(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CertificateDoc {
    kind: CertificateKind,
    n: u64,
    q: String,
    offset: i64,
    values: Vec<String>,
    lhs: String,
    rhs: String,
    margin: String,
    err: String,
    implied_t_bound: String,
    valid: bool,
}

impl Serialize for Certificate {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CertificateDoc {
            kind: self.kind,
            n: self.n,
            q: format_dd(self.q),
            offset: self.f.offset(),
            values: self.f.values().iter().map(|&v| format_f64(v)).collect(),
            lhs: format_dd(self.lhs),
            rhs: format_dd(self.rhs),
            margin: format_dd(self.margin),
            err: format_f64(self.err),
            implied_t_bound: format_dd(self.implied_t_bound),
            valid: self.valid,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Certificate {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = CertificateDoc::deserialize(d)?;
        let values = doc.values.iter().map(|v| parse_f64(v)).collect::<Result<Vec<_>>>().map_err(D::Error::custom)?;
        let dd = |s: &str| parse_dd(s).map_err(D::Error::custom);
        Ok(Certificate {
            kind: doc.kind,
            n: doc.n,
            q: dd(&doc.q)?,
            f: DiscreteFunction::new(doc.offset, values).map_err(D::Error::custom)?,
            lhs: dd(&doc.lhs)?,
            rhs: dd(&doc.rhs)?,
            margin: dd(&doc.margin)?,
            err: parse_f64(&doc.err).map_err(D::Error::custom)?,
            implied_t_bound: dd(&doc.implied_t_bound)?,
            valid: doc.valid,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perturbation_n3_example() {
        let eps = 0.1;
        let c = build_perturbation_certificate(3, eps).unwrap();
        assert!(c.valid);
        let q = 4.0 / 19f64.log(3.0);
        assert!((c.q.to_f64() - q).abs() < 1e-15);
        assert!((q - 1.4924).abs() < 1e-4);
        // ||f*f||_2^2 for f = (1, 1 + eps, 1)
        let lhs4 = 2.0 + 2.0 * (2.0 + 2.0 * eps).powi(2) + (3.0 + 2.0 * eps + eps * eps).powi(2);
        assert!((lhs4 - 21.9841).abs() < 1e-4);
        assert!((c.lhs.to_f64().powi(4) - lhs4).abs() < 1e-12);
        let rhs4 = (2.0 + 1.1f64.powf(q)).powf(4.0 / q);
        assert!((c.rhs.to_f64().powi(4) - rhs4).abs() < 1e-12);
        assert!(c.margin.to_f64() > 0.0);
        assert!((c.implied_t_bound.to_f64() - 19f64.log(3.0)).abs() < 1e-14);
        assert!((c.implied_t_bound.to_f64() - 2.680144).abs() < 1e-6);
        assert!(c.revalidates());
    }

    #[test]
    fn eps_zero_is_equality() {
        for n in [3, 4, 10, 57] {
            let c = build_perturbation_certificate(n, 0.0).unwrap();
            assert!(!c.valid);
            assert!(c.margin.abs() <= DoubleDouble::from(c.err), "n = {n}");
            assert!(c.err < 1e-25);
        }
    }

    #[test]
    fn perturbation_rejects_small_n_and_bad_eps() {
        assert!(build_perturbation_certificate(2, 0.1).is_err());
        assert!(build_perturbation_certificate(5, -0.1).is_err());
        assert!(build_perturbation_certificate(5, 1.5).is_err());
    }

    #[test]
    fn linear_coefficient_of_margin() {
        // d/deps (||f*f||_2^2 - ||f||_q^4) at eps = 0 against the
        // comparison 3n^2 - (4/3)(2n^2 + 1)
        for n in [3u64, 4, 7, 20] {
            let q = perturbation_exponent(n).unwrap().to_f64();
            let d4 = |eps: f64| {
                let c = build_perturbation_certificate(n, eps).unwrap();
                c.lhs.to_f64().powi(4) - c.rhs.to_f64().powi(4)
            };
            // Richardson on d(e) = a e + b e^2 + ...
            let (e1, e2) = (1e-4, 2e-4);
            let slope = (4.0 * d4(e1) - d4(e2)) / (2.0 * e1);
            let nf = n as f64;
            let gap = 3.0 * nf * nf - 4.0 / 3.0 * (2.0 * nf * nf + 1.0);
            assert!(slope > 0.0);
            // 4 sum_{a in I} (1_I*1_I)(a) from the left side, 4 E / n from the right
            let exact = 4.0 * overlap_formula(n).to_f64().unwrap() - 4.0 / 3.0 * (2.0 * nf * nf + 1.0);
            assert!((slope - exact).abs() < 1e-3 * exact.abs(), "n = {n}: {slope} vs {exact} (q = {q})");
            assert!(exact >= gap - 1e-9, "n = {n}");
        }
    }

    #[test]
    fn best_perturbation_is_valid_over_a_range() {
        for n in [3u64, 5, 8, 33, 100] {
            let (eps, c) = best_perturbation_certificate(n).unwrap();
            assert!(c.valid, "n = {n}");
            assert!(eps > 0.0 && eps <= 0.5);
            let expect = ((2.0 * (n as f64).powi(3) + n as f64) / 3.0).log(n as f64);
            assert!((c.implied_t_bound.to_f64() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(interval_overlap_sum(3), BigUint::from(7u32));
        assert_eq!(interval_overlap_sum(1), BigUint::from(1u32));
        assert_eq!(interval_overlap_sum(4), BigUint::from(12u32));
        for n in 1..=120 {
            assert_eq!(interval_overlap_sum(n), overlap_formula(n), "n = {n}");
        }
    }

    #[test]
    fn schedule_parameters() {
        let p = GaussianScheduleParams::from_k(100, 0.5).unwrap();
        assert_eq!(p.n, 201);
        assert!((p.a_param - 100f64.powf(1.95)).abs() < 1e-9);
        assert_eq!(p.m_trunc, (100f64.powf(0.995)).floor() as u64);
        assert!(p.m_trunc <= p.k);
        let expect_q = 4.0 / (3.0 - 1.5 * (27f64.sqrt() / 4.0).log(201.0));
        assert!((p.q.to_f64() - expect_q).abs() < 1e-14);
        assert!(p.q > four_thirds());
        // even n keeps the support inside length n
        let even = GaussianScheduleParams::new(10, 0.5).unwrap();
        assert_eq!(even.k, 4);
        assert!(2 * even.m_trunc + 1 <= 10);
        assert!(GaussianScheduleParams::new(2, 0.5).is_err());
        assert!(GaussianScheduleParams::new(11, 0.0).is_err());
    }

    #[test]
    fn gaussian_certificate_respects_hausdorff_young_and_cap() {
        for (n, eps) in [(9u64, 0.5), (41, 1.0), (201, 0.5)] {
            let p = GaussianScheduleParams::new(n, eps).unwrap();
            let c = build_gaussian_certificate(&p).unwrap();
            assert!(c.fits());
            let l43 = lq_bounded(&c.f, four_thirds());
            assert!(c.lhs.to_f64() <= l43.value.to_f64() * (1.0 + c.err + l43.rel_err));
            assert_eq!(c.valid, c.margin > DoubleDouble::from(c.err));
        }
        let p = GaussianScheduleParams::from_k(1000, 0.5).unwrap();
        assert!(matches!(build_gaussian_certificate_capped(&p, 100), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn gaussian_certificate_validates_at_moderate_k() {
        let p = GaussianScheduleParams::from_k(100, 0.5).unwrap();
        let c = build_gaussian_certificate(&p).unwrap();
        assert!(c.valid);
        let b = certificate_to_bound(&c).unwrap();
        let expect = 3.0 - 1.5 * (27f64.sqrt() / 4.0).log(201.0);
        assert!((b.t_lower.to_f64() - expect).abs() < 1e-12);
    }

    #[test]
    fn no_certificate_at_four_thirds() {
        let q = four_thirds();
        for f in [
            DiscreteFunction::delta(0),
            DiscreteFunction::indicator(0, 5),
            DiscreteFunction::new(0, vec![1.0, 3.0, 0.5, 2.0]).unwrap(),
        ] {
            let c = evaluate(CertificateKind::Explicit, 8, q, f).unwrap();
            assert!(!c.valid);
            assert!(certificate_to_bound(&c).is_err());
        }
    }

    #[test]
    fn bound_requires_validity() {
        let c = build_perturbation_certificate(3, 0.0).unwrap();
        assert!(matches!(certificate_to_bound(&c), Err(Error::InvalidCertificate { .. })));
        let c = build_perturbation_certificate(3, 0.25).unwrap();
        let b = certificate_to_bound(&c).unwrap();
        assert!(b.strict);
        assert_eq!(b.t_lower, c.implied_t_bound);
    }

    #[test]
    fn support_must_fit() {
        let c = evaluate(CertificateKind::Explicit, 3, DoubleDouble::from(1.9), DiscreteFunction::new(0, vec![1.0, 0.0, 0.0, 1.0]).unwrap()).unwrap();
        assert!(!c.fits());
        assert!(!c.valid);
    }

    #[test]
    fn json_round_trip() {
        let c = build_perturbation_certificate(5, 0.125).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(|s| s.as_str()).collect();
        for key in ["kind", "n", "q", "offset", "values", "lhs", "rhs", "margin", "err", "implied_t_bound", "valid"] {
            assert!(keys.contains(&key), "{key}");
        }
        assert_eq!(v["kind"], "perturbation");
        let back: Certificate = serde_json::from_str(&text).unwrap();
        assert_eq!(back.f, c.f);
        assert_eq!(back.valid, c.valid);
        assert!((back.q - c.q).abs() <= c.q.abs() * 1e-32);
        assert!(back.revalidates());
    }

    #[test]
    fn discretization_report_at_k100() {
        let p = GaussianScheduleParams::from_k(100, 0.5).unwrap();
        let r = continuum_discretization_report(&p).unwrap();
        for x in [r.pointwise_deviation, r.l4_deviation, r.lq_deviation, r.truncation_deficit, r.truncation_bound] {
            assert!(x.is_finite() && x >= 0.0);
        }
        assert!(r.l4hat_truncated <= r.l4hat_continuum);
        assert!(r.lq_truncated <= r.lq_continuum);
        let expect = (2.0 * r.m_trunc as f64 - 1.0) / r.a_param;
        assert!((r.pointwise_deviation - expect.exp_m1()).abs() < 1e-12);
        assert!(r.l4_deviation < 0.01 && r.lq_deviation < 0.01);
    }

    #[test]
    fn slope_of_a_power_law() {
        let xs = [1e2, 1e3, 1e4];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-0.5)).collect();
        assert!((loglog_slope(&xs, &ys) + 0.5).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn emitted_perturbation_certificates_revalidate(n in 3u64..60, j in 1u32..=20) {
            let c = build_perturbation_certificate(n, 0.5f64.powi(j as i32)).unwrap();
            prop_assert!(c.valid);
            prop_assert!(c.revalidates());
        }
    }
}
