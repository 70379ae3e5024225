//! Bounds tables, the lattice-ball experiment, and result files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certificates::{self, GaussianScheduleParams};
use crate::continuum::beckner_companion;
use crate::discrete::{energy_bruteforce, energy_of_set, trivial_lower_bound, LatticeSet, DEFAULT_ORACLE_CAP};
use crate::error::{Error, Result};
use crate::optimizer::{self, OptimizerConfig};

/// Largest point count of a lattice ball.
pub const DEFAULT_BALL_CAP: usize = 2_000_000;

/// Slack on `|x - c|^2 <= r^2` so that points exactly on the sphere count.
const BALL_TOLERANCE: f64 = 1e-9;

/// `3 - log_n(3 sqrt(3) / 4)`.
pub fn asymptotic_target(n: u64) -> f64 {
    3.0 - beckner_companion().ln() / (n as f64).ln()
}

/// `3 - (1 - eps) log_n(3 sqrt(3) / 4)`.
pub fn conjecture_target(n: u64, eps: f64) -> f64 {
    3.0 - (1.0 - eps) * beckner_companion().ln() / (n as f64).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceKind {
    Exact,
    Lower,
}

/// Known values of `t_n` for small `n`.
pub fn known_reference(n: u64) -> Option<(f64, ReferenceKind)> {
    match n {
        2 => Some((6f64.log2(), ReferenceKind::Exact)),
        3 => Some((2.71949, ReferenceKind::Lower)),
        _ => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsOptions {
    /// `eps` values tried for the Gaussian certificate.
    pub gaussian_eps: Vec<f64>,
    /// `eps` used in the conjecture column.
    pub conjecture_eps: f64,
    pub with_optimizer: bool,
    pub optimizer_tol: f64,
    pub seed: u64,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        Self { gaussian_eps: vec![1.0, 0.5, 0.25], conjecture_eps: 0.5, with_optimizer: false, optimizer_tol: 1e-3, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub n: u64,
    /// `log_n E({0..n-1})`.
    pub trivial_lower: f64,
    /// Strict bound from a valid perturbation certificate.
    pub perturbation_lower: Option<f64>,
    pub perturbation_strict: bool,
    pub perturbation_eps: Option<f64>,
    /// Strict bound from the best valid Gaussian certificate.
    pub gaussian_lower: Option<f64>,
    pub gaussian_eps: Option<f64>,
    pub asymptotic_target: f64,
    pub conjecture_target: f64,
    pub conjecture_eps: f64,
    /// `4 / q_hat` from the optimizer bisection, when its witness validated.
    pub empirical_t: Option<f64>,
    pub empirical_c: Option<f64>,
    pub reference: Option<f64>,
    pub reference_kind: Option<ReferenceKind>,
    pub notes: Vec<String>,
}

fn bounds_row(n: u64, options: &BoundsOptions) -> Result<BoundsRow> {
    let mut notes = Vec::new();
    let trivial_lower = trivial_lower_bound(n)?;

    let (mut perturbation_lower, mut perturbation_eps) = (None, None);
    if n >= 3 {
        match certificates::best_perturbation_certificate(n) {
            Ok((eps, cert)) if cert.valid => {
                perturbation_lower = Some(cert.implied_t_bound.to_f64());
                perturbation_eps = Some(eps);
            }
            Ok(_) => notes.push("perturbation certificate did not validate".into()),
            Err(e) => notes.push(format!("perturbation: {e}")),
        }
    }

    let (mut gaussian_lower, mut gaussian_eps): (Option<f64>, Option<f64>) = (None, None);
    if n >= 3 {
        for &eps in &options.gaussian_eps {
            let cert = GaussianScheduleParams::new(n, eps).and_then(|p| certificates::build_gaussian_certificate(&p));
            match cert {
                Ok(c) if c.valid => {
                    let t = c.implied_t_bound.to_f64();
                    if gaussian_lower.map_or(true, |g| t > g) {
                        gaussian_lower = Some(t);
                        gaussian_eps = Some(eps);
                    }
                }
                Ok(_) => {}
                Err(e) => notes.push(format!("gaussian eps={eps}: {e}")),
            }
        }
    }

    let (mut empirical_t, mut empirical_c) = (None, None);
    if options.with_optimizer {
        let config = OptimizerConfig::new(n, 1.5).with_seed(options.seed);
        match optimizer::estimate_qn(n, options.optimizer_tol, &config) {
            Ok(est) if est.witness.is_some() => {
                empirical_t = Some(est.t_hat);
                empirical_c = Some(est.c_emp);
            }
            Ok(_) => notes.push("optimizer found no violation".into()),
            Err(e) => notes.push(format!("optimizer: {e}")),
        }
    }

    let reference = known_reference(n);
    Ok(BoundsRow {
        n,
        trivial_lower,
        perturbation_strict: perturbation_lower.is_some(),
        perturbation_lower,
        perturbation_eps,
        gaussian_lower,
        gaussian_eps,
        asymptotic_target: asymptotic_target(n),
        conjecture_target: conjecture_target(n, options.conjecture_eps),
        conjecture_eps: options.conjecture_eps,
        empirical_t,
        empirical_c,
        reference: reference.map(|r| r.0),
        reference_kind: reference.map(|r| r.1),
        notes,
    })
}

/// One row per `n`, computed in parallel. A failure inside a row is
/// recorded in its notes; only `n < 2` is rejected outright.
pub fn bounds_table(n_values: &[u64], options: &BoundsOptions) -> Result<Vec<BoundsRow>> {
    if let Some(n) = n_values.iter().find(|&&n| n < 2) {
        return Err(Error::InvalidParameter(format!("bounds table needs n >= 2, got {n}")));
    }
    n_values.par_iter().map(|&n| bounds_row(n, options)).collect()
}

/// All integer points within distance `radius` of `center`, translated
/// into `{0, ..., side-1}^d`.
pub fn ball_lattice_set(d: usize, radius: f64, center: &[f64]) -> Result<LatticeSet> {
    ball_lattice_set_capped(d, radius, center, DEFAULT_BALL_CAP)
}

pub fn ball_lattice_set_capped(d: usize, radius: f64, center: &[f64], cap: usize) -> Result<LatticeSet> {
    if d == 0 || center.len() != d {
        return Err(Error::InvalidParameter(format!("center {center:?} must have d = {d} > 0 coordinates")));
    }
    if !(radius > 0.0 && radius.is_finite()) || center.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter(format!("radius {radius} and center must be finite, radius positive")));
    }
    let side = (2.0 * radius + 2.0) as u128;
    if side > cap as u128 {
        return Err(Error::CapExceeded { what: "ball bounding cube side", size: side, cap: cap as u128 });
    }
    let r2 = radius * radius + BALL_TOLERANCE;
    let mut points = Vec::new();
    let mut current = Vec::with_capacity(d);
    enumerate_ball(center, r2, 0.0, &mut current, &mut points, cap)?;
    LatticeSet::from_points(d, points)
}

fn enumerate_ball(
    center: &[f64],
    r2: f64,
    used: f64,
    current: &mut Vec<i64>,
    out: &mut Vec<Vec<i64>>,
    cap: usize,
) -> Result<()> {
    let i = current.len();
    if i == center.len() {
        if out.len() == cap {
            return Err(Error::CapExceeded { what: "ball point count", size: cap as u128 + 1, cap: cap as u128 });
        }
        out.push(current.clone());
        return Ok(());
    }
    let rest = (r2 - used).max(0.0).sqrt();
    let lo = (center[i] - rest).ceil() as i64;
    let hi = (center[i] + rest).floor() as i64;
    for x in lo..=hi {
        let dx = x as f64 - center[i];
        let u = used + dx * dx;
        if u <= r2 {
            current.push(x);
            enumerate_ball(center, r2, u, current, out, cap)?;
            current.pop();
        }
    }
    Ok(())
}

/// The two centres tried for each ball: the origin and `(1/2, ..., 1/2)`.
pub fn ball_centers(d: usize) -> [Vec<f64>; 2] {
    [vec![0.0; d], vec![0.5; d]]
}

mod big_string {
    use num_bigint::BigUint;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&x.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallExperimentRow {
    pub d: usize,
    pub radius: f64,
    pub center: Vec<f64>,
    pub side: u64,
    #[serde(with = "big_string")]
    pub set_size: BigUint,
    #[serde(with = "big_string")]
    pub energy: BigUint,
    /// `energy / set_size^3`.
    pub energy_ratio: f64,
    /// `(4 sqrt(3) / 9)^d`.
    pub reference_ratio: f64,
    /// Agreement with the brute-force count, when the set is small enough.
    pub oracle_match: Option<bool>,
}

impl BallExperimentRow {
    pub fn within_trivial_bounds(&self) -> bool {
        let s = &self.set_size;
        s * s <= self.energy && self.energy <= s * s * s
    }
}

/// Every `(d, radius)` pair with both centres.
pub fn ball_energy_experiment(d_values: &[usize], radii: &[f64]) -> Result<Vec<BallExperimentRow>> {
    let jobs: Vec<(usize, f64, Vec<f64>)> = d_values
        .iter()
        .flat_map(|&d| radii.iter().flat_map(move |&r| ball_centers(d).into_iter().map(move |c| (d, r, c))))
        .collect();
    jobs.into_par_iter()
        .map(|(d, radius, center)| {
            let set = ball_lattice_set(d, radius, &center)?;
            let energy = energy_of_set(&set);
            let size = BigUint::from(set.len());
            let oracle_match = (set.len() <= DEFAULT_ORACLE_CAP).then(|| energy_bruteforce(&set).ok() == Some(energy.clone()));
            let cube = size.to_f64().unwrap_or(f64::INFINITY).powi(3);
            Ok(BallExperimentRow {
                d,
                radius,
                center,
                side: set.side(),
                energy_ratio: energy.to_f64().unwrap_or(f64::INFINITY) / cube,
                reference_ratio: (1.0 / beckner_companion()).powi(d as i32),
                set_size: size,
                energy,
                oracle_match,
            })
        })
        .collect()
}

/// Fixed-column CSV rendering.
pub trait CsvRow {
    const HEADER: &'static str;
    fn csv_fields(&self) -> Vec<String>;
}

/// `x` to 12 significant digits, without trailing zeros.
pub fn format_sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exp = x.abs().log10().floor() as i32;
    let s = if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.11e}")
    };
    trim_zeros(&s)
}

fn trim_zeros(s: &str) -> String {
    let (mantissa, exponent) = match s.find('e') {
        Some(i) => (&s[..i], &s[i..]),
        None => (s, ""),
    };
    let mantissa = if mantissa.contains('.') { mantissa.trim_end_matches('0').trim_end_matches('.') } else { mantissa };
    format!("{mantissa}{exponent}")
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig12).unwrap_or_default()
}

impl CsvRow for BoundsRow {
    const HEADER: &'static str = "n,trivial_lower,perturbation_lower,gaussian_lower,asymptotic_target,empirical_t,reference";

    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            format_sig12(self.trivial_lower),
            opt(self.perturbation_lower),
            opt(self.gaussian_lower),
            format_sig12(self.asymptotic_target),
            opt(self.empirical_t),
            opt(self.reference),
        ]
    }
}

impl CsvRow for BallExperimentRow {
    const HEADER: &'static str = "d,radius,center,side,set_size,energy,energy_ratio,reference_ratio";

    fn csv_fields(&self) -> Vec<String> {
        let center: Vec<String> = self.center.iter().map(|c| format_sig12(*c)).collect();
        vec![
            self.d.to_string(),
            format_sig12(self.radius),
            center.join(" "),
            self.side.to_string(),
            self.set_size.to_string(),
            self.energy.to_string(),
            format_sig12(self.energy_ratio),
            format_sig12(self.reference_ratio),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResultFormat {
    Json,
    Csv,
}

pub fn render_csv<T: CsvRow>(rows: &[T]) -> String {
    let mut out = String::new();
    out.push_str(T::HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{}", row.csv_fields().join(","));
    }
    out
}

pub fn render_json<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut s = serde_json::to_string_pretty(rows)?;
    s.push('\n');
    Ok(s)
}

pub fn write_results<T: CsvRow + Serialize>(rows: &[T], path: &Path, format: ResultFormat) -> Result<()> {
    let text = match format {
        ResultFormat::Json => render_json(rows)?,
        ResultFormat::Csv => render_csv(rows),
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest<C> {
    pub tool_version: String,
    pub seed: u64,
    pub config: C,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` overrides the clock.
    pub timestamp: u64,
}

fn timestamp() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()) {
        return t;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

pub fn write_manifest<C: Serialize>(config: &C, seed: u64, tool_version: &str, path: &Path) -> Result<()> {
    let manifest = Manifest { tool_version: tool_version.to_string(), seed, config, timestamp: timestamp() };
    let mut s = serde_json::to_string_pretty(&manifest)?;
    s.push('\n');
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::energy_interval_formula;

    #[test]
    fn sig12_formatting() {
        assert_eq!(format_sig12(6f64.log2()), "2.58496250072");
        assert_eq!(format_sig12(3.0), "3");
        assert_eq!(format_sig12(0.000123456789012345), "0.000123456789012");
        assert_eq!(format_sig12(1.5e20), "1.5e20");
        assert_eq!(format_sig12(-2.25), "-2.25");
    }

    #[test]
    fn targets() {
        let mut prev = 0.0;
        for n in 2..200 {
            let t = asymptotic_target(n);
            assert!(t > prev && t < 3.0);
            prev = t;
        }
        let n10 = 3.0 - (27f64.sqrt() / 4.0).log10();
        assert!((asymptotic_target(10) - n10).abs() < 1e-14);
        assert!(conjecture_target(10, 0.5) > asymptotic_target(10));
    }

    #[test]
    fn rows_for_small_n() {
        let rows = bounds_table(&[2, 3, 10], &BoundsOptions::default()).unwrap();
        assert_eq!(rows[0].n, 2);
        assert!((rows[0].trivial_lower - 6f64.log2()).abs() < 1e-15);
        assert_eq!(rows[0].reference, Some(rows[0].trivial_lower));
        assert_eq!(rows[0].perturbation_lower, None);
        assert!((rows[1].perturbation_lower.unwrap() - 19f64.log(3.0)).abs() < 1e-12);
        assert!(rows[1].perturbation_strict);
        assert_eq!(rows[1].reference_kind, Some(ReferenceKind::Lower));
        assert!((rows[2].trivial_lower - 670f64.log10()).abs() < 1e-14);
        for row in &rows {
            if row.n >= 3 {
                assert!((row.trivial_lower - row.perturbation_lower.unwrap()).abs() < 1e-12);
                assert!(row.perturbation_lower.unwrap() < 3.0);
            }
            for v in [row.perturbation_lower, row.gaussian_lower, row.empirical_t].into_iter().flatten() {
                assert!(v <= 3.0);
            }
        }
        assert!(bounds_table(&[1], &BoundsOptions::default()).is_err());
    }

    #[test]
    fn ball_examples() {
        let b = ball_lattice_set(1, 1.5, &[0.0]).unwrap();
        assert_eq!(b.points(), &[vec![0], vec![1], vec![2]]);
        assert_eq!(energy_of_set(&b), BigUint::from(19u32));
        let cross = ball_lattice_set(2, 1.0, &[0.0, 0.0]).unwrap();
        assert_eq!(cross.len(), 5);
        assert_eq!(cross.side(), 3);
        let b = ball_lattice_set(2, 2.5, &[0.0, 0.0]).unwrap();
        assert_eq!(b.len(), 21);
        assert_eq!(energy_of_set(&b), energy_bruteforce(&b).unwrap());
        let half = ball_lattice_set(2, 1.0, &[0.5, 0.5]).unwrap();
        assert_eq!(half.len(), 4);
        assert!(ball_lattice_set_capped(3, 10.0, &[0.0; 3], 100).is_err());
        assert!(ball_lattice_set(2, 1.0, &[0.0]).is_err());
        assert!(ball_lattice_set(2, -1.0, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn one_dimensional_ratio_tends_to_two_thirds() {
        let rows = ball_energy_experiment(&[1], &[10.0, 100.0, 1000.0]).unwrap();
        let origin: Vec<_> = rows.iter().filter(|r| r.center[0] == 0.0).collect();
        for w in origin.windows(2) {
            assert!((w[1].energy_ratio - 2.0 / 3.0).abs() < (w[0].energy_ratio - 2.0 / 3.0).abs());
        }
        let last = origin.last().unwrap();
        assert_eq!(last.energy, energy_interval_formula(2001));
        assert!(rows.iter().all(|r| r.within_trivial_bounds()));
    }

    #[test]
    fn csv_and_json_files() {
        let dir = tempfile::tempdir().unwrap();
        let empty: Vec<BoundsRow> = Vec::new();
        let p = dir.path().join("empty.csv");
        write_results(&empty, &p, ResultFormat::Csv).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), format!("{}\n", BoundsRow::HEADER));

        let rows = bounds_table(&[2, 3, 7], &BoundsOptions::default()).unwrap();
        let p = dir.path().join("rows.json");
        write_results(&rows, &p, ResultFormat::Json).unwrap();
        let back: Vec<BoundsRow> = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(back, rows);

        let balls = ball_energy_experiment(&[2], &[2.5]).unwrap();
        let p = dir.path().join("balls.json");
        write_results(&balls, &p, ResultFormat::Json).unwrap();
        let back: Vec<BallExperimentRow> = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(back, balls);

        let missing = dir.path().join("no/such/dir/x.csv");
        let err = write_results(&rows, &missing, ResultFormat::Csv).unwrap_err();
        assert!(err.to_string().contains("x.csv"));
    }

    #[test]
    fn manifest_records_config() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.json");
        write_manifest(&BoundsOptions::default(), 7, crate::TOOL_VERSION, &p).unwrap();
        let m: Manifest<BoundsOptions> = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(m.seed, 7);
        assert_eq!(m.config, BoundsOptions::default());
        assert_eq!(m.tool_version, crate::TOOL_VERSION);
    }
}
