use std::collections::{HashMap, HashSet};
use std::hash::Hash;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::DiscreteFunction;
use crate::error::{Error, Result};

/// Largest set accepted by [`energy_bruteforce`].
pub const DEFAULT_ORACLE_CAP: usize = 300;

/// Largest point count produced by [`tensor_power`].
pub const DEFAULT_TENSOR_CAP: usize = 2_000_000;

/// A finite set of points of `{0, ..., side-1}^dim`, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeSet {
    dim: usize,
    side: u64,
    points: Vec<Vec<i64>>,
}

impl LatticeSet {
    pub fn new(dim: usize, side: u64, mut points: Vec<Vec<i64>>) -> Result<Self> {
        if dim == 0 || side == 0 {
            return Err(Error::InvalidSet(format!("dimension {dim} and side {side} must be positive")));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::InvalidSet(format!("point {p:?} does not have {dim} coordinates")));
            }
            if p.iter().any(|&c| c < 0 || c as u64 >= side) {
                return Err(Error::InvalidSet(format!("point {p:?} lies outside [0, {}]^{dim}", side - 1)));
            }
        }
        points.sort_unstable();
        if let Some(w) = points.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidSet(format!("duplicate point {:?}", w[0])));
        }
        Ok(Self { dim, side, points })
    }

    /// Translates arbitrary integer points into the smallest enclosing cube
    /// with a corner at the origin.
    pub fn from_points(dim: usize, points: Vec<Vec<i64>>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| p.len() != dim) {
            return Err(Error::InvalidSet(format!("point {p:?} does not have {dim} coordinates")));
        }
        if points.is_empty() {
            return Self::new(dim, 1, points);
        }
        let mins: Vec<i64> = (0..dim).map(|i| points.iter().map(|p| p[i]).min().unwrap()).collect();
        let side = (0..dim)
            .map(|i| points.iter().map(|p| p[i] - mins[i]).max().unwrap() as u64 + 1)
            .max()
            .unwrap_or(1);
        let shifted = points.into_iter().map(|p| p.iter().zip(&mins).map(|(c, m)| c - m).collect()).collect();
        Self::new(dim, side, shifted)
    }

    /// `{0, ..., n-1}` in dimension one.
    pub fn interval(n: u64) -> Self {
        Self { dim: 1, side: n.max(1), points: (0..n as i64).map(|x| vec![x]).collect() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> u64 {
        self.side
    }

    pub fn points(&self) -> &[Vec<i64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indicator function of a one-dimensional set.
    pub fn indicator(&self) -> Option<DiscreteFunction> {
        (self.dim == 1).then(|| DiscreteFunction::indicator_of(&self.points.iter().map(|p| p[0]).collect::<Vec<_>>()))
    }

    /// Mixed-radix code of a point with coordinates in `[0, base)`, when it
    /// fits in 128 bits.
    fn radix_fits(base: u64, dim: usize) -> bool {
        (base as u128).checked_pow(dim as u32).is_some()
    }
}

fn encode(p: impl Iterator<Item = i64>, base: u64) -> u128 {
    p.fold(0u128, |acc, c| acc * base as u128 + c as u128)
}

fn representation_counts<K, F>(set: &LatticeSet, key: F) -> HashMap<K, u64>
where
    K: Hash + Eq,
    F: Fn(&[i64], &[i64]) -> K,
{
    let pts = set.points();
    let mut counts: HashMap<K, u64> = HashMap::with_capacity(pts.len() * 2);
    for (i, a) in pts.iter().enumerate() {
        *counts.entry(key(a, a)).or_insert(0) += 1;
        for b in &pts[i + 1..] {
            *counts.entry(key(a, b)).or_insert(0) += 2;
        }
    }
    counts
}

fn sum_of_squares<K>(counts: HashMap<K, u64>) -> BigUint {
    let mut total = BigUint::zero();
    let mut chunk: u128 = 0;
    for r in counts.into_values() {
        let sq = r as u128 * r as u128;
        match chunk.checked_add(sq) {
            Some(c) => chunk = c,
            None => {
                total += chunk;
                chunk = sq;
            }
        }
    }
    total + chunk
}

/// Exact additive energy `#{(a,b,c,d) in A^4 : a + b = c + d}` as the sum of
/// squared representation counts `r(s) = #{(a,b) : a + b = s}`.
pub fn energy_of_set(set: &LatticeSet) -> BigUint {
    let base = 2 * set.side() - 1;
    if LatticeSet::radix_fits(base, set.dim()) {
        sum_of_squares(representation_counts(set, |a, b| encode(a.iter().zip(b).map(|(x, y)| x + y), base)))
    } else {
        sum_of_squares(representation_counts(set, |a, b| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<i64>>()))
    }
}

/// Energy by enumerating `(a1, a2, a3)` and testing `a1 + a2 - a3` for
/// membership. Limited to `|A| <= DEFAULT_ORACLE_CAP`.
pub fn energy_bruteforce(set: &LatticeSet) -> Result<BigUint> {
    energy_bruteforce_capped(set, DEFAULT_ORACLE_CAP)
}

pub fn energy_bruteforce_capped(set: &LatticeSet, cap: usize) -> Result<BigUint> {
    if set.len() > cap {
        return Err(Error::CapExceeded { what: "brute-force energy oracle", size: set.len() as u128, cap: cap as u128 });
    }
    let pts = set.points();
    let side = set.side() as i64;
    let mut target = vec![0i64; set.dim()];
    let mut count: u128 = 0;
    if LatticeSet::radix_fits(set.side(), set.dim()) {
        let members: HashSet<u128> = pts.iter().map(|p| encode(p.iter().copied(), set.side())).collect();
        for a in pts {
            for b in pts {
                for c in pts {
                    for (t, ((x, y), z)) in target.iter_mut().zip(a.iter().zip(b).zip(c)) {
                        *t = x + y - z;
                    }
                    if target.iter().all(|&t| (0..side).contains(&t))
                        && members.contains(&encode(target.iter().copied(), set.side()))
                    {
                        count += 1;
                    }
                }
            }
        }
    } else {
        let members: HashSet<&[i64]> = pts.iter().map(|p| p.as_slice()).collect();
        for a in pts {
            for b in pts {
                for c in pts {
                    for (t, ((x, y), z)) in target.iter_mut().zip(a.iter().zip(b).zip(c)) {
                        *t = x + y - z;
                    }
                    if members.contains(target.as_slice()) {
                        count += 1;
                    }
                }
            }
        }
    }
    Ok(BigUint::from(count))
}

/// `E({0, ..., n-1}) = (2n^3 + n) / 3`.
pub fn energy_interval_formula(n: u64) -> BigUint {
    let n = BigUint::from(n);
    (&n * &n * &n * 2u32 + &n) / 3u32
}

/// Cartesian power `A^d` of a one-dimensional set.
pub fn tensor_power(set: &LatticeSet, d: usize) -> Result<LatticeSet> {
    tensor_power_capped(set, d, DEFAULT_TENSOR_CAP)
}

pub fn tensor_power_capped(set: &LatticeSet, d: usize, cap: usize) -> Result<LatticeSet> {
    if set.dim() != 1 {
        return Err(Error::InvalidParameter(format!("tensor power needs a one-dimensional set, got dim {}", set.dim())));
    }
    if d == 0 {
        return Err(Error::InvalidParameter("tensor power exponent must be positive".into()));
    }
    let size = (set.len() as u128).checked_pow(d as u32).unwrap_or(u128::MAX);
    if size > cap as u128 {
        return Err(Error::CapExceeded { what: "tensor power", size, cap: cap as u128 });
    }
    let coords: Vec<i64> = set.points().iter().map(|p| p[0]).collect();
    let mut points: Vec<Vec<i64>> = vec![Vec::with_capacity(d)];
    for _ in 0..d {
        points = points
            .into_iter()
            .flat_map(|prefix| {
                coords.iter().map(move |&c| {
                    let mut p = prefix.clone();
                    p.push(c);
                    p
                })
            })
            .collect();
    }
    LatticeSet::new(d, set.side(), points)
}

/// `log_n ((2n^3 + n) / 3)`, the energy exponent of the full cube.
pub fn trivial_lower_bound(n: u64) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("trivial lower bound needs n >= 2, got {n}")));
    }
    let e = energy_interval_formula(n).to_f64().unwrap();
    Ok(e.ln() / (n as f64).ln())
}
