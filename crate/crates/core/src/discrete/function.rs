use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::decimal::{format_f64, parse_f64};
use crate::error::{Error, Result};

/// A finitely supported real function on the integers.
///
/// Stored canonically: `values[0]` and `values[last]` are nonzero, and the
/// zero function is `offset = 0` with no values. `values[i]` is the value at
/// `offset + i`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct DiscreteFunction {
    offset: i64,
    values: Vec<f64>,
}

impl DiscreteFunction {
    pub fn new(offset: i64, values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self::canonical(offset, values))
    }

    /// Trims zero entries at both ends. Callers guarantee finiteness.
    pub(crate) fn canonical(offset: i64, mut values: Vec<f64>) -> Self {
        let Some(first) = values.iter().position(|&v| v != 0.0) else {
            return Self::zero();
        };
        let last = values.iter().rposition(|&v| v != 0.0).unwrap();
        values.truncate(last + 1);
        values.drain(..first);
        Self { offset: offset + first as i64, values }
    }

    pub fn zero() -> Self {
        Self { offset: 0, values: Vec::new() }
    }

    /// Kronecker delta at `at`.
    pub fn delta(at: i64) -> Self {
        Self { offset: at, values: vec![1.0] }
    }

    /// Indicator of the interval `{start, ..., start + len - 1}`.
    pub fn indicator(start: i64, len: usize) -> Self {
        Self::canonical(start, vec![1.0; len])
    }

    /// Indicator of an arbitrary finite set of integers.
    pub fn indicator_of(points: &[i64]) -> Self {
        let (Some(&lo), Some(&hi)) = (points.iter().min(), points.iter().max()) else {
            return Self::zero();
        };
        let mut values = vec![0.0; (hi - lo + 1) as usize];
        for &p in points {
            values[(p - lo) as usize] = 1.0;
        }
        Self::canonical(lo, values)
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Length of the smallest interval containing the support.
    pub fn support_len(&self) -> usize {
        self.values.len()
    }

    /// Number of points where the function is nonzero.
    pub fn support_size(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0.0).count()
    }

    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }

    /// Last index of the support (meaningless for the zero function).
    pub fn end(&self) -> i64 {
        self.offset + self.values.len() as i64 - 1
    }

    pub fn get(&self, at: i64) -> f64 {
        let i = at - self.offset;
        if i < 0 {
            return 0.0;
        }
        self.values.get(i as usize).copied().unwrap_or(0.0)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= 0.0)
    }

    pub fn abs(&self) -> Self {
        Self { offset: self.offset, values: self.values.iter().map(|v| v.abs()).collect() }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::canonical(self.offset, self.values.iter().map(|v| v * c).collect())
    }

    pub fn translated(&self, by: i64) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        Self { offset: self.offset + by, values: self.values.clone() }
    }

    /// `x -> f(-x)`.
    pub fn reflected(&self) -> Self {
        if self.is_zero() {
            return self.clone();
        }
        let mut values = self.values.clone();
        values.reverse();
        Self { offset: -self.end(), values }
    }

    /// Pointwise sum.
    pub fn add(&self, other: &Self) -> Self {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let lo = self.offset.min(other.offset);
        let hi = self.end().max(other.end());
        let values = (lo..=hi).map(|x| self.get(x) + other.get(x)).collect();
        Self::canonical(lo, values)
    }
}

#[derive(Serialize)]
struct FunctionDoc {
    offset: i64,
    values: Vec<String>,
}

impl Serialize for DiscreteFunction {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        FunctionDoc {
            offset: self.offset,
            values: self.values.iter().map(|&v| format_f64(v)).collect(),
        }
        .serialize(serializer)
    }
}

/// A function value in a file: a JSON number or a decimal string.
#[derive(Deserialize)]
#[serde(untagged)]
enum RawValue {
    Number(f64),
    Text(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFunction {
    offset: i64,
    values: Vec<RawValue>,
}

impl<'de> Deserialize<'de> for DiscreteFunction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = RawFunction::deserialize(deserializer)?;
        let values = raw
            .values
            .into_iter()
            .map(|v| match v {
                RawValue::Number(x) => Ok(x),
                RawValue::Text(s) => parse_f64(&s),
            })
            .collect::<Result<Vec<_>>>()
            .map_err(serde::de::Error::custom)?;
        DiscreteFunction::new(raw.offset, values).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trims_to_canonical_form() {
        let f = DiscreteFunction::new(-3, vec![0.0, 0.0, 1.5, 0.0, 2.0, 0.0]).unwrap();
        assert_eq!(f.offset(), -1);
        assert_eq!(f.values(), &[1.5, 0.0, 2.0]);
        assert_eq!(f.support_len(), 3);
        assert_eq!(f.support_size(), 2);
        let z = DiscreteFunction::new(7, vec![0.0; 4]).unwrap();
        assert_eq!(z, DiscreteFunction::zero());
        assert_eq!(z.offset(), 0);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            DiscreteFunction::new(0, vec![1.0, f64::NAN]),
            Err(Error::NonFinite { index: 1, .. })
        ));
    }

    #[test]
    fn reflection_and_lookup() {
        let f = DiscreteFunction::new(2, vec![1.0, 2.0, 3.0]).unwrap();
        let r = f.reflected();
        assert_eq!(r.offset(), -4);
        assert_eq!(r.get(-4), 3.0);
        assert_eq!(r.get(-2), 1.0);
        assert_eq!(f.get(100), 0.0);
        assert_eq!(f.get(-100), 0.0);
    }

    #[test]
    fn json_accepts_numbers_and_strings() {
        let f: DiscreteFunction = serde_json::from_str(r#"{"offset": -1, "values": [1, "0.5", 0]}"#).unwrap();
        assert_eq!(f.offset(), -1);
        assert_eq!(f.values(), &[1.0, 0.5]);
        let text = serde_json::to_string(&f).unwrap();
        assert_eq!(text, r#"{"offset":-1,"values":["1.0","0.5"]}"#);
        let back: DiscreteFunction = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f);
        assert!(serde_json::from_str::<DiscreteFunction>(r#"{"offset": 0, "values": ["x"]}"#).is_err());
    }
}
