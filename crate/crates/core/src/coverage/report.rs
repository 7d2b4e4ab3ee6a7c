use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Where an unbounded ratio was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sentinel {
    /// `rho > 0` where the reference measure is zero.
    ZeroMass { h: usize, s: usize, a: usize, policy: Option<usize> },
    /// Nonzero on-policy Bellman error with zero error mass under `mu`.
    ZeroDenominator { h: usize, f_h: usize, f_next: Option<usize> },
}

/// Result of a coefficient computation with its certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub name: String,
    /// `+inf` serializes as the string `"inf"`.
    #[serde(with = "extended_f64")]
    pub value: f64,
    /// Minimising distribution, `[h][s * A + a]`.
    pub mu_star: Option<Vec<Vec<f64>>>,
    pub witness_policy: Option<usize>,
    pub witness_step: Option<usize>,
    /// Pair indices `s * A + a` per step.
    pub b_sets: Option<Vec<Vec<usize>>>,
    pub gap: Option<f64>,
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
    pub iterations: Option<usize>,
    pub gap_exceeded: bool,
    pub infinite_at: Option<Sentinel>,
    pub params: BTreeMap<String, f64>,
}

impl CoverageReport {
    pub fn new(name: impl Into<String>, value: f64) -> Self {
        CoverageReport {
            name: name.into(),
            value,
            mu_star: None,
            witness_policy: None,
            witness_step: None,
            b_sets: None,
            gap: None,
            lower_bound: None,
            upper_bound: None,
            iterations: None,
            gap_exceeded: false,
            infinite_at: None,
            params: BTreeMap::new(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serializable")
    }
}

pub(crate) mod extended_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            ser.serialize_f64(*v)
        } else if v.is_nan() {
            ser.serialize_str("nan")
        } else if *v > 0.0 {
            ser.serialize_str("inf")
        } else {
            ser.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        match Repr::deserialize(de)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(de::Error::custom(format!("unexpected value {other:?}"))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infinite_value_round_trips() {
        let mut r = CoverageReport::new("c_infty", f64::INFINITY);
        r.infinite_at = Some(Sentinel::ZeroMass { h: 1, s: 0, a: 1, policy: Some(3) });
        let text = r.to_json();
        assert!(text.contains("\"inf\""));
        let back: CoverageReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }
}
