//! Exact-decimal sampling temperatures.
//!
//! Temperatures are carried as canonical decimal strings so that equality,
//! ordering, and the lower-temperature tie-break are exact. Round-tripping
//! through floats would make `0.7` vs `0.7000000000000001` a real hazard in
//! replay tests.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use super::ModelError;

/// A non-negative sampling temperature with exact decimal semantics.
///
/// The canonical form has no sign, no exponent, no leading zeros in the
/// integer part, and no trailing zeros in the fraction (`"0.70"` becomes
/// `"0.7"`, `"2.0"` becomes `"2"`).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Temperature(String);

impl Temperature {
    /// The greedy-decoding temperature.
    pub fn zero() -> Self {
        Temperature("0".to_string())
    }

    /// Parses a decimal literal such as `"0.7"` or `"1.10"`.
    pub fn parse(text: &str) -> Result<Self, ModelError> {
        let trimmed = text.trim();
        let mut parts = trimmed.splitn(2, '.');
        let int_part = parts.next().unwrap_or("");
        let frac_part = parts.next().unwrap_or("");
        let all_digits = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
        if trimmed.is_empty()
            || (int_part.is_empty() && frac_part.is_empty())
            || !all_digits(int_part)
            || !all_digits(frac_part)
        {
            return Err(ModelError::InvalidTemperature(text.to_string()));
        }
        Ok(Temperature(canonicalize(int_part, frac_part)))
    }

    /// Converts from a float via its shortest decimal representation.
    /// Rejects negatives and values that only render in exponent form.
    pub fn from_f64(value: f64) -> Result<Self, ModelError> {
        if !value.is_finite() || value < 0.0 {
            return Err(ModelError::InvalidTemperature(value.to_string()));
        }
        let rendered = format!("{value}");
        if rendered.contains(['e', 'E']) {
            return Err(ModelError::InvalidTemperature(rendered));
        }
        Self::parse(&rendered)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn as_f64(&self) -> f64 {
        self.0.parse().expect("canonical decimal parses as f64")
    }

    pub fn is_zero(&self) -> bool {
        self.0 == "0"
    }

    /// Exact decimal addition, clamped at `cap`.
    pub fn escalate(&self, step: &Temperature, cap: &Temperature) -> Temperature {
        let (ai, af) = split(&self.0);
        let (bi, bf) = split(&step.0);
        let scale = af.len().max(bf.len());
        let sum = scaled(ai, af, scale) + scaled(bi, bf, scale);
        let rendered = render_scaled(sum, scale);
        let escalated = Temperature(rendered);
        if escalated > *cap {
            cap.clone()
        } else {
            escalated
        }
    }
}

fn split(canonical: &str) -> (&str, &str) {
    match canonical.split_once('.') {
        Some((i, f)) => (i, f),
        None => (canonical, ""),
    }
}

fn scaled(int_part: &str, frac_part: &str, scale: usize) -> u128 {
    let mut digits = String::with_capacity(int_part.len() + scale);
    digits.push_str(int_part);
    digits.push_str(frac_part);
    for _ in frac_part.len()..scale {
        digits.push('0');
    }
    digits.parse().expect("temperature magnitude fits in u128")
}

fn render_scaled(value: u128, scale: usize) -> String {
    let mut digits = value.to_string();
    if digits.len() <= scale {
        let pad = scale - digits.len() + 1;
        digits.insert_str(0, &"0".repeat(pad));
    }
    let point = digits.len() - scale;
    let (int_part, frac_part) = digits.split_at(point);
    canonicalize(int_part, frac_part)
}

fn canonicalize(int_part: &str, frac_part: &str) -> String {
    let int_trimmed = int_part.trim_start_matches('0');
    let int_canon = if int_trimmed.is_empty() { "0" } else { int_trimmed };
    let frac_canon = frac_part.trim_end_matches('0');
    if frac_canon.is_empty() {
        int_canon.to_string()
    } else {
        format!("{int_canon}.{frac_canon}")
    }
}

impl Ord for Temperature {
    fn cmp(&self, other: &Self) -> Ordering {
        let (ai, af) = split(&self.0);
        let (bi, bf) = split(&other.0);
        // Integer parts are zero-trimmed, so length then lexicographic order
        // is numeric order.
        ai.len()
            .cmp(&bi.len())
            .then_with(|| ai.cmp(bi))
            .then_with(|| {
                let width = af.len().max(bf.len());
                let pad = |s: &str| {
                    let mut padded = s.to_string();
                    while padded.len() < width {
                        padded.push('0');
                    }
                    padded
                };
                pad(af).cmp(&pad(bf))
            })
    }
}

impl PartialOrd for Temperature {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Temperature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Temperature {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

impl Serialize for Temperature {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for Temperature {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct Visitor;

        impl de::Visitor<'_> for Visitor {
            type Value = Temperature;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a non-negative decimal temperature")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Temperature, E> {
                Temperature::parse(v).map_err(E::custom)
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Temperature, E> {
                Temperature::from_f64(v).map_err(E::custom)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Temperature, E> {
                Temperature::parse(&v.to_string()).map_err(E::custom)
            }
        }

        deserializer.deserialize_any(Visitor)
    }
}
