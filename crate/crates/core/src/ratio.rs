//! Exact count ratios.
//!
//! Utilities are compared by cross-multiplication so that band membership
//! never depends on floating-point rounding. `ExactRatio` keeps the
//! representation it was built with (`98/100` stays `98/100`), while equality,
//! ordering and hashing are all defined on the value.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::de::{self, Deserializer};
use serde::ser::{SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of decimal places used for the `decimal` field in serialised output.
pub const DISPLAY_PLACES: u32 = 6;

/// Largest number of decimal digits supported by rounding helpers; keeps
/// `num * 10^digits` inside `u128`.
pub const MAX_DIGITS: u32 = 18;

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// A ratio `num/den` with `0 <= num <= den` and `den > 0`.
#[derive(Clone, Copy, Debug)]
pub struct ExactRatio {
    num: u64,
    den: u64,
}

impl ExactRatio {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num > den {
            return Err(Error::InvalidRatio { num, den });
        }
        Ok(Self { num, den })
    }

    pub fn zero() -> Self {
        Self { num: 0, den: 1 }
    }

    pub fn one() -> Self {
        Self { num: 1, den: 1 }
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    /// The same value in lowest terms.
    pub fn reduced(&self) -> Self {
        let g = gcd(self.num as u128, self.den as u128) as u64;
        Self {
            num: self.num / g,
            den: self.den / g,
        }
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `round(value * 10^digits)` with exact midpoints rounded away from zero.
    ///
    /// Computed without floating point: the quotient `q` is bumped when
    /// `2 * num * 10^digits >= den * (2q + 1)`.
    pub fn round_scaled(&self, digits: u32) -> u64 {
        assert!(digits <= MAX_DIGITS, "at most {MAX_DIGITS} digits supported");
        let scaled = self.num as u128 * 10u128.pow(digits);
        let den = self.den as u128;
        let q = scaled / den;
        let q = if 2 * scaled >= den * (2 * q + 1) { q + 1 } else { q };
        q as u64
    }

    /// Decimal rendering with `places` fractional digits (half away from zero).
    pub fn to_decimal(&self, places: u32) -> String {
        format_scaled(self.round_scaled(places), places)
    }

    /// `"num/den"` in the stored (unreduced) representation.
    pub fn ratio_string(&self) -> String {
        format!("{}/{}", self.num, self.den)
    }

    /// Signed difference `self - other`.
    pub fn sub(&self, other: &ExactRatio) -> SignedRatio {
        let a = self.reduced();
        let b = other.reduced();
        let num = a.num as i128 * b.den as i128 - b.num as i128 * a.den as i128;
        let den = a.den as i128 * b.den as i128;
        SignedRatio::new(num, den)
    }

    /// Signed sum `self + other` (may exceed one).
    pub fn add(&self, other: &ExactRatio) -> SignedRatio {
        let a = self.reduced();
        let b = other.reduced();
        let num = a.num as i128 * b.den as i128 + b.num as i128 * a.den as i128;
        let den = a.den as i128 * b.den as i128;
        SignedRatio::new(num, den)
    }

    /// True when `|self - anchor| <= delta`, evaluated exactly.
    pub fn within(&self, anchor: &ExactRatio, delta: &ExactRatio) -> bool {
        let diff = self.sub(anchor);
        let abs_num = diff.num.unsigned_abs();
        // |diff| <= delta  <=>  |n| * delta.den <= delta.num * d
        abs_num * delta.den as u128 <= delta.num as u128 * diff.den as u128
    }
}

/// Render `scaled / 10^places` as a decimal string.
pub(crate) fn format_scaled(scaled: u64, places: u32) -> String {
    if places == 0 {
        return scaled.to_string();
    }
    let pow = 10u64.pow(places);
    format!(
        "{}.{:0width$}",
        scaled / pow,
        scaled % pow,
        width = places as usize
    )
}

impl PartialEq for ExactRatio {
    fn eq(&self, other: &Self) -> bool {
        self.num as u128 * other.den as u128 == other.num as u128 * self.den as u128
    }
}

impl Eq for ExactRatio {}

impl PartialOrd for ExactRatio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExactRatio {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num as u128 * other.den as u128).cmp(&(other.num as u128 * self.den as u128))
    }
}

impl Hash for ExactRatio {
    fn hash<H: Hasher>(&self, state: &mut H) {
        let r = self.reduced();
        r.num.hash(state);
        r.den.hash(state);
    }
}

impl fmt::Display for ExactRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for ExactRatio {
    type Err = Error;

    /// Accepts `"num/den"` or a plain decimal such as `"0.01"`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!("cannot parse `{s}` as a ratio"));
        if let Some((n, d)) = s.split_once('/') {
            let num = n.trim().parse::<u64>().map_err(|_| bad())?;
            let den = d.trim().parse::<u64>().map_err(|_| bad())?;
            return ExactRatio::new(num, den);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() as u32 > MAX_DIGITS || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let int: u64 = if int.is_empty() {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        let den = 10u64.pow(frac.len() as u32);
        let frac_val: u64 = if frac.is_empty() {
            0
        } else {
            frac.parse().map_err(|_| bad())?
        };
        let num = int
            .checked_mul(den)
            .and_then(|v| v.checked_add(frac_val))
            .ok_or_else(bad)?;
        ExactRatio::new(num, den)
    }
}

impl Serialize for ExactRatio {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("ExactRatio", 2)?;
        st.serialize_field("decimal", &self.to_decimal(DISPLAY_PLACES))?;
        st.serialize_field("exact", &self.ratio_string())?;
        st.end()
    }
}

#[derive(Deserialize)]
struct RatioRepr {
    exact: String,
}

impl<'de> Deserialize<'de> for ExactRatio {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = RatioRepr::deserialize(deserializer)?;
        repr.exact.parse().map_err(de::Error::custom)
    }
}

/// A signed rational in lowest terms, used for metric deltas.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SignedRatio {
    num: i128,
    den: i128,
}

impl SignedRatio {
    fn new(num: i128, den: i128) -> Self {
        debug_assert!(den > 0);
        if num == 0 {
            return Self { num: 0, den: 1 };
        }
        let g = gcd(num.unsigned_abs(), den as u128) as i128;
        Self {
            num: num / g,
            den: den / g,
        }
    }

    pub fn zero() -> Self {
        Self { num: 0, den: 1 }
    }

    pub fn num(&self) -> i128 {
        self.num
    }

    pub fn den(&self) -> i128 {
        self.den
    }

    pub fn signum(&self) -> i32 {
        self.num.signum() as i32
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn to_decimal(&self, places: u32) -> String {
        let abs = self.num.unsigned_abs();
        let scaled = abs * 10u128.pow(places);
        let den = self.den as u128;
        let q = scaled / den;
        let q = if 2 * scaled >= den * (2 * q + 1) { q + 1 } else { q };
        let body = format_scaled(q as u64, places);
        if self.num < 0 && q != 0 {
            format!("-{body}")
        } else {
            body
        }
    }
}

impl fmt::Display for SignedRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

impl FromStr for SignedRatio {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("cannot parse `{s}` as a signed ratio"));
        let (n, d) = s.trim().split_once('/').ok_or_else(bad)?;
        let num: i128 = n.trim().parse().map_err(|_| bad())?;
        let den: i128 = d.trim().parse().map_err(|_| bad())?;
        if den <= 0 {
            return Err(bad());
        }
        Ok(SignedRatio::new(num, den))
    }
}

impl PartialOrd for SignedRatio {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SignedRatio {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }
}

impl Serialize for SignedRatio {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("SignedRatio", 2)?;
        st.serialize_field("decimal", &self.to_decimal(DISPLAY_PLACES))?;
        st.serialize_field("exact", &self.to_string())?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for SignedRatio {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = RatioRepr::deserialize(deserializer)?;
        repr.exact.parse().map_err(de::Error::custom)
    }
}
