//! Fixed-precision action and plan costs.

use core::fmt;
use core::ops::{Add, AddAssign, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A non-negative cost in milli-units, with a distinguished infinity.
///
/// Costs compare exactly; `Cost::INFINITE` absorbs addition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Cost(u64);

impl Cost {
    pub const ZERO: Cost = Cost(0);
    pub const UNIT: Cost = Cost(1000);
    pub const INFINITE: Cost = Cost(u64::MAX);

    pub const fn from_millis(millis: u64) -> Self {
        Cost(millis)
    }

    pub const fn units(units: u64) -> Self {
        Cost(units * 1000)
    }

    pub const fn millis(self) -> u64 {
        self.0
    }

    pub const fn is_infinite(self) -> bool {
        self.0 == u64::MAX
    }

    pub const fn is_finite(self) -> bool {
        !self.is_infinite()
    }

    /// Cost in whole units as a float; `f64::INFINITY` for the infinite cost.
    pub fn as_f64(self) -> f64 {
        if self.is_infinite() {
            f64::INFINITY
        } else {
            self.0 as f64 / 1000.0
        }
    }

    /// Parses a decimal literal with at most three fractional digits.
    pub fn parse_decimal(text: &str) -> Option<Cost> {
        let (whole, frac) = match text.split_once('.') {
            Some((w, f)) => (w, f),
            None => (text, ""),
        };
        if whole.is_empty() && frac.is_empty() {
            return None;
        }
        if frac.len() > 3 || !whole.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        if !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let whole: u64 = if whole.is_empty() { 0 } else { whole.parse().ok()? };
        let mut millis = whole.checked_mul(1000)?;
        let mut scale = 100;
        for digit in frac.bytes() {
            millis = millis.checked_add(u64::from(digit - b'0') * scale)?;
            scale /= 10;
        }
        if millis == u64::MAX {
            return None;
        }
        Some(Cost(millis))
    }

    pub fn saturating_sub(self, other: Cost) -> Cost {
        if self.is_infinite() {
            return self;
        }
        Cost(self.0.saturating_sub(other.0))
    }
}

impl Add for Cost {
    type Output = Cost;

    fn add(self, rhs: Cost) -> Cost {
        if self.is_infinite() || rhs.is_infinite() {
            return Cost::INFINITE;
        }
        Cost(self.0.saturating_add(rhs.0).min(u64::MAX - 1))
    }
}

impl AddAssign for Cost {
    fn add_assign(&mut self, rhs: Cost) {
        *self = *self + rhs;
    }
}

impl Sub for Cost {
    type Output = Cost;

    fn sub(self, rhs: Cost) -> Cost {
        self.saturating_sub(rhs)
    }
}

impl core::iter::Sum for Cost {
    fn sum<I: Iterator<Item = Cost>>(iter: I) -> Cost {
        iter.fold(Cost::ZERO, |acc, c| acc + c)
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            return f.write_str("inf");
        }
        let whole = self.0 / 1000;
        let frac = self.0 % 1000;
        if frac == 0 {
            write!(f, "{whole}")
        } else {
            let mut digits = [b'0'; 3];
            let mut rest = frac;
            for slot in digits.iter_mut().rev() {
                *slot = b'0' + (rest % 10) as u8;
                rest /= 10;
            }
            let mut len = 3;
            while digits[len - 1] == b'0' {
                len -= 1;
            }
            let frac = core::str::from_utf8(&digits[..len]).map_err(|_| fmt::Error)?;
            write!(f, "{whole}.{frac}")
        }
    }
}

// Serialized as a number of units, or the string `"inf"` for the infinite
// cost, so that an optional cost keeps `null` for "absent".
impl Serialize for Cost {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.is_infinite() {
            serializer.serialize_str("inf")
        } else {
            serializer.serialize_f64(self.as_f64())
        }
    }
}

struct CostVisitor;

impl serde::de::Visitor<'_> for CostVisitor {
    type Value = Cost;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a non-negative number of cost units or \"inf\"")
    }

    fn visit_f64<E: serde::de::Error>(self, u: f64) -> Result<Cost, E> {
        let millis = libm::round(u * 1000.0);
        if u.is_finite() && u >= 0.0 && millis < u64::MAX as f64 {
            Ok(Cost(millis as u64))
        } else {
            Err(E::custom("cost must be a non-negative number"))
        }
    }

    fn visit_u64<E: serde::de::Error>(self, u: u64) -> Result<Cost, E> {
        u.checked_mul(1000)
            .filter(|&m| m != u64::MAX)
            .map(Cost)
            .ok_or_else(|| E::custom("cost out of range"))
    }

    fn visit_i64<E: serde::de::Error>(self, i: i64) -> Result<Cost, E> {
        u64::try_from(i)
            .map_err(|_| E::custom("cost must be a non-negative number"))
            .and_then(|u| self.visit_u64(u))
    }

    fn visit_str<E: serde::de::Error>(self, s: &str) -> Result<Cost, E> {
        if s == "inf" {
            Ok(Cost::INFINITE)
        } else {
            Err(E::custom("expected a number or \"inf\""))
        }
    }
}

impl<'de> Deserialize<'de> for Cost {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        deserializer.deserialize_any(CostVisitor)
    }
}
