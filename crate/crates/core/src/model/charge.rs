use std::fmt;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Fixed-point state of charge in millionths, so that charge traces and the
/// `q >= rate * travel_time` threshold tests are exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Charge(i64);

impl Charge {
    pub const SCALE: i64 = 1_000_000;
    pub const ZERO: Charge = Charge(0);
    pub const FULL: Charge = Charge(Self::SCALE);

    pub const fn from_micros(micros: i64) -> Self {
        Charge(micros)
    }

    pub const fn micros(self) -> i64 {
        self.0
    }

    /// Rounds to the nearest millionth.
    pub fn from_f64(value: f64) -> Self {
        Charge((value * Self::SCALE as f64).round() as i64)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / Self::SCALE as f64
    }

    pub fn is_unit_interval(self) -> bool {
        (0..=Self::SCALE).contains(&self.0)
    }
}

impl Add for Charge {
    type Output = Charge;

    fn add(self, rhs: Charge) -> Charge {
        Charge(self.0 + rhs.0)
    }
}

impl Sub for Charge {
    type Output = Charge;

    fn sub(self, rhs: Charge) -> Charge {
        Charge(self.0 - rhs.0)
    }
}

impl Mul<u32> for Charge {
    type Output = Charge;

    fn mul(self, rhs: u32) -> Charge {
        Charge(self.0 * rhs as i64)
    }
}

impl std::iter::Sum for Charge {
    fn sum<I: Iterator<Item = Charge>>(iter: I) -> Charge {
        Charge(iter.map(|c| c.0).sum())
    }
}

impl fmt::Display for Charge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:06}", abs / Self::SCALE as u64, abs % Self::SCALE as u64)
    }
}

impl Serialize for Charge {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

impl<'de> Deserialize<'de> for Charge {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = f64::deserialize(d)?;
        if !value.is_finite() {
            return Err(serde::de::Error::custom("charge must be finite"));
        }
        Ok(Charge::from_f64(value))
    }
}
