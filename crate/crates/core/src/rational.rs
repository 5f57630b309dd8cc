//! Positive rationals `q = m/n` labelling resonance classes.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Ratio `T2 / T1` of a periodic orbit of the separated system, kept exact.
///
/// Always stored in lowest terms with `m, n > 0`; the parity logic for
/// primary collisions needs the exact numerator and denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ResonanceClass(Ratio<u64>);

impl ResonanceClass {
    pub fn new(m: u64, n: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::domain(format!(
                "resonance class must be a positive rational, got {m}/{n}"
            )));
        }
        Ok(Self(Ratio::new(m, n)))
    }

    pub fn integer(m: u64) -> Result<Self> {
        Self::new(m, 1)
    }

    /// Numerator `m`: number of ξ-oscillations per period.
    pub fn m(&self) -> u64 {
        *self.0.numer()
    }

    /// Denominator `n`: number of φ-revolutions per period.
    pub fn n(&self) -> u64 {
        *self.0.denom()
    }

    pub fn value(&self) -> f64 {
        self.m() as f64 / self.n() as f64
    }

    pub fn ratio(&self) -> Ratio<u64> {
        self.0
    }
}

impl fmt::Display for ResonanceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.n() == 1 {
            write!(f, "{}", self.m())
        } else {
            write!(f, "{}/{}", self.m(), self.n())
        }
    }
}

impl FromStr for ResonanceClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let parse = |t: &str| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("invalid rational '{s}': expected m/n")))
        };
        match s.split_once('/') {
            Some((m, n)) => Self::new(parse(m)?, parse(n)?),
            None => Self::new(parse(s)?, 1),
        }
    }
}

impl Serialize for ResonanceClass {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ResonanceClass {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
