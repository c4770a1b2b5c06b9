use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// An exact rational in `[0, 1]`.
///
/// Subset sizes are `⌈p·n⌉`; computing them on exact rationals keeps
/// `0.1 · 34380` at `3438` instead of the `3438.0000000000005` a float gives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Proportion {
    num: u64,
    den: u64,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Proportion {
    pub const ZERO: Proportion = Proportion { num: 0, den: 1 };
    pub const ONE: Proportion = Proportion { num: 1, den: 1 };

    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 {
            return Err(Error::invalid("proportion with zero denominator"));
        }
        if num > den {
            return Err(Error::invalid(format!("proportion {num}/{den} exceeds 1")));
        }
        let g = gcd(num, den).max(1);
        Ok(Proportion { num: num / g, den: den / g })
    }

    /// Converts through the shortest decimal representation of `x`, so that
    /// `0.8` becomes exactly `4/5`.
    pub fn from_f64(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::invalid(format!("proportion {x} is not finite")));
        }
        format!("{x}").parse()
    }

    pub fn numerator(self) -> u64 {
        self.num
    }

    pub fn denominator(self) -> u64 {
        self.den
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }

    /// `⌈p·n⌉`.
    pub fn ceil_of(self, n: usize) -> usize {
        let prod = u128::from(self.num) * n as u128;
        let den = u128::from(self.den);
        prod.div_ceil(den) as usize
    }

    pub fn checked_add(self, other: Proportion) -> Option<Proportion> {
        let num = u128::from(self.num) * u128::from(other.den) + u128::from(other.num) * u128::from(self.den);
        let den = u128::from(self.den) * u128::from(other.den);
        if num > den {
            return None;
        }
        let g = {
            let (mut a, mut b) = (num, den);
            while b != 0 {
                let t = a % b;
                a = b;
                b = t;
            }
            a.max(1)
        };
        Some(Proportion { num: (num / g) as u64, den: (den / g) as u64 })
    }
}

impl FromStr for Proportion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::invalid(format!("cannot parse proportion {s:?}"));
        if let Some((n, d)) = s.split_once('/') {
            let n: u64 = n.trim().parse().map_err(|_| bad())?;
            let d: u64 = d.trim().parse().map_err(|_| bad())?;
            return Proportion::new(n, d);
        }
        if s.starts_with('-') {
            return Err(Error::invalid(format!("proportion {s} is negative")));
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 18 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let den = 10u64.pow(frac.len() as u32);
        let frac_val: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = int.checked_mul(den).and_then(|v| v.checked_add(frac_val)).ok_or_else(bad)?;
        Proportion::new(num, den)
    }
}

impl fmt::Display for Proportion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_f64())
    }
}

impl Serialize for Proportion {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Proportion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let x = f64::deserialize(d)?;
        Proportion::from_f64(x).map_err(serde::de::Error::custom)
    }
}
