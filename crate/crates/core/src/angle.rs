//! Angles given either as decimals or as rational multiples of π.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Angle {
    pub radians: f64,
    /// `(p, q)` when the angle is exactly `pπ/q`, reduced with `q > 0`.
    pub pi_ratio: Option<(i64, i64)>,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

impl Angle {
    pub fn radians(r: f64) -> Self {
        Self {
            radians: r,
            pi_ratio: None,
        }
    }

    pub fn pi_fraction(p: i64, q: i64) -> Self {
        assert!(q != 0, "zero denominator");
        let s = if q < 0 { -1 } else { 1 };
        let g = gcd(p, q).max(1);
        let (p, q) = (s * p / g, s * q / g);
        Self {
            radians: p as f64 * PI / q as f64,
            pi_ratio: Some((p, q)),
        }
    }

    /// True when the angle is an integer multiple of `π/8`. Exact for rational
    /// inputs, otherwise within `1e-12`.
    pub fn is_multiple_of_pi_over_8(&self) -> bool {
        match self.pi_ratio {
            Some((p, q)) => (8 * p) % q == 0,
            None => is_multiple_of(self.radians, PI / 8.0),
        }
    }

    pub fn is_multiple_of_pi_over_4(&self) -> bool {
        match self.pi_ratio {
            Some((p, q)) => (4 * p) % q == 0,
            None => is_multiple_of(self.radians, PI / 4.0),
        }
    }
}

pub(crate) fn is_multiple_of(x: f64, unit: f64) -> bool {
    let r = x / unit;
    (r - r.round()).abs() < 1e-12
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pi_ratio {
            Some((0, _)) => write!(f, "0"),
            Some((p, 1)) if p == 1 => write!(f, "pi"),
            Some((p, 1)) => write!(f, "{p}pi"),
            Some((1, q)) => write!(f, "pi/{q}"),
            Some((-1, q)) => write!(f, "-pi/{q}"),
            Some((p, q)) => write!(f, "{p}pi/{q}"),
            None => write!(f, "{}", self.radians),
        }
    }
}

impl FromStr for Angle {
    type Err = Error;

    /// Accepts decimals (`0.35`) and π fractions (`pi`, `-pi/4`, `3pi/8`,
    /// `3*pi/8`).
    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::InvalidParameter(format!("cannot parse angle {s:?}"));
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let lower = t.to_ascii_lowercase();
        let Some(pos) = lower.find("pi") else {
            let r: f64 = lower.parse().map_err(|_| bad())?;
            if !r.is_finite() {
                return Err(bad());
            }
            if r == 0.0 {
                return Ok(Angle::pi_fraction(0, 1));
            }
            return Ok(Angle::radians(r));
        };
        let (head, tail) = (&lower[..pos], &lower[pos + 2..]);
        let head = head.strip_suffix('*').unwrap_or(head);
        let num: i64 = match head {
            "" | "+" => 1,
            "-" => -1,
            h => h.parse().map_err(|_| bad())?,
        };
        let den: i64 = match tail {
            "" => 1,
            t => t
                .strip_prefix('/')
                .ok_or_else(bad)?
                .parse()
                .map_err(|_| bad())?,
        };
        if den == 0 {
            return Err(bad());
        }
        Ok(Angle::pi_fraction(num, den))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_forms() {
        let a: Angle = "pi/9".parse().unwrap();
        assert_eq!(a.pi_ratio, Some((1, 9)));
        assert!((a.radians - PI / 9.0).abs() < 1e-15);
        assert_eq!("3pi/8".parse::<Angle>().unwrap().pi_ratio, Some((3, 8)));
        assert_eq!("3*pi/8".parse::<Angle>().unwrap().pi_ratio, Some((3, 8)));
        assert_eq!("-pi/4".parse::<Angle>().unwrap().pi_ratio, Some((-1, 4)));
        assert_eq!("2pi/8".parse::<Angle>().unwrap().pi_ratio, Some((1, 4)));
        assert_eq!("pi".parse::<Angle>().unwrap().pi_ratio, Some((1, 1)));
        assert_eq!("0.25".parse::<Angle>().unwrap().radians, 0.25);
        assert_eq!("0".parse::<Angle>().unwrap().pi_ratio, Some((0, 1)));
        for bad in ["", "pi/0", "x", "pi/", "nan", "2pi4"] {
            assert!(bad.parse::<Angle>().is_err(), "{bad}");
        }
    }

    #[test]
    fn display_roundtrips() {
        for s in ["pi/9", "3pi/8", "-pi/4", "pi", "0", "0.3"] {
            let a: Angle = s.parse().unwrap();
            assert_eq!(a.to_string().parse::<Angle>().unwrap(), a);
        }
    }

    #[test]
    fn exceptional_classification() {
        assert!(Angle::pi_fraction(1, 4).is_multiple_of_pi_over_8());
        assert!(Angle::pi_fraction(3, 8).is_multiple_of_pi_over_8());
        assert!(!Angle::pi_fraction(3, 8).is_multiple_of_pi_over_4());
        assert!(!Angle::pi_fraction(1, 9).is_multiple_of_pi_over_8());
        assert!(Angle::radians(PI / 4.0).is_multiple_of_pi_over_4());
        assert!(!Angle::radians(0.3).is_multiple_of_pi_over_8());
    }
}
