//! Physical quantities with explicit units in config files.
//!
//! Frequencies are written as f = ω/2π ("-1.2 MHz") and stored as angular
//! frequencies in rad/s. Times are stored in seconds, rates in 1/s.

use std::f64::consts::PI;
use std::fmt;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

fn split_value(text: &str) -> Result<(f64, String)> {
    let t = text.trim();
    for (prefix, v) in [("inf", f64::INFINITY), ("+inf", f64::INFINITY), ("-inf", f64::NEG_INFINITY)] {
        if let Some(rest) = t.strip_prefix(prefix) {
            return Ok((v, rest.trim().to_string()));
        }
    }
    let mut cut = t.len();
    for (i, c) in t.char_indices() {
        let numeric = match c {
            '0'..='9' | '.' | '+' | '-' => true,
            // exponent marker only when followed by a digit or sign
            'e' | 'E' => t[i + 1..].starts_with(|n: char| n.is_ascii_digit() || n == '-' || n == '+'),
            _ => false,
        };
        if !numeric {
            cut = i;
            break;
        }
    }
    let (num, unit) = t.split_at(cut);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("cannot parse number in {text:?}")))?;
    Ok((value, unit.trim().to_string()))
}

fn time_scale(unit: &str) -> Option<f64> {
    Some(match unit {
        "s" => 1.0,
        "ms" => 1e-3,
        "us" | "µs" | "μs" => 1e-6,
        "ns" => 1e-9,
        _ => return None,
    })
}

/// Angular frequency in rad/s.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct AngularFrequency(pub f64);

impl AngularFrequency {
    pub fn from_hz(f: f64) -> Self {
        Self(2.0 * PI * f)
    }

    pub fn from_mhz(f: f64) -> Self {
        Self::from_hz(f * 1e6)
    }

    pub fn from_khz(f: f64) -> Self {
        Self::from_hz(f * 1e3)
    }

    pub fn rad_per_s(self) -> f64 {
        self.0
    }

    pub fn hz(self) -> f64 {
        self.0 / (2.0 * PI)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (v, unit) = split_value(text)?;
        let w = match unit.as_str() {
            "Hz" => 2.0 * PI * v,
            "kHz" => 2.0 * PI * v * 1e3,
            "MHz" => 2.0 * PI * v * 1e6,
            "GHz" => 2.0 * PI * v * 1e9,
            "rad/s" => v,
            "rad/us" => v * 1e6,
            "" => return Err(Error::Config(format!("missing frequency unit in {text:?} (use Hz, kHz, MHz, GHz, rad/s)"))),
            other => return Err(Error::Config(format!("unknown frequency unit {other:?} in {text:?}"))),
        };
        Ok(Self(w))
    }
}

impl fmt::Display for AngularFrequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} MHz", self.hz() / 1e6)
    }
}

/// Time in seconds.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct Seconds(pub f64);

impl Seconds {
    pub fn us(t: f64) -> Self {
        Self(t * 1e-6)
    }

    pub fn ns(t: f64) -> Self {
        Self(t * 1e-9)
    }

    pub fn ms(t: f64) -> Self {
        Self(t * 1e-3)
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (v, unit) = split_value(text)?;
        match time_scale(&unit) {
            Some(s) => Ok(Self(v * s)),
            None if unit.is_empty() => Err(Error::Config(format!("missing time unit in {text:?} (use s, ms, us, ns)"))),
            None => Err(Error::Config(format!("unknown time unit {unit:?} in {text:?}"))),
        }
    }
}

impl fmt::Display for Seconds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} us", self.0 * 1e6)
    }
}

/// Rate in 1/s. Written either as "0.5 /us" or as an inverse time "1/(2 us)".
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct Rate(pub f64);

impl Rate {
    pub fn per_us(r: f64) -> Self {
        Self(r * 1e6)
    }

    pub fn inverse(t: Seconds) -> Self {
        Self(1.0 / t.0)
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if let Some(rest) = t.strip_prefix("1/") {
            let inner = rest.trim().trim_start_matches('(').trim_end_matches(')');
            let time = Seconds::parse(inner)?;
            if time.0 <= 0.0 {
                return Err(Error::Config(format!("non-positive time in rate {text:?}")));
            }
            return Ok(Self(1.0 / time.0));
        }
        let (v, unit) = split_value(t)?;
        let unit = unit.trim_start_matches('/').trim();
        match time_scale(unit) {
            Some(s) => Ok(Self(v / s)),
            None if unit.is_empty() => Err(Error::Config(format!("missing rate unit in {text:?} (use /s, /ms, /us)"))),
            None => Err(Error::Config(format!("unknown rate unit {unit:?} in {text:?}"))),
        }
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} /us", self.0 * 1e-6)
    }
}

/// Angle in radians. Accepts "rad", "deg" and "pi" (multiples of π).
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct Angle(pub f64);

impl Angle {
    pub fn get(self) -> f64 {
        self.0
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (v, unit) = split_value(text)?;
        match unit.as_str() {
            "rad" => Ok(Self(v)),
            "deg" => Ok(Self(v.to_radians())),
            "pi" => Ok(Self(v * PI)),
            "" => Err(Error::Config(format!("missing angle unit in {text:?} (use rad, deg, pi)"))),
            other => Err(Error::Config(format!("unknown angle unit {other:?} in {text:?}"))),
        }
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} rad", self.0)
    }
}

// Serialized in SI base units so a round trip through text is exact.
macro_rules! quantity_serde {
    ($ty:ident, $unit:literal, $what:literal) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(&format!("{} {}", self.0, $unit))
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                struct V;
                impl<'de> Visitor<'de> for V {
                    type Value = $ty;
                    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                        write!(f, "{} with explicit unit", $what)
                    }
                    fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<$ty, E> {
                        $ty::parse(v).map_err(|e| E::custom(e.to_string()))
                    }
                }
                d.deserialize_str(V)
            }
        }
    };
}

quantity_serde!(AngularFrequency, "rad/s", "a frequency string such as \"-1.2 MHz\"");
quantity_serde!(Seconds, "s", "a time string such as \"50 us\"");
quantity_serde!(Rate, "/s", "a rate string such as \"1/(2 us)\" or \"0.5 /us\"");
quantity_serde!(Angle, "rad", "an angle string such as \"0.5 pi\"");

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_frequencies() {
        let w = AngularFrequency::parse("-1.2 MHz").unwrap();
        assert!((w.0 - 2.0 * PI * -1.2e6).abs() < 1e-6);
        assert!((AngularFrequency::parse("-2.2kHz").unwrap().0 - 2.0 * PI * -2.2e3).abs() < 1e-9);
        assert!(AngularFrequency::parse("1.2").is_err());
        assert!(AngularFrequency::parse("1.2 Mhz").is_err());
        assert!(AngularFrequency::parse("abc MHz").is_err());
    }

    #[test]
    fn parses_times_and_rates() {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs();
        assert!(close(Seconds::parse("50 us").unwrap().0, 50e-6));
        assert_eq!(Seconds::parse("1.0 ms").unwrap().0, 1e-3);
        assert!(close(Seconds::parse("100 ns").unwrap().0, 100e-9));
        assert!(Seconds::parse("5").is_err());
        assert!(close(Rate::parse("1/(2 us)").unwrap().0, 5e5));
        assert!(close(Rate::parse("0.5 /us").unwrap().0, 5e5));
        assert_eq!(Rate::parse("0 /us").unwrap().0, 0.0);
        assert!(Rate::parse("0.5").is_err());
        assert!((Angle::parse("0.5 pi").unwrap().0 - PI / 2.0).abs() < 1e-15);
        assert!(Seconds::parse("inf us").unwrap().0.is_infinite());
        assert!((Angle::parse("90 deg").unwrap().0 - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn exponent_notation() {
        assert_eq!(Seconds::parse("1e-6 s").unwrap().0, 1e-6);
        assert_eq!(Rate::parse("2.5e4 /s").unwrap().0, 2.5e4);
    }

    proptest! {
        #[test]
        fn display_round_trips(x in -1e3f64..1e3) {
            let w = AngularFrequency::from_mhz(x);
            let back = AngularFrequency::parse(&w.to_string()).unwrap();
            prop_assert!((back.0 - w.0).abs() <= 1e-12 * w.0.abs().max(1.0));
            let t = Seconds::us(x.abs());
            let tb = Seconds::parse(&t.to_string()).unwrap();
            prop_assert!((tb.0 - t.0).abs() <= 1e-12 * t.0.max(1e-12));
            let r = Rate::per_us(x.abs());
            let rb = Rate::parse(&r.to_string()).unwrap();
            prop_assert!((rb.0 - r.0).abs() <= 1e-9 * r.0.max(1.0));
        }
    }
}
