//! Unit-bearing quantities at the configuration boundary.
//!
//! Configuration documents spell every dimensional value as a string with an
//! explicit unit (`"204.8 MHz"`, `"7 ns"`, `"40 us"`). Everything inside the
//! crate is SI: hertz for energies divided by h, seconds for times and rad/s
//! for angular frequencies.

use std::f64::consts::TAU;

use crate::error::{Error, Result};

fn split_number(s: &str) -> Result<(f64, &str)> {
    let s = s.trim();
    let end = s
        .char_indices()
        .find(|&(i, c)| {
            !(c.is_ascii_digit()
                || c == '.'
                || c == '+'
                || c == '-'
                || ((c == 'e' || c == 'E')
                    && s[i + 1..].starts_with(|n: char| n.is_ascii_digit() || n == '-' || n == '+')))
        })
        .map(|(i, _)| i)
        .unwrap_or(s.len());
    let value: f64 = s[..end]
        .parse()
        .map_err(|_| Error::invalid(format!("cannot parse number in {s:?}")))?;
    Ok((value, s[end..].trim()))
}

/// Parses a frequency such as `"5.323 GHz"` into hertz.
pub fn parse_frequency(s: &str) -> Result<f64> {
    let (v, unit) = split_number(s)?;
    let scale = match unit {
        "Hz" => 1.0,
        "kHz" => 1e3,
        "MHz" => 1e6,
        "GHz" => 1e9,
        _ => return Err(Error::invalid(format!("unknown frequency unit in {s:?}"))),
    };
    Ok(v * scale)
}

/// Parses an angular frequency. Accepts `rad/s` directly or an ordinary
/// frequency unit, which is multiplied by 2π.
pub fn parse_angular(s: &str) -> Result<f64> {
    let (v, unit) = split_number(s)?;
    if unit == "rad/s" {
        return Ok(v);
    }
    parse_frequency(s).map(|f| f * TAU)
}

/// Parses a duration such as `"7 ns"` into seconds.
pub fn parse_time(s: &str) -> Result<f64> {
    let (v, unit) = split_number(s)?;
    // dividing by an exact power of ten rounds correctly, so "7 ns" is 7e-9
    let per_second = match unit {
        "s" => 1.0,
        "ms" => 1e3,
        "us" | "µs" => 1e6,
        "ns" => 1e9,
        "ps" => 1e12,
        _ => return Err(Error::invalid(format!("unknown time unit in {s:?}"))),
    };
    Ok(v / per_second)
}

/// Readable form when it reads back exactly, base units otherwise.
fn exact_or_base(readable: String, base: String, parse: fn(&str) -> Result<f64>, v: f64) -> String {
    match parse(&readable) {
        Ok(back) if back == v => readable,
        _ => base,
    }
}

pub fn format_frequency(hz: f64) -> String {
    exact_or_base(format!("{} MHz", hz / 1e6), format!("{hz:e} Hz"), parse_frequency, hz)
}

pub fn format_time(s: f64) -> String {
    exact_or_base(format!("{} ns", s * 1e9), format!("{s:e} s"), parse_time, s)
}

macro_rules! unit_serde {
    ($name:ident, $parse:ident, $format:ident) => {
        pub mod $name {
            use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

            pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&super::$format(*v))
            }

            pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
                let raw = String::deserialize(d)?;
                super::$parse(&raw).map_err(D::Error::custom)
            }

            pub mod option {
                use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

                pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
                    match v {
                        Some(v) => s.serialize_str(&super::super::$format(*v)),
                        None => s.serialize_none(),
                    }
                }

                pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
                    let raw = Option::<String>::deserialize(d)?;
                    raw.map(|r| super::super::$parse(&r).map_err(D::Error::custom))
                        .transpose()
                }
            }
        }
    };
}

fn format_angular(w: f64) -> String {
    exact_or_base(format!("{} MHz", w / TAU / 1e6), format!("{w:e} rad/s"), parse_angular, w)
}

unit_serde!(frequency, parse_frequency, format_frequency);
unit_serde!(angular, parse_angular, format_angular);
unit_serde!(time, parse_time, format_time);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_units() {
        assert!((parse_frequency("204.8 MHz").unwrap() - 204.8e6).abs() < 1e-6);
        assert!((parse_frequency("18.7GHz").unwrap() - 18.7e9).abs() < 1e-3);
        assert!((parse_time("7ns").unwrap() - 7e-9).abs() < 1e-24);
        assert!((parse_time("40 us").unwrap() - 40e-6).abs() < 1e-20);
        assert!((parse_time("1e-9 s").unwrap() - 1e-9).abs() < 1e-24);
        assert!((parse_angular("1 MHz").unwrap() - TAU * 1e6).abs() < 1e-6);
        assert!((parse_angular("-2.5e8 rad/s").unwrap() + 2.5e8).abs() < 1e-6);
    }

    proptest::proptest! {
        #[test]
        fn formatted_values_read_back_exactly(x in 1e-13f64..1e-3, f in 1e3f64..1e11, w in -1e10f64..1e10) {
            proptest::prop_assert_eq!(parse_time(&format_time(x)).unwrap(), x);
            proptest::prop_assert_eq!(parse_frequency(&format_frequency(f)).unwrap(), f);
            proptest::prop_assert_eq!(parse_angular(&format_angular(w)).unwrap(), w);
        }
    }

    #[test]
    fn rejects_missing_or_unknown_units() {
        assert!(parse_time("7").is_err());
        assert!(parse_time("7 fortnights").is_err());
        assert!(parse_frequency("abc GHz").is_err());
    }
}
