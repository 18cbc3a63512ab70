//! Human-unit quantity parsing for configuration files and command-line input.
//!
//! Every quantity must carry an explicit, case-sensitive unit. Detunings written in cyclic
//! units (`Hz`, `kHz`, ...) are converted to angular frequency (rad/s) by a
//! factor 2π; cyclic frequencies of signals stay in Hz.

use std::f64::consts::TAU;

use crate::error::{Error, Result};

fn split_number(text: &str) -> Option<(f64, &str)> {
    let s = text.trim();
    let bytes = s.as_bytes();
    let mut end = 0;
    let mut seen_digit = false;
    let mut seen_dot = false;
    if end < bytes.len() && (bytes[end] == b'+' || bytes[end] == b'-') {
        end += 1;
    }
    while end < bytes.len() {
        match bytes[end] {
            b'0'..=b'9' => seen_digit = true,
            b'.' if !seen_dot => seen_dot = true,
            _ => break,
        }
        end += 1;
    }
    if !seen_digit {
        return None;
    }
    // exponent only if followed by digits, so "5e-7s" works and "5 eV" would not parse as exponent
    if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
        let mut k = end + 1;
        if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
            k += 1;
        }
        let digits_start = k;
        while k < bytes.len() && bytes[k].is_ascii_digit() {
            k += 1;
        }
        if k > digits_start {
            end = k;
        }
    }
    let value: f64 = s[..end].parse().ok()?;
    Some((value, s[end..].trim()))
}

fn parse_with(text: &str, what: &str, table: &[(&str, f64)]) -> Result<f64> {
    let (value, unit) = split_number(text)
        .ok_or_else(|| Error::Config(format!("cannot parse {what} '{text}': expected <number><unit>")))?;
    if unit.is_empty() {
        let units: Vec<&str> = table.iter().map(|(u, _)| *u).collect();
        return Err(Error::Config(format!(
            "{what} '{text}' has no unit; use one of {}",
            units.join(", ")
        )));
    }
    table
        .iter()
        .find(|(u, _)| *u == unit || (*u == "us" && unit == "µs"))
        .map(|&(_, scale)| apply_scale(value, scale))
        .ok_or_else(|| {
            let units: Vec<&str> = table.iter().map(|(u, _)| *u).collect();
            Error::Config(format!(
                "unknown unit '{unit}' in {what} '{text}'; use one of {}",
                units.join(", ")
            ))
        })
}

/// Sub-unit prefixes divide by the exact reciprocal, so "5 us" gives the
/// same double as the literal 5e-6.
fn apply_scale(value: f64, scale: f64) -> f64 {
    let inverse = (1.0 / scale).round();
    if scale < 1.0 && (inverse * scale - 1.0).abs() < 1e-12 {
        value / inverse
    } else {
        value * scale
    }
}

const TIME_UNITS: &[(&str, f64)] = &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("ns", 1e-9)];

/// Parses a duration into seconds.
pub fn parse_time(text: &str) -> Result<f64> {
    parse_with(text, "time", TIME_UNITS)
}

/// Parses a detuning into angular frequency (rad/s).
pub fn parse_angular(text: &str) -> Result<f64> {
    parse_with(
        text,
        "angular frequency",
        &[
            ("rad/s", 1.0),
            ("krad/s", 1e3),
            ("Mrad/s", 1e6),
            ("Hz", TAU),
            ("kHz", TAU * 1e3),
            ("MHz", TAU * 1e6),
            ("GHz", TAU * 1e9),
        ],
    )
}

/// Parses a cyclic frequency into Hz.
pub fn parse_frequency(text: &str) -> Result<f64> {
    parse_with(
        text,
        "frequency",
        &[("Hz", 1.0), ("kHz", 1e3), ("MHz", 1e6), ("GHz", 1e9)],
    )
}

/// Parses a magnetic field into tesla.
pub fn parse_field(text: &str) -> Result<f64> {
    parse_with(
        text,
        "magnetic field",
        &[
            ("T", 1.0),
            ("mT", 1e-3),
            ("uT", 1e-6),
            ("nT", 1e-9),
            ("pT", 1e-12),
            ("G", 1e-4),
        ],
    )
}

/// Parses a gyromagnetic ratio into rad/s per tesla.
pub fn parse_gyromagnetic(text: &str) -> Result<f64> {
    parse_with(
        text,
        "gyromagnetic ratio",
        &[
            ("rad/s/T", 1.0),
            ("Hz/T", TAU),
            ("GHz/T", TAU * 1e9),
            ("MHz/mT", TAU * 1e9),
            ("MHz/G", TAU * 1e10),
        ],
    )
}

/// Parses an angle into radians.
pub fn parse_angle(text: &str) -> Result<f64> {
    parse_with(
        text,
        "angle",
        &[("rad", 1.0), ("deg", std::f64::consts::PI / 180.0)],
    )
}
