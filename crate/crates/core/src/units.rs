//! Physical constants and unit-suffixed quantity parsing.
//!
//! Everything inside the crate is SI. Text interfaces carry explicit unit
//! suffixes ("100 nm", "30 urad", "1090 m/s") and a bare number is rejected.

use crate::error::{Error, Result};

/// Planck constant, J·s (exact since the 2019 SI redefinition).
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Mass of a helium-4 atom, kg.
pub const HELIUM4_MASS: f64 = 6.6465e-27;

/// Unified atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// FWHM of a Gaussian in units of its standard deviation, 2·sqrt(2·ln 2).
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

pub const NANOMETER: f64 = 1e-9;
pub const PICOMETER: f64 = 1e-12;
pub const MICROMETER: f64 = 1e-6;
pub const MILLIMETER: f64 = 1e-3;
pub const MICRORADIAN: f64 = 1e-6;
pub const MILLIRADIAN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Angle,
    Speed,
    Mass,
}

impl Dimension {
    fn si_symbol(self) -> &'static str {
        match self {
            Dimension::Length => "m",
            Dimension::Angle => "rad",
            Dimension::Speed => "m/s",
            Dimension::Mass => "kg",
        }
    }

    fn scale(self, unit: &str) -> Option<f64> {
        let s = match (self, unit) {
            (Dimension::Length, "m") => 1.0,
            (Dimension::Length, "mm") => MILLIMETER,
            (Dimension::Length, "um" | "μm" | "µm") => MICROMETER,
            (Dimension::Length, "nm") => NANOMETER,
            (Dimension::Length, "pm") => PICOMETER,
            (Dimension::Angle, "rad") => 1.0,
            (Dimension::Angle, "mrad") => MILLIRADIAN,
            (Dimension::Angle, "urad" | "μrad" | "µrad") => MICRORADIAN,
            (Dimension::Speed, "m/s") => 1.0,
            (Dimension::Speed, "km/s") => 1e3,
            (Dimension::Mass, "kg") => 1.0,
            (Dimension::Mass, "u" | "amu" | "Da") => ATOMIC_MASS_UNIT,
            _ => return None,
        };
        Some(s)
    }
}

/// Parses a unit-suffixed quantity into SI.
pub fn parse_quantity(text: &str, dim: Dimension) -> Result<f64> {
    let text = text.trim();
    let split = text
        .find(|c: char| !(c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E')))
        .ok_or_else(|| unit_error(text, dim, "missing unit"))?;
    let (num, unit) = text.split_at(split);
    let value: f64 = num
        .trim()
        .parse()
        .map_err(|_| unit_error(text, dim, "malformed number"))?;
    let unit = unit.trim();
    if unit.is_empty() {
        return Err(unit_error(text, dim, "missing unit"));
    }
    let scale = dim
        .scale(unit)
        .ok_or_else(|| unit_error(text, dim, &format!("unknown unit '{unit}'")))?;
    if !value.is_finite() {
        return Err(unit_error(text, dim, "non-finite value"));
    }
    Ok(value * scale)
}

/// Formats an SI value so that [`parse_quantity`] reproduces it bit-exactly.
pub fn format_quantity(value: f64, dim: Dimension) -> String {
    format!("{value:e} {}", dim.si_symbol())
}

fn unit_error(text: &str, dim: Dimension, why: &str) -> Error {
    Error::Domain(format!(
        "cannot read '{text}' as a {dim:?} quantity: {why}"
    ))
}
