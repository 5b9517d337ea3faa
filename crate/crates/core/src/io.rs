//! File formats: VWI1 maps and images, event lists, line cuts and fit reports.
//!
//! Angles are written in microradians. Parse errors carry the 1-based line
//! number of the offending text line.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use ndarray::Array2;

use crate::analysis::{FitResult, LineCut};
use crate::beam::DetectionClass;
use crate::diffraction::{IntensityMap, Normalization};
use crate::error::{Error, Result};
use crate::instrument::{DetectorImage, Event, EventList};
use crate::rng::ALGORITHM_ID;

const URAD: f64 = 1e-6;

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn write_vwi1<W: Write>(mut out: W, width: usize, height: usize, pitch: f64, tag: &str, values: impl Iterator<Item = f64>) -> Result<()> {
    writeln!(out, "VWI1 {width} {height} {} {tag}", pitch / URAD)?;
    let mut buf = Vec::with_capacity(width * height * 8);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

fn read_vwi1<R: BufRead>(mut input: R) -> Result<(Array2<f64>, f64, Normalization)> {
    let mut header = String::new();
    input.read_line(&mut header)?;
    let fields: Vec<&str> = header.trim_end_matches('\n').split(' ').collect();
    if fields.len() != 5 || fields[0] != "VWI1" {
        return Err(parse_err(1, "expected header \"VWI1 <width> <height> <pitch_urad> <normalization>\""));
    }
    let dim = |s: &str, what: &str| -> Result<usize> {
        s.parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| parse_err(1, format!("bad {what} {s:?}")))
    };
    let width = dim(fields[1], "width")?;
    let height = dim(fields[2], "height")?;
    let pitch = fields[3]
        .parse::<f64>()
        .ok()
        .filter(|p| *p > 0.0 && p.is_finite())
        .ok_or_else(|| parse_err(1, format!("bad angular pitch {:?}", fields[3])))?;
    let norm = Normalization::from_tag(fields[4]).ok_or_else(|| parse_err(1, format!("unknown normalization {:?}", fields[4])))?;
    let count = width
        .checked_mul(height)
        .filter(|n| n.checked_mul(8).is_some())
        .ok_or_else(|| parse_err(1, "image dimensions overflow"))?;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(parse_err(
            2,
            format!("expected {} bytes of f64 data, found {}", count * 8, bytes.len()),
        ));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let values = Array2::from_shape_vec((height, width), values).expect("length checked");
    Ok((values, pitch * URAD, norm))
}

pub fn write_intensity_map<W: Write>(out: W, map: &IntensityMap) -> Result<()> {
    let (h, w) = map.values.dim();
    write_vwi1(out, w, h, map.angular_pitch, map.normalization.as_str(), map.values.iter().copied())
}

pub fn read_intensity_map<R: BufRead>(input: R) -> Result<IntensityMap> {
    let (values, pitch, norm) = read_vwi1(input)?;
    IntensityMap::new(values, pitch, norm).map_err(|e| parse_err(2, e.to_string()))
}

pub fn write_detector_image<W: Write>(out: W, image: &DetectorImage) -> Result<()> {
    let (h, w) = image.counts.dim();
    write_vwi1(out, w, h, image.pixel_angle, Normalization::Raw.as_str(), image.counts.iter().map(|&c| c as f64))
}

/// Reads a VWI1 file whose values are non-negative integers.
pub fn read_detector_image<R: BufRead>(input: R) -> Result<DetectorImage> {
    let (values, pitch, _) = read_vwi1(input)?;
    if let Some(bad) = values.iter().find(|v| !(**v >= 0.0 && v.fract() == 0.0 && **v < 2f64.powi(53))) {
        return Err(parse_err(2, format!("detector counts must be whole numbers, found {bad}")));
    }
    let counts = values.mapv(|v| v as u64);
    let total_events = counts.sum();
    Ok(DetectorImage {
        counts,
        pixel_angle: pitch,
        total_events,
    })
}

pub fn write_events<W: Write>(mut out: W, events: &EventList) -> Result<()> {
    let mut text = String::with_capacity(40 * events.events.len() + 64);
    writeln!(text, "# seed={}", events.rng_seed).unwrap();
    writeln!(text, "# rng={ALGORITHM_ID}").unwrap();
    writeln!(text, "theta_x_urad,theta_y_urad,species").unwrap();
    for e in &events.events {
        writeln!(text, "{},{},{}", e.theta_x / URAD, e.theta_y / URAD, e.species.tag()).unwrap();
    }
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

pub fn read_events<R: BufRead>(input: R) -> Result<EventList> {
    let mut seed = None;
    let mut events = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(v) = comment.strip_prefix("seed=") {
                seed = Some(v.parse::<u64>().map_err(|_| parse_err(n, format!("bad seed {v:?}")))?);
            } else if let Some(v) = comment.strip_prefix("rng=") {
                if v != ALGORITHM_ID {
                    return Err(parse_err(n, format!("events were drawn with {v:?}, expected {ALGORITHM_ID:?}")));
                }
            }
            continue;
        }
        if line == "theta_x_urad,theta_y_urad,species" {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(parse_err(n, format!("expected 3 columns, found {}", cols.len())));
        }
        let angle = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(|v| v * URAD)
                .ok_or_else(|| parse_err(n, format!("bad angle {s:?}")))
        };
        let species = DetectionClass::from_tag(cols[2].trim()).ok_or_else(|| parse_err(n, format!("unknown species {:?}", cols[2])))?;
        events.push(Event {
            theta_x: angle(cols[0])?,
            theta_y: angle(cols[1])?,
            species,
        });
    }
    let rng_seed = seed.ok_or_else(|| parse_err(1, "missing \"# seed=<n>\" line"))?;
    Ok(EventList { events, rng_seed })
}

/// Two columns `position_urad,value`, after comment lines recording the box
/// geometry.
pub fn write_line_cut<W: Write>(mut out: W, cut: &LineCut) -> Result<()> {
    let mut text = String::new();
    writeln!(text, "# box_width_urad={}", cut.box_width / URAD).unwrap();
    writeln!(text, "# box_height_urad={}", cut.box_height / URAD).unwrap();
    writeln!(text, "# center_y_urad={}", cut.center_y / URAD).unwrap();
    writeln!(text, "position_urad,value").unwrap();
    for (p, v) in cut.positions.iter().zip(&cut.values) {
        writeln!(text, "{},{}", p / URAD, v).unwrap();
    }
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

/// Reads a line cut. Without geometry comments the box width is the position
/// step, the box height equals the width and the cut is centred at zero.
pub fn read_line_cut<R: BufRead>(input: R) -> Result<LineCut> {
    let (mut bw, mut bh, mut cy) = (None, None, 0.0);
    let mut positions = Vec::new();
    let mut values = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let n = i + 1;
        let line = line.trim();
        if line.is_empty() || line == "position_urad,value" {
            continue;
        }
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(n, format!("bad number {s:?}")))
        };
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.trim().split_once('=') {
                match k.trim() {
                    "box_width_urad" => bw = Some(num(v)? * URAD),
                    "box_height_urad" => bh = Some(num(v)? * URAD),
                    "center_y_urad" => cy = num(v)? * URAD,
                    _ => {}
                }
            }
            continue;
        }
        let (p, v) = line
            .split_once(',')
            .ok_or_else(|| parse_err(n, "expected \"position_urad,value\""))?;
        let p = num(p)? * URAD;
        if positions.last().is_some_and(|&last| p <= last) {
            return Err(parse_err(n, "positions must be strictly increasing"));
        }
        positions.push(p);
        values.push(num(v)?);
    }
    if positions.is_empty() {
        return Err(parse_err(1, "line cut has no data rows"));
    }
    let box_width = match bw {
        Some(w) => w,
        None if positions.len() >= 2 => positions[1] - positions[0],
        None => return Err(parse_err(1, "single-row line cut needs a box_width_urad comment")),
    };
    Ok(LineCut {
        positions,
        values,
        box_width,
        box_height: bh.unwrap_or(box_width),
        center_y: cy,
    })
}

/// Human-readable summary followed by a `key=value` block.
pub fn write_fit_report<W: Write>(mut out: W, fit: &FitResult, species: &[String]) -> Result<()> {
    let v = &fit.values;
    let mut t = String::new();
    writeln!(t, "line-cut fit").unwrap();
    writeln!(t, "  effective open width  {:.3} nm", v.open_width * 1e9).unwrap();
    writeln!(t, "  velocity FWHM         {:.3} %", v.fractional_fwhm * 100.0).unwrap();
    for (name, w) in species.iter().zip(&v.species_weights) {
        writeln!(t, "  weight {name:<14} {w:.4}").unwrap();
    }
    writeln!(t, "  amplitude             {:.6e}", v.amplitude).unwrap();
    writeln!(t, "  baseline              {:.6e}", v.baseline).unwrap();
    writeln!(t, "  residual              {:.6e} (start {:.6e})", fit.residual, fit.initial_residual).unwrap();
    writeln!(
        t,
        "  iterations            {} ({})",
        fit.iterations,
        if fit.converged { "converged" } else { "NOT converged" }
    )
    .unwrap();
    writeln!(t).unwrap();
    writeln!(t, "[result]").unwrap();
    writeln!(t, "open_width_nm={}", v.open_width * 1e9).unwrap();
    writeln!(t, "fractional_fwhm={}", v.fractional_fwhm).unwrap();
    for (name, w) in species.iter().zip(&v.species_weights) {
        writeln!(t, "weight.{name}={w}").unwrap();
    }
    writeln!(t, "amplitude={}", v.amplitude).unwrap();
    writeln!(t, "baseline={}", v.baseline).unwrap();
    writeln!(t, "residual={}", fit.residual).unwrap();
    writeln!(t, "initial_residual={}", fit.initial_residual).unwrap();
    writeln!(t, "iterations={}", fit.iterations).unwrap();
    writeln!(t, "converged={}", fit.converged).unwrap();
    out.write_all(t.as_bytes())?;
    out.flush()?;
    Ok(())
}

/// The `key=value` pairs of a fit report, in file order.
pub fn read_fit_report_values<R: BufRead>(input: R) -> Result<Vec<(String, String)>> {
    let mut in_block = false;
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim() == "[result]" {
            in_block = true;
            continue;
        }
        if in_block && !line.trim().is_empty() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse_err(i + 1, "expected key=value"))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    if !in_block {
        return Err(parse_err(1, "no [result] block"));
    }
    Ok(out)
}
