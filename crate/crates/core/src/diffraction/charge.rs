use std::f64::consts::TAU;

use num_complex::Complex64;

use super::{FarField, IntensityMap};
use crate::error::{domain, Error, Result};
use crate::grid::{bilinear, AngularGrid};

const MIN_SAMPLES: usize = 256;
const AMPLITUDE_FLOOR: f64 = 1e-6;

fn check_circle(g: &AngularGrid, center: (f64, f64), radius: f64) -> Result<()> {
    let (x0, y0) = (g.index_x(center.0 - radius), g.index_y(center.1 - radius));
    let (x1, y1) = (g.index_x(center.0 + radius), g.index_y(center.1 + radius));
    let inside = x0 >= 0.0 && y0 >= 0.0 && x1 <= (g.width - 1) as f64 && y1 <= (g.height - 1) as f64;
    if inside {
        Ok(())
    } else {
        Err(Error::OutOfBounds(format!(
            "circle of radius {:.2} urad at ({:.2}, {:.2}) urad",
            radius * 1e6,
            center.0 * 1e6,
            center.1 * 1e6
        )))
    }
}

fn sample_count(g: &AngularGrid, radius: f64) -> usize {
    let circumference_px = TAU * radius / g.pitch;
    ((4.0 * circumference_px).ceil() as usize).clamp(MIN_SAMPLES, 1 << 14)
}

/// Phase winding of the amplitude along a counter-clockwise circle, in turns.
pub fn measure_topological_charge(field: &FarField, center: (f64, f64), radius: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(domain("winding radius must be positive"));
    }
    let g = field.grid();
    check_circle(&g, center, radius)?;
    let peak = field.amplitude.iter().map(|a| a.norm()).fold(0.0, f64::max);
    let floor = AMPLITUDE_FLOOR * peak;
    let n = sample_count(&g, radius);
    let at = |k: usize| -> Complex64 {
        let a = TAU * (k % n) as f64 / n as f64;
        let fx = g.index_x(center.0 + radius * a.cos());
        let fy = g.index_y(center.1 + radius * a.sin());
        bilinear(&field.amplitude, fx, fy)
    };
    let first = at(0);
    let mut prev = first;
    let mut total = 0.0;
    for k in 1..=n {
        let cur = if k == n { first } else { at(k) };
        let amplitude = cur.norm();
        if !(amplitude >= floor) || amplitude == 0.0 {
            return Err(Error::UnreliableWinding { amplitude, floor });
        }
        total += (cur * prev.conj()).arg();
        prev = cur;
    }
    Ok(total / TAU)
}

/// Mean of the map over a circle; the centre value when `radius` is zero.
pub fn azimuthal_mean(map: &IntensityMap, center: (f64, f64), radius: f64) -> f64 {
    if radius <= 0.0 {
        return map.at(center.0, center.1);
    }
    let g = map.grid();
    let n = sample_count(&g, radius);
    (0..n)
        .map(|k| {
            let a = TAU * k as f64 / n as f64;
            map.at(center.0 + radius * a.cos(), center.1 + radius * a.sin())
        })
        .sum::<f64>()
        / n as f64
}

/// Radius of the brightest circle around `center`, searched on quarter-pixel
/// steps up to `max_radius`.
pub fn ring_radius(map: &IntensityMap, center: (f64, f64), max_radius: f64) -> Result<f64> {
    let g = map.grid();
    if !(max_radius > 0.0) {
        return Err(domain("ring search radius must be positive"));
    }
    check_circle(&g, center, max_radius)?;
    let step = g.pitch / 4.0;
    let steps = (max_radius / step).floor() as usize;
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in 0..=steps {
        let r = k as f64 * step;
        let v = azimuthal_mean(map, center, r);
        if v > best.1 {
            best = (r, v);
        }
    }
    Ok(best.0)
}
