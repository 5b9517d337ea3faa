//! Pixel-averaged transmission of the eroded hologram rule.
//!
//! Across one pixel the fringe phase and the radius are taken as linear in
//! position. A linear function over a square pixel is distributed as the
//! convolution of two boxes (a trapezoid), so the open fraction follows
//! exactly from the second antiderivative of the open-set indicator.

use ndarray::{Array2, Zip};

use super::{check_raster, HologramSpec, RasterMask};
use crate::error::{domain, Result};

/// Amplitude transmission in [0, 1] per pixel on a centred square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub pixel_pitch: f64,
    pub values: Array2<f64>,
    /// physical coordinate of the grid centre, m
    pub origin: (f64, f64),
}

impl Transmission {
    pub fn width(&self) -> usize {
        self.values.ncols()
    }

    pub fn height(&self) -> usize {
        self.values.nrows()
    }

    /// Σ t², the transmitted power for unit illumination per pixel.
    pub fn power(&self) -> f64 {
        self.values.iter().map(|t| t * t).sum()
    }
}

impl From<&RasterMask> for Transmission {
    fn from(mask: &RasterMask) -> Self {
        Self {
            pixel_pitch: mask.pixel_pitch,
            values: mask.occupancy.mapv(|o| if o { 1.0 } else { 0.0 }),
            origin: mask.origin,
        }
    }
}

/// Second antiderivative of the periodic indicator `frac(t) < w`, H(0) = 0.
fn fringe_h(x: f64, w: f64) -> f64 {
    let k = x.floor();
    let f = x - k;
    let per_period = w - 0.5 * w * w;
    let partial = if f <= w { 0.5 * f * f } else { 0.5 * w * w + w * (f - w) };
    0.5 * w * k * (k - 1.0) + per_period * k + k * w * f + partial
}

/// First antiderivative of the same indicator.
fn fringe_g(x: f64, w: f64) -> f64 {
    let k = x.floor();
    k * w + (x - k).min(w)
}

/// Mean of an indicator over `u0 + s + t`, s and t uniform on
/// [−a/2, a/2] and [−b/2, b/2], given its antiderivatives `g` and `h`.
fn trapezoid_mean(u0: f64, a: f64, b: f64, g: impl Fn(f64) -> f64, h: impl Fn(f64) -> f64) -> f64 {
    let (a, b) = if a >= b { (a, b) } else { (b, a) };
    if a == 0.0 {
        return g(u0 + 0.5e-300) - g(u0 - 0.5e-300);
    }
    if b <= 1e-6 * a {
        return (g(u0 + 0.5 * a) - g(u0 - 0.5 * a)) / a;
    }
    let (s, d) = (0.5 * (a + b), 0.5 * (a - b));
    (h(u0 + s) - h(u0 + d) - h(u0 - d) + h(u0 - s)) / (a * b)
}

/// Open fraction of the pixel of side `pitch` centred at `(x, y)` under the
/// eroded rule.
pub fn eroded_coverage(x: f64, y: f64, spec: &HologramSpec, margin: f64, pitch: f64) -> f64 {
    let r = x.hypot(y);
    if r == 0.0 {
        return 0.0;
    }
    // rim: fraction with radius below the eroded radius
    let rim = spec.diameter / 2.0 - margin;
    let (ra, rb) = (pitch * x.abs() / r, pitch * y.abs() / r);
    let inside = trapezoid_mean(rim - r, ra, rb, |z| z.max(0.0), |z| 0.5 * z.max(0.0).powi(2));
    if inside <= 0.0 {
        return 0.0;
    }

    let (gx, gy) = spec.fringe_phase_components(x, y);
    let shift = margin * gx.hypot(gy);
    let width = spec.open_fraction - 2.0 * shift;
    if width <= 0.0 {
        return 0.0;
    }
    let fringe = if width >= 1.0 {
        1.0
    } else {
        let psi = spec.fringe_phase(x, y) - shift;
        // the result is invariant under integer shifts of psi; remove them for precision
        let psi = psi - psi.floor();
        trapezoid_mean(psi, pitch * gx.abs(), pitch * gy.abs(), |z| fringe_g(z, width), |z| fringe_h(z, width))
    };
    (inside * fringe).clamp(0.0, 1.0)
}

/// Pixel-averaged [`super::eroded_transmission`] on a square grid of side
/// `extent`, centred on the hologram.
pub fn rasterize_coverage(spec: &HologramSpec, margin: f64, pixel_pitch: f64, extent: f64) -> Result<Transmission> {
    let n = check_raster(spec, pixel_pitch, extent)?;
    if !margin.is_finite() {
        return Err(domain("erosion margin must be finite"));
    }
    let c = (n as f64 - 1.0) / 2.0;
    let mut values = Array2::zeros((n, n));
    Zip::indexed(&mut values).par_for_each(|(iy, ix), v| {
        let x = (ix as f64 - c) * pixel_pitch;
        let y = (iy as f64 - c) * pixel_pitch;
        *v = eroded_coverage(x, y, spec, margin, pixel_pitch);
    });
    Ok(Transmission {
        pixel_pitch,
        values,
        origin: (0.0, 0.0),
    })
}
