//! Binary fork-dislocation holograms.
//!
//! A hologram is the binarized interference of a tilted plane wave with a
//! vortex `exp(i n φ)`. With `ψ = u/d − n·φ/2π` (u along the fringe axis), a
//! point inside the circular aperture transmits when `frac(ψ) < open_fraction`,
//! which keeps the local duty cycle equal to `open_fraction` everywhere.

mod coverage;
mod erosion;
mod export;

use std::f64::consts::TAU;

use ndarray::{Array2, Zip};

use crate::error::{domain, Error, Result};

pub use coverage::{eroded_coverage, rasterize_coverage, Transmission};
pub use erosion::erode_open_regions;
pub use export::{blocked_islands, export_mask, import_pbm, BlockedIsland, MaskFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FringeAxis {
    X,
    Y,
}

impl FringeAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            FringeAxis::X => "x",
            FringeAxis::Y => "y",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HologramSpec {
    /// fringe period d, m
    pub period: f64,
    /// number of edge dislocations n
    pub dislocations: u32,
    /// diameter D of the developed circular area, m
    pub diameter: f64,
    /// open (transmitting) fraction of each period
    pub open_fraction: f64,
    pub fringe_axis: FringeAxis,
}

impl HologramSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.period > 0.0 && self.period.is_finite()) {
            return Err(domain(format!("period must be positive, got {}", self.period)));
        }
        if !(self.diameter > 0.0 && self.diameter.is_finite()) {
            return Err(domain(format!("diameter must be positive, got {}", self.diameter)));
        }
        if !(self.open_fraction > 0.0 && self.open_fraction < 1.0) {
            return Err(domain(format!(
                "open fraction must lie in (0, 1), got {}",
                self.open_fraction
            )));
        }
        Ok(())
    }

    /// Designed width of the transmitting part of each period.
    pub fn open_width(&self) -> f64 {
        self.open_fraction * self.period
    }

    fn along(&self, x: f64, y: f64) -> f64 {
        match self.fringe_axis {
            FringeAxis::X => x,
            FringeAxis::Y => y,
        }
    }

    /// Fringe phase ψ in units of periods.
    pub fn fringe_phase(&self, x: f64, y: f64) -> f64 {
        self.along(x, y) / self.period - f64::from(self.dislocations) * y.atan2(x) / TAU
    }

    /// ∇ψ in periods per metre.
    pub fn fringe_phase_components(&self, x: f64, y: f64) -> (f64, f64) {
        let r2 = x * x + y * y;
        let k = f64::from(self.dislocations) / (TAU * r2);
        // ∇φ = (−y, x)/r²
        match self.fringe_axis {
            FringeAxis::X => (1.0 / self.period + k * y, -k * x),
            FringeAxis::Y => (k * y, 1.0 / self.period - k * x),
        }
    }

    /// |∇ψ| in periods per metre.
    pub fn fringe_phase_gradient(&self, x: f64, y: f64) -> f64 {
        let (gx, gy) = self.fringe_phase_components(x, y);
        gx.hypot(gy)
    }
}

/// The hologram rule at a point of the mask plane. The origin is blocked.
pub fn fork_transmission(x: f64, y: f64, spec: &HologramSpec) -> bool {
    let r = x.hypot(y);
    if r == 0.0 || r > spec.diameter / 2.0 {
        return false;
    }
    let psi = spec.fringe_phase(x, y);
    psi - psi.floor() < spec.open_fraction
}

/// The hologram rule after removing a band of width `margin` from every edge
/// of the open set, aperture rim included.
///
/// The distance to the nearest fringe edge is taken to first order as
/// `Δψ/|∇ψ|`, which is exact for straight fringes and keeps the eroded
/// geometry a continuous function of `margin` at any raster pitch. A negative
/// margin widens the open set.
pub fn eroded_transmission(x: f64, y: f64, spec: &HologramSpec, margin: f64) -> bool {
    if margin == 0.0 {
        return fork_transmission(x, y, spec);
    }
    let r = x.hypot(y);
    if r == 0.0 || r > spec.diameter / 2.0 - margin {
        return false;
    }
    let shift = margin * spec.fringe_phase_gradient(x, y);
    let width = spec.open_fraction - 2.0 * shift;
    if width <= 0.0 {
        return false;
    }
    if width >= 1.0 {
        return true;
    }
    let psi = spec.fringe_phase(x, y) - shift;
    psi - psi.floor() < width
}

/// Where a mask came from; carried into exported files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskProvenance {
    pub spec: HologramSpec,
    pub erosion_margin: f64,
}

/// Binary raster realisation of a transmission mask. `occupancy[[iy, ix]]` is
/// true where the mask transmits.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterMask {
    pub pixel_pitch: f64,
    pub occupancy: Array2<bool>,
    /// physical coordinate of the grid centre, m
    pub origin: (f64, f64),
    pub provenance: Option<MaskProvenance>,
}

impl RasterMask {
    pub fn new(occupancy: Array2<bool>, pixel_pitch: f64) -> Result<Self> {
        if !(pixel_pitch > 0.0) {
            return Err(domain("pixel pitch must be positive"));
        }
        Ok(Self {
            pixel_pitch,
            occupancy,
            origin: (0.0, 0.0),
            provenance: None,
        })
    }

    pub fn width(&self) -> usize {
        self.occupancy.ncols()
    }

    pub fn height(&self) -> usize {
        self.occupancy.nrows()
    }

    /// Physical centre of pixel `(ix, iy)`.
    pub fn pixel_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        let cx = (self.width() as f64 - 1.0) / 2.0;
        let cy = (self.height() as f64 - 1.0) / 2.0;
        (
            self.origin.0 + (ix as f64 - cx) * self.pixel_pitch,
            self.origin.1 + (iy as f64 - cy) * self.pixel_pitch,
        )
    }

    pub fn open_count(&self) -> usize {
        self.occupancy.iter().filter(|&&o| o).count()
    }

    pub fn blocked_count(&self) -> usize {
        self.occupancy.len() - self.open_count()
    }

    pub fn is_empty(&self) -> bool {
        self.open_count() == 0
    }

    /// Open-pixel fraction among pixels whose centres lie within `diameter/2`
    /// of the origin.
    pub fn open_fraction_in_disk(&self, diameter: f64) -> f64 {
        let r = diameter / 2.0;
        let mut inside = 0usize;
        let mut open = 0usize;
        for ((iy, ix), &o) in self.occupancy.indexed_iter() {
            let (x, y) = self.pixel_center(ix, iy);
            if (x - self.origin.0).hypot(y - self.origin.1) <= r {
                inside += 1;
                open += usize::from(o);
            }
        }
        if inside == 0 {
            0.0
        } else {
            open as f64 / inside as f64
        }
    }
}

/// Periodic arrangement of identical holograms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileLayout {
    pub pitch_x: f64,
    pub pitch_y: f64,
    pub count_x: u32,
    pub count_y: u32,
}

impl TileLayout {
    pub fn single() -> Self {
        Self {
            pitch_x: 1.0,
            pitch_y: 1.0,
            count_x: 1,
            count_y: 1,
        }
    }

    pub fn validate(&self, diameter: f64) -> Result<()> {
        if self.count_x == 0 || self.count_y == 0 {
            return Err(domain("tile counts must be at least 1"));
        }
        let multi = self.count_x > 1 || self.count_y > 1;
        if multi && (self.pitch_x < diameter || self.pitch_y < diameter) {
            return Err(domain(format!(
                "tile pitch ({:e}, {:e}) m is smaller than the hologram diameter {diameter:e} m",
                self.pitch_x, self.pitch_y
            )));
        }
        Ok(())
    }

    pub fn tile_count(&self) -> u32 {
        self.count_x * self.count_y
    }
}

fn grid_size(extent: f64, pitch: f64) -> usize {
    let n = extent / pitch;
    let rounded = n.round();
    if (n - rounded).abs() <= 1e-9 * n.max(1.0) {
        (rounded as usize).max(1)
    } else {
        (n.ceil() as usize).max(1)
    }
}

fn check_raster(spec: &HologramSpec, pixel_pitch: f64, extent: f64) -> Result<usize> {
    spec.validate()?;
    if !(pixel_pitch > 0.0) {
        return Err(domain("pixel pitch must be positive"));
    }
    if pixel_pitch > spec.period / 20.0 * (1.0 + 1e-9) {
        return Err(Error::Resolution {
            pitch_nm: pixel_pitch * 1e9,
            period_nm: spec.period * 1e9,
        });
    }
    if extent < spec.diameter * (1.0 - 1e-12) {
        return Err(domain(format!(
            "raster extent {extent:e} m is smaller than the hologram diameter {:e} m",
            spec.diameter
        )));
    }
    let n = grid_size(extent, pixel_pitch);
    if n > 1 << 15 {
        return Err(domain(format!("raster of {n} pixels per side is too large")));
    }
    Ok(n)
}

fn rasterize_with<F>(n: usize, pixel_pitch: f64, rule: F) -> Array2<bool>
where
    F: Fn(f64, f64) -> bool + Sync,
{
    let c = (n as f64 - 1.0) / 2.0;
    let mut occ = Array2::from_elem((n, n), false);
    Zip::indexed(&mut occ).par_for_each(|(iy, ix), v| {
        let x = (ix as f64 - c) * pixel_pitch;
        let y = (iy as f64 - c) * pixel_pitch;
        *v = rule(x, y);
    });
    occ
}

/// Samples [`fork_transmission`] at pixel centres on a square grid of side
/// `extent`, centred on the hologram.
pub fn rasterize(spec: &HologramSpec, pixel_pitch: f64, extent: f64) -> Result<RasterMask> {
    rasterize_eroded(spec, 0.0, pixel_pitch, extent)
}

/// Like [`rasterize`] but samples [`eroded_transmission`].
pub fn rasterize_eroded(
    spec: &HologramSpec,
    margin: f64,
    pixel_pitch: f64,
    extent: f64,
) -> Result<RasterMask> {
    let n = check_raster(spec, pixel_pitch, extent)?;
    if !margin.is_finite() {
        return Err(domain("erosion margin must be finite"));
    }
    let occupancy = rasterize_with(n, pixel_pitch, |x, y| eroded_transmission(x, y, spec, margin));
    let mask = RasterMask {
        pixel_pitch,
        occupancy,
        origin: (0.0, 0.0),
        provenance: Some(MaskProvenance {
            spec: *spec,
            erosion_margin: margin,
        }),
    };
    if margin > 0.0 && mask.is_empty() {
        log::warn!("erosion by {:.2} nm removed every open pixel", margin * 1e9);
    }
    Ok(mask)
}

/// Repeats `mask` on the lattice of `layout`. Each cell is `pitch/pixel_pitch`
/// pixels (must be an integer) with the mask centred inside it.
pub fn tile_mask(mask: &RasterMask, layout: &TileLayout) -> Result<RasterMask> {
    let cell = |pitch: f64| -> Result<usize> {
        let n = pitch / mask.pixel_pitch;
        let r = n.round();
        if (n - r).abs() > 1e-6 {
            return Err(domain(format!(
                "tile pitch {pitch:e} m is not a whole number of {:e} m pixels",
                mask.pixel_pitch
            )));
        }
        Ok(r as usize)
    };
    if layout.count_x == 0 || layout.count_y == 0 {
        return Err(domain("tile counts must be at least 1"));
    }
    let (cw, ch) = (cell(layout.pitch_x)?, cell(layout.pitch_y)?);
    if cw < mask.width() || ch < mask.height() {
        return Err(domain("tile pitch is smaller than the mask"));
    }
    let (w, h) = (cw * layout.count_x as usize, ch * layout.count_y as usize);
    if w * h > 1 << 28 {
        return Err(domain("tiled mask is too large"));
    }
    let ox = (cw - mask.width()) / 2;
    let oy = (ch - mask.height()) / 2;
    let mut occ = Array2::from_elem((h, w), false);
    for ty in 0..layout.count_y as usize {
        for tx in 0..layout.count_x as usize {
            for ((iy, ix), &o) in mask.occupancy.indexed_iter() {
                occ[[ty * ch + oy + iy, tx * cw + ox + ix]] = o;
            }
        }
    }
    Ok(RasterMask {
        pixel_pitch: mask.pixel_pitch,
        occupancy: occ,
        origin: mask.origin,
        provenance: mask.provenance,
    })
}
