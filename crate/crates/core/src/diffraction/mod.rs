//! Fraunhofer diffraction of a plane matter wave through a raster mask.
//!
//! The far field is a unitary 2-D DFT of the transmission function with the
//! `+i` kernel, shifted so the zero angle sits at the grid centre. Bin `k`
//! corresponds to `θ = k·λ/(pixel_pitch·N)`. With this kernel the spot at
//! `order_center(m)` of an `n`-dislocation fork carries charge `+m·n`.

mod charge;
mod fft;

use std::f64::consts::TAU;

use ndarray::Array2;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::grid::{AngularGrid, PixelGrid};
use crate::hologram::{RasterMask, TileLayout, Transmission};

pub use charge::{azimuthal_mean, measure_topological_charge, ring_radius};
pub use fft::MAX_TRANSFORM;

/// Complex far-field amplitude on a square angular grid.
#[derive(Debug, Clone)]
pub struct FarField {
    pub amplitude: Array2<Complex64>,
    /// rad per pixel, both axes
    pub angular_pitch: f64,
    pub wavelength: f64,
    /// Σt² over mask pixels (the open count for a binary mask), equal to
    /// Σ|A|² before any array factor
    pub total_input_flux: f64,
}

impl FarField {
    pub fn grid(&self) -> AngularGrid {
        let (h, w) = self.amplitude.dim();
        AngularGrid::new(w, h, self.angular_pitch)
    }

    pub fn power(&self) -> f64 {
        self.amplitude.iter().map(|a| a.norm_sqr()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    UnitSum,
    PeakOne,
    Raw,
}

impl Normalization {
    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::UnitSum => "unit_sum",
            Normalization::PeakOne => "peak_one",
            Normalization::Raw => "raw",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "unit_sum" => Some(Normalization::UnitSum),
            "peak_one" => Some(Normalization::PeakOne),
            "raw" => Some(Normalization::Raw),
            _ => None,
        }
    }
}

/// Probability density on an angular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityMap {
    pub values: Array2<f64>,
    pub angular_pitch: f64,
    pub normalization: Normalization,
}

impl IntensityMap {
    pub fn new(values: Array2<f64>, angular_pitch: f64, normalization: Normalization) -> Result<Self> {
        if !(angular_pitch > 0.0) {
            return Err(domain("angular pitch must be positive"));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(domain("intensity values must be finite and non-negative"));
        }
        Ok(Self {
            values,
            angular_pitch,
            normalization,
        })
    }

    pub fn grid(&self) -> AngularGrid {
        let (h, w) = self.values.dim();
        AngularGrid::new(w, h, self.angular_pitch)
    }

    pub fn total(&self) -> f64 {
        self.values.sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Rescales to the requested convention. A zero map stays zero.
    pub fn normalized(mut self, normalization: Normalization) -> Self {
        let scale = match normalization {
            Normalization::UnitSum => self.total(),
            Normalization::PeakOne => self.max(),
            Normalization::Raw => 1.0,
        };
        if scale > 0.0 && scale != 1.0 {
            self.values.mapv_inplace(|v| v / scale);
        }
        self.normalization = normalization;
        self
    }

    /// Value at an angle, bilinearly interpolated.
    pub fn at(&self, theta_x: f64, theta_y: f64) -> f64 {
        let g = self.grid();
        crate::grid::bilinear(&self.values, g.index_x(theta_x), g.index_y(theta_y))
    }
}

impl PixelGrid for IntensityMap {
    fn grid(&self) -> AngularGrid {
        IntensityMap::grid(self)
    }

    fn value(&self, iy: usize, ix: usize) -> f64 {
        self.values[[iy, ix]]
    }
}

/// Fresnel number `D²/(4λL)` of a single aperture.
pub fn fresnel_number(diameter: f64, wavelength: f64, distance: f64) -> f64 {
    diameter * diameter / (4.0 * wavelength * distance)
}

/// Warns when the far-field approximation is marginal and fails when it
/// clearly does not hold.
pub fn check_fraunhofer(diameter: f64, wavelength: f64, distance: f64) -> Result<f64> {
    let f = fresnel_number(diameter, wavelength, distance);
    if !(f < 1.0) {
        return Err(Error::FresnelRegime { fresnel: f });
    }
    if f > 0.1 {
        log::warn!("Fresnel number {f:.3} exceeds 0.1; far-field results are approximate");
    }
    Ok(f)
}

fn transform_size(mask: &Transmission, wavelength: f64, pad_factor: usize) -> Result<usize> {
    if !(wavelength > 0.0 && wavelength.is_finite()) {
        return Err(domain(format!("wavelength must be positive, got {wavelength}")));
    }
    if pad_factor == 0 {
        return Err(domain("pad factor must be at least 1"));
    }
    let n = mask.width().max(mask.height()).saturating_mul(pad_factor);
    if n > MAX_TRANSFORM {
        return Err(Error::TransformTooLarge {
            width: n,
            height: n,
            max: MAX_TRANSFORM,
        });
    }
    Ok(n)
}

/// Offsets, in pixels, of the array corner from the physical origin.
fn corner_shift(mask: &Transmission) -> (f64, f64) {
    (
        (mask.width() as f64 - 1.0) / 2.0 - mask.origin.0 / mask.pixel_pitch,
        (mask.height() as f64 - 1.0) / 2.0 - mask.origin.1 / mask.pixel_pitch,
    )
}

/// Far-field amplitude of `mask` illuminated by a unit plane wave.
///
/// The mask is zero-padded to a square of `pad_factor·max(width, height)`
/// pixels. Amplitudes are scaled so that Σ|A|² equals the open pixel count.
pub fn far_field(mask: &RasterMask, wavelength: f64, pad_factor: usize) -> Result<FarField> {
    far_field_transmission(&Transmission::from(mask), wavelength, pad_factor)
}

/// [`far_field`] for a grey-level transmission; Σ|A|² equals Σt².
pub fn far_field_transmission(mask: &Transmission, wavelength: f64, pad_factor: usize) -> Result<FarField> {
    let n = transform_size(mask, wavelength, pad_factor)?;
    let angular_pitch = wavelength / (mask.pixel_pitch * n as f64);
    let open = mask.power();
    if open == 0.0 {
        return Ok(FarField {
            amplitude: Array2::zeros((n, n)),
            angular_pitch,
            wavelength,
            total_input_flux: 0.0,
        });
    }

    let mut data = vec![Complex64::default(); n * n];
    for ((iy, ix), &t) in mask.values.indexed_iter() {
        data[iy * n + ix] = Complex64::new(t, 0.0);
    }
    let spectrum = fft::dft2_plus_i(data, n, mask.height());

    let (shift_x, shift_y) = corner_shift(mask);
    let scale = 1.0 / n as f64;
    let half = n / 2;
    let ramp = |k: i64, shift: f64| Complex64::from_polar(scale.sqrt(), -TAU * k as f64 * shift / n as f64);
    let ramp_x: Vec<Complex64> = (0..n).map(|ix| ramp(ix as i64 - half as i64, shift_x)).collect();
    let ramp_y: Vec<Complex64> = (0..n).map(|iy| ramp(iy as i64 - half as i64, shift_y)).collect();

    let mut amplitude = Array2::zeros((n, n));
    amplitude
        .axis_iter_mut(ndarray::Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(iy, mut row)| {
            let sy = (iy + n - half) % n;
            for (ix, v) in row.iter_mut().enumerate() {
                let sx = (ix + n - half) % n;
                *v = spectrum[sy * n + sx] * ramp_y[iy] * ramp_x[ix];
            }
        });

    Ok(FarField {
        amplitude,
        angular_pitch,
        wavelength,
        total_input_flux: open,
    })
}

/// The `2·half_rows + 1` rows of [`far_field`] nearest the zero angle, on a
/// grid centred the same way. The transform along y is evaluated directly,
/// so this is much cheaper than the full field when few rows are needed.
pub fn far_field_rows(
    mask: &RasterMask,
    wavelength: f64,
    pad_factor: usize,
    half_rows: usize,
) -> Result<FarField> {
    far_field_rows_transmission(&Transmission::from(mask), wavelength, pad_factor, half_rows)
}

/// [`far_field_rows`] for a grey-level transmission.
pub fn far_field_rows_transmission(
    mask: &Transmission,
    wavelength: f64,
    pad_factor: usize,
    half_rows: usize,
) -> Result<FarField> {
    let n = transform_size(mask, wavelength, pad_factor)?;
    let angular_pitch = wavelength / (mask.pixel_pitch * n as f64);
    let rows = 2 * half_rows + 1;
    let open = mask.power();
    let mut amplitude = Array2::zeros((rows, n));
    if open == 0.0 {
        return Ok(FarField {
            amplitude,
            angular_pitch,
            wavelength,
            total_input_flux: 0.0,
        });
    }
    let (shift_x, shift_y) = corner_shift(mask);
    let twiddle: Vec<Complex64> = (0..n)
        .map(|j| Complex64::from_polar(1.0, TAU * j as f64 / n as f64))
        .collect();
    let half = n / 2;
    let scale = 1.0 / n as f64;
    let ramp_x: Vec<Complex64> = (0..n)
        .map(|ix| Complex64::from_polar(1.0, -TAU * (ix as f64 - half as f64) * shift_x / n as f64))
        .collect();
    let open_columns: Vec<Vec<(usize, f64)>> = mask
        .values
        .outer_iter()
        .map(|row| row.iter().copied().enumerate().filter(|&(_, t)| t != 0.0).collect())
        .collect();
    let fft = rustfft::FftPlanner::new().plan_fft_inverse(n);

    amplitude
        .axis_iter_mut(ndarray::Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each_init(
            || (vec![Complex64::default(); n], vec![Complex64::default(); fft.get_inplace_scratch_len()]),
            |(line, scratch), (iy, mut out)| {
                let ky = iy as i64 - half_rows as i64;
                line.iter_mut().for_each(|v| *v = Complex64::default());
                for (y, cols) in open_columns.iter().enumerate() {
                    if cols.is_empty() {
                        continue;
                    }
                    let e = twiddle[(ky * y as i64).rem_euclid(n as i64) as usize];
                    for &(x, t) in cols {
                        line[x] += e * t;
                    }
                }
                fft.process_with_scratch(line, scratch);
                let ramp_y = Complex64::from_polar(scale, -TAU * ky as f64 * shift_y / n as f64);
                for (ix, v) in out.iter_mut().enumerate() {
                    let sx = (ix + n - half) % n;
                    *v = line[sx] * ramp_x[ix] * ramp_y;
                }
            },
        );

    Ok(FarField {
        amplitude,
        angular_pitch,
        wavelength,
        total_input_flux: open,
    })
}

/// `Σ_j cos(2π·θ·x_j/λ)` over `count` positions spaced by `pitch` and centred on zero.
fn lattice_sum(count: u32, pitch: f64, theta: f64, wavelength: f64) -> f64 {
    let c = (f64::from(count) - 1.0) / 2.0;
    (0..count)
        .map(|j| (TAU * theta * (f64::from(j) - c) * pitch / wavelength).cos())
        .sum()
}

/// Multiplies `field` by the coherent lattice sum of a centred tile array.
pub fn array_factor(layout: &TileLayout, wavelength: f64, field: &FarField) -> Result<FarField> {
    if layout.count_x == 0 || layout.count_y == 0 {
        return Err(domain("tile counts must be at least 1"));
    }
    if !(wavelength > 0.0) {
        return Err(domain("wavelength must be positive"));
    }
    if layout.count_x == 1 && layout.count_y == 1 {
        return Ok(field.clone());
    }
    if !(layout.pitch_x > 0.0 && layout.pitch_y > 0.0) {
        return Err(domain("tile pitch must be positive"));
    }
    let g = field.grid();
    for (count, pitch) in [(layout.count_x, layout.pitch_x), (layout.count_y, layout.pitch_y)] {
        let lobe = wavelength / (f64::from(count) * pitch);
        if count > 1 && lobe < 2.0 * g.pitch {
            log::warn!(
                "array-factor peaks ({:.2} urad wide) are undersampled by the {:.2} urad grid",
                lobe * 1e6,
                g.pitch * 1e6
            );
        }
    }
    let fx: Vec<f64> = (0..g.width)
        .map(|ix| lattice_sum(layout.count_x, layout.pitch_x, g.angle_x(ix), wavelength))
        .collect();
    let fy: Vec<f64> = (0..g.height)
        .map(|iy| lattice_sum(layout.count_y, layout.pitch_y, g.angle_y(iy), wavelength))
        .collect();
    let mut out = field.clone();
    for ((iy, ix), a) in out.amplitude.indexed_iter_mut() {
        *a *= fx[ix] * fy[iy];
    }
    Ok(out)
}

/// `|A|²` with the requested normalization.
pub fn intensity(field: &FarField, normalization: Normalization) -> IntensityMap {
    let values = field.amplitude.mapv(|a| a.norm_sqr());
    IntensityMap {
        values,
        angular_pitch: field.angular_pitch,
        normalization: Normalization::Raw,
    }
    .normalized(normalization)
}

/// Paraxial angle `m·λ/d` of diffraction order `m`.
pub fn order_center(order: i32, wavelength: f64, period: f64) -> f64 {
    f64::from(order) * wavelength / period
}
