//! Instrument model: velocity-spread averaging, tile array, collimation blur,
//! species mixtures, and detection events.
//!
//! All species of a simulation share one reference grid, the far-field grid of
//! the slowest-diffracting (longest mean wavelength) species. An optional
//! [`View`] restricts the output to a centred window, which lets line-cut
//! fitting evaluate only the rows it needs.

mod events;

use ndarray::{Array2, Axis};
use rayon::prelude::*;

use crate::beam::{divergence_angle, wavelength_samples, BeamModel, BeamlineGeometry, ParticleSpecies};
use crate::diffraction::{
    array_factor, check_fraunhofer, far_field_rows_transmission, far_field_transmission, intensity, IntensityMap, Normalization,
};
use crate::error::{domain, Error, Result};
use crate::grid::AngularGrid;
use crate::hologram::{rasterize_coverage, rasterize_eroded, HologramSpec, RasterMask, TileLayout, Transmission};

pub use events::{
    accumulate, accumulate_on, apply_deflection, expected_counts, sample_events, sample_mixture,
    total_variation, DeflectionModel, DetectorImage, Event, EventList,
};

/// Half extents of a centred output window, rad.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct View {
    pub half_width: f64,
    pub half_height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentModel {
    pub beam: BeamModel,
    pub geometry: BeamlineGeometry,
    /// tiles summed coherently by the array factor
    pub layout: TileLayout,
    pub spec: HologramSpec,
    pub erosion_margin: f64,
    pub detector_pixel_angle: f64,
    pub wavelength_sample_count: usize,
    pub raster_pitch: f64,
    pub pad_factor: usize,
    pub view: Option<View>,
}

impl InstrumentModel {
    pub fn validate(&self) -> Result<()> {
        self.beam.validate()?;
        self.geometry.validate()?;
        self.spec.validate()?;
        self.layout.validate(self.spec.diameter)?;
        if !(self.detector_pixel_angle > 0.0) {
            return Err(domain("detector pixel angle must be positive"));
        }
        if self.wavelength_sample_count == 0 {
            return Err(domain("wavelength sample count must be at least 1"));
        }
        if !self.erosion_margin.is_finite() {
            return Err(domain("erosion margin must be finite"));
        }
        if let Some(v) = self.view {
            if !(v.half_width > 0.0 && v.half_height > 0.0) {
                return Err(domain("view half extents must be positive"));
            }
        }
        Ok(())
    }

    /// The single eroded hologram sampled at pixel centres, for export.
    pub fn mask(&self) -> Result<RasterMask> {
        rasterize_eroded(&self.spec, self.erosion_margin, self.raster_pitch, self.spec.diameter)
    }

    /// The single eroded hologram as propagated: each pixel carries its open
    /// area fraction, so the far field varies smoothly with the margin.
    pub fn transmission(&self) -> Result<Transmission> {
        rasterize_coverage(&self.spec, self.erosion_margin, self.raster_pitch, self.spec.diameter)
    }

    fn transform_size(&self) -> Result<usize> {
        let n = (self.spec.diameter / self.raster_pitch).round() as usize;
        Ok(n.max(1) * self.pad_factor)
    }

    /// Longest mean wavelength among species with non-zero weight.
    pub fn reference_wavelength(&self) -> Result<f64> {
        let mut best: f64 = 0.0;
        for (s, w) in self.beam.normalized_composition() {
            if w > 0.0 {
                best = best.max(self.beam.mean_wavelength(&s)?);
            }
        }
        if best > 0.0 {
            Ok(best)
        } else {
            Err(domain("beam composition has no species with positive weight"))
        }
    }

    /// Output grid shared by every species.
    pub fn reference_grid(&self) -> Result<AngularGrid> {
        let n = self.transform_size()?;
        let pitch = self.reference_wavelength()? / (self.raster_pitch * n as f64);
        Ok(match self.view {
            None => AngularGrid::new(n, n, pitch),
            Some(v) => {
                let side = |half: f64| (2 * (half / pitch).ceil() as usize + 1).min(n | 1);
                AngularGrid::new(side(v.half_width), side(v.half_height), pitch)
            }
        })
    }
}

/// Velocity-averaged intensity of one species on the reference grid.
///
/// Without a view the result has unit sum. With a view it is the matching
/// crop of that unit-sum map, normalised through the open area instead of a
/// full-grid sum, and is tagged `Raw`.
pub fn polychromatic_intensity(model: &InstrumentModel, species: &ParticleSpecies) -> Result<IntensityMap> {
    model.validate()?;
    let lambda = model.beam.mean_wavelength(species)?;
    check_fraunhofer(model.spec.diameter, lambda, model.geometry.grating_to_detector)?;
    let samples = wavelength_samples(&model.beam, species, model.wavelength_sample_count)?;
    let out = model.reference_grid()?;
    let lambda_ref = model.reference_wavelength()?;
    let mask = model.transmission()?;

    let field = match model.view {
        None => far_field_transmission(&mask, lambda, model.pad_factor)?,
        Some(_) => {
            let lambda_min = samples.iter().map(|s| s.wavelength).fold(f64::INFINITY, f64::min);
            let pitch = lambda / (mask.pixel_pitch * (mask.width().max(mask.height()) * model.pad_factor) as f64);
            let reach = out.center_y() as f64 * out.pitch * lambda / lambda_min;
            far_field_rows_transmission(&mask, lambda, model.pad_factor, (reach / pitch).ceil() as usize + 2)?
        }
    };
    let field = array_factor(&model.layout, lambda, &field)?;
    let base = intensity(&field, Normalization::Raw);
    let g_in = base.grid();
    // Σ|A|² over the whole transform; for a row window, the open area times
    // the tile count (cross terms between non-overlapping tiles vanish)
    let power = match model.view {
        None => base.total(),
        Some(_) => field.total_input_flux * f64::from(model.layout.tile_count()),
    };
    let mut values = Array2::<f64>::zeros((out.height, out.width));
    if power == 0.0 {
        log::warn!("species {} sees a fully blocked mask", species.name);
        return IntensityMap::new(values, out.pitch, Normalization::Raw);
    }

    if model.view.is_none() && samples.len() == 1 && lambda == lambda_ref {
        return Ok(base.normalized(Normalization::UnitSum));
    }
    for s in &samples {
        // output pixel ix samples the base map at this fractional index; the
        // squared stretch converts per-pixel power to the output pixel area
        let stretch = lambda_ref / s.wavelength;
        let xs = Resample::new(out.width, out.center_x(), stretch, g_in.center_x());
        let ys = Resample::new(out.height, out.center_y(), stretch, g_in.center_y());
        let scale = power / (s.weight * stretch * stretch);
        values
            .axis_iter_mut(Axis(0))
            .into_par_iter()
            .enumerate()
            .for_each(|(iy, mut row)| {
                for (ix, v) in row.iter_mut().enumerate() {
                    *v += resample_at(&base.values, &xs, &ys, ix, iy) / scale;
                }
            });
    }
    let map = IntensityMap::new(values, out.pitch, Normalization::Raw)?;
    Ok(match model.view {
        // restore the total lost where stretched samples leave the grid
        None => map.normalized(Normalization::UnitSum),
        Some(_) => map,
    })
}

/// Precomputed bilinear taps along one axis.
struct Resample {
    lo: Vec<i64>,
    t: Vec<f64>,
}

impl Resample {
    fn new(len: usize, out_center: usize, stretch: f64, in_center: usize) -> Self {
        let (mut lo, mut t) = (Vec::with_capacity(len), Vec::with_capacity(len));
        for i in 0..len {
            // offsets from the centre keep mirrored pixels' weights exactly mirrored
            let off = (i as f64 - out_center as f64) * stretch;
            let f0 = off.floor();
            lo.push(f0 as i64 + in_center as i64);
            t.push(off - f0);
        }
        Self { lo, t }
    }
}

fn resample_at(data: &Array2<f64>, xs: &Resample, ys: &Resample, ix: usize, iy: usize) -> f64 {
    let (h, w) = data.dim();
    let get = |x: i64, y: i64| {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            0.0
        } else {
            data[[y as usize, x as usize]]
        }
    };
    let (x0, tx) = (xs.lo[ix], xs.t[ix]);
    let (y0, ty) = (ys.lo[iy], ys.t[iy]);
    let mut acc = get(x0, y0) * ((1.0 - tx) * (1.0 - ty));
    if tx != 0.0 {
        acc += get(x0 + 1, y0) * (tx * (1.0 - ty));
    }
    if ty != 0.0 {
        acc += get(x0, y0 + 1) * ((1.0 - tx) * ty);
        if tx != 0.0 {
            acc += get(x0 + 1, y0 + 1) * (tx * ty);
        }
    }
    acc
}

/// Circular convolution of each row (or column) with a centred top-hat of
/// `width_px` pixels whose edge pixels receive fractional weight.
fn tophat_weights(width_px: f64) -> Vec<(i64, f64)> {
    let half = width_px / 2.0;
    let reach = (half + 0.5).ceil() as i64;
    let mut taps = Vec::new();
    for j in -reach..=reach {
        let lo = (j as f64 - 0.5).max(-half);
        let hi = (j as f64 + 0.5).min(half);
        if hi > lo {
            taps.push((j, (hi - lo) / width_px));
        }
    }
    taps
}

fn convolve_axis(values: &Array2<f64>, taps: &[(i64, f64)], axis: Axis) -> Array2<f64> {
    let mut out = Array2::zeros(values.dim());
    let len = values.len_of(axis) as i64;
    out.axis_iter_mut(if axis == Axis(1) { Axis(0) } else { Axis(1) })
        .into_par_iter()
        .zip(values.axis_iter(if axis == Axis(1) { Axis(0) } else { Axis(1) }))
        .for_each(|(mut o, line)| {
            for i in 0..len {
                let mut acc = 0.0;
                for &(j, w) in taps {
                    acc += w * line[(i - j).rem_euclid(len) as usize];
                }
                o[i as usize] = acc;
            }
        });
    out
}

/// Separable top-hat blur of full width `divergence_angle(geometry)`.
pub fn collimation_blur(map: &IntensityMap, geometry: &BeamlineGeometry) -> Result<IntensityMap> {
    let width = divergence_angle(geometry)?;
    blur_tophat(map, width)
}

/// [`collimation_blur`] with the kernel width given directly, rad.
pub fn blur_tophat(map: &IntensityMap, width: f64) -> Result<IntensityMap> {
    let width_px = width / map.angular_pitch;
    if width_px == 0.0 {
        return Ok(map.clone());
    }
    if !(width_px > 0.0) {
        return Err(domain("blur width must be non-negative"));
    }
    let (h, w) = map.values.dim();
    if width_px > w.min(h) as f64 {
        return Err(Error::KernelTooWide {
            kernel_px: width_px,
            map_px: w.min(h),
        });
    }
    let taps = tophat_weights(width_px);
    let rows = convolve_axis(&map.values, &taps, Axis(1));
    let values = convolve_axis(&rows, &taps, Axis(0));
    Ok(IntensityMap {
        values,
        angular_pitch: map.angular_pitch,
        normalization: map.normalization,
    })
}

fn check_same_grids(maps: &[&IntensityMap]) -> Result<()> {
    let g0 = maps[0].grid();
    for m in &maps[1..] {
        if !m.grid().same_as(&g0) {
            return Err(Error::GridMismatch(format!("{:?} vs {:?}", m.grid(), g0)));
        }
    }
    Ok(())
}

/// Incoherent mixture: each map is brought to unit sum, then weighted.
pub fn mixture_intensity(per_species: &[(IntensityMap, f64)]) -> Result<IntensityMap> {
    if per_species.is_empty() {
        return Err(domain("mixture needs at least one species"));
    }
    check_same_grids(&per_species.iter().map(|(m, _)| m).collect::<Vec<_>>())?;
    if per_species.iter().any(|(_, w)| !(*w >= 0.0) || !w.is_finite()) {
        return Err(domain("mixture weights must be finite and non-negative"));
    }
    let weight_sum: f64 = per_species.iter().map(|(_, w)| w).sum();
    if weight_sum <= 0.0 {
        return Err(domain("mixture weights sum to zero"));
    }
    if let [(map, _)] = per_species {
        return Ok(map.clone().normalized(Normalization::UnitSum));
    }
    let mut values = Array2::zeros(per_species[0].0.values.dim());
    for (map, w) in per_species {
        let total = map.total();
        if *w == 0.0 || total == 0.0 {
            continue;
        }
        let k = w / (weight_sum * total);
        values.zip_mut_with(&map.values, |o, v| *o += k * v);
    }
    Ok(IntensityMap {
        values,
        angular_pitch: per_species[0].0.angular_pitch,
        normalization: Normalization::UnitSum,
    }
    .normalized(Normalization::UnitSum))
}

/// Weighted sum of already normalised maps, without renormalising each one.
fn weighted_sum(per_species: &[(IntensityMap, f64)]) -> Result<IntensityMap> {
    check_same_grids(&per_species.iter().map(|(m, _)| m).collect::<Vec<_>>())?;
    let weight_sum: f64 = per_species.iter().map(|(_, w)| w).sum();
    let mut values = Array2::zeros(per_species[0].0.values.dim());
    for (map, w) in per_species {
        if *w > 0.0 {
            let k = w / weight_sum;
            values.zip_mut_with(&map.values, |o, v| *o += k * v);
        }
    }
    IntensityMap::new(values, per_species[0].0.angular_pitch, Normalization::Raw)
}

/// One species' blurred, velocity-averaged map and its mixture weight.
#[derive(Debug, Clone)]
pub struct SpeciesMap {
    pub species: ParticleSpecies,
    pub weight: f64,
    pub map: IntensityMap,
}

/// Per-species maps after chromatic averaging, array factor and collimation blur.
pub fn simulate_species(model: &InstrumentModel) -> Result<Vec<SpeciesMap>> {
    let divergence = divergence_angle(&model.geometry)?;
    let mut out = Vec::new();
    for (species, weight) in model.beam.normalized_composition() {
        if weight <= 0.0 {
            continue;
        }
        let poly = polychromatic_intensity(model, &species)?;
        let map = blur_tophat(&poly, divergence)?;
        out.push(SpeciesMap { species, weight, map });
    }
    if out.is_empty() {
        return Err(domain("beam composition has no species with positive weight"));
    }
    Ok(out)
}

/// The full forward model: per-species maps mixed by composition weight.
pub fn simulate(model: &InstrumentModel) -> Result<IntensityMap> {
    let parts: Vec<(IntensityMap, f64)> = simulate_species(model)?
        .into_iter()
        .map(|s| (s.map, s.weight))
        .collect();
    match model.view {
        None => mixture_intensity(&parts),
        Some(_) => weighted_sum(&parts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::{BeamModel, DetectionClass};
    use crate::diffraction::order_center;
    use crate::hologram::FringeAxis;
    use crate::units::*;
    use approx::assert_relative_eq;

    pub(crate) fn model(n: u32, fwhm: f64, species: Vec<(ParticleSpecies, f64)>) -> InstrumentModel {
        InstrumentModel {
            beam: BeamModel::new(1090.0, fwhm, species).unwrap(),
            geometry: BeamlineGeometry {
                valve_to_skimmer: 400.0 * MILLIMETER,
                skimmer_to_grating: 1400.0 * MILLIMETER,
                grating_to_detector: 1250.0 * MILLIMETER,
                skimmer_aperture: 150.0 * MICROMETER,
                grating_array_extent: 50.0 * MICROMETER,
            },
            layout: TileLayout::single(),
            spec: HologramSpec {
                period: 100.0 * NANOMETER,
                dislocations: n,
                diameter: 600.0 * NANOMETER,
                open_fraction: 0.5,
                fringe_axis: FringeAxis::X,
            },
            erosion_margin: 0.0,
            detector_pixel_angle: 30.0 * MICRORADIAN,
            wavelength_sample_count: 15,
            raster_pitch: 5.0 * NANOMETER,
            pad_factor: 8,
            view: None,
        }
    }

    fn atoms() -> Vec<(ParticleSpecies, f64)> {
        vec![(ParticleSpecies::helium_singlet(), 1.0)]
    }

    #[test]
    fn monochromatic_limit_is_exact() {
        let m = model(1, 0.0, atoms());
        let poly = polychromatic_intensity(&m, &ParticleSpecies::helium_singlet()).unwrap();
        let lambda = m.beam.mean_wavelength(&ParticleSpecies::helium_singlet()).unwrap();
        let mono = intensity(&far_field_transmission(&m.transmission().unwrap(), lambda, 8).unwrap(), Normalization::UnitSum);
        assert_eq!(poly, mono);
    }

    #[test]
    fn chromatic_average_preserves_total_and_symmetry() {
        let m = model(2, 0.03, atoms());
        let poly = polychromatic_intensity(&m, &ParticleSpecies::helium_singlet()).unwrap();
        assert_relative_eq!(poly.total(), 1.0, max_relative = 1e-6);
        let g = poly.grid();
        let (cx, cy) = (2 * g.center_x(), 2 * g.center_y());
        let scale = poly.max();
        // the unpaired Nyquist edge of an even grid has no mirror; stay clear of it
        let edge = g.width / 16;
        for iy in edge..g.height - edge {
            for ix in edge..g.width - edge {
                assert!((poly.values[[iy, ix]] - poly.values[[cy - iy, cx - ix]]).abs() < 1e-10 * scale);
            }
        }
    }

    /// FWHM of a 1-D profile by linear interpolation of the half-maximum crossings.
    fn fwhm(profile: &[f64], pitch: f64) -> f64 {
        let (imax, &peak) = profile
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let half = peak / 2.0;
        let mut r = imax;
        while profile[r] > half {
            r += 1;
        }
        let mut l = imax;
        while profile[l] > half {
            l -= 1;
        }
        let right = r as f64 - (half - profile[r]) / (profile[r - 1] - profile[r]);
        let left = l as f64 + (half - profile[l]) / (profile[l + 1] - profile[l]);
        (right - left) * pitch
    }

    #[test]
    fn velocity_spread_broadens_high_orders_only() {
        // a wide straight grating gives narrow orders; compare radial widths
        let mut mono = model(0, 0.0, atoms());
        mono.spec.diameter = 2.4 * MICROMETER;
        mono.raster_pitch = 5.0 * NANOMETER;
        mono.pad_factor = 2;
        mono.wavelength_sample_count = 41;
        let mut spread = mono.clone();
        spread.beam.fractional_fwhm = 0.03;
        let s = ParticleSpecies::helium_singlet();
        let a = polychromatic_intensity(&mono, &s).unwrap();
        let b = polychromatic_intensity(&spread, &s).unwrap();
        let g = a.grid();
        let lambda = mono.beam.mean_wavelength(&s).unwrap();
        let row = |m: &IntensityMap, order: i32| -> Vec<f64> {
            let c = g.index_x(order_center(order, lambda, 100e-9)).round() as usize;
            (c - 12..=c + 12).map(|ix| m.values[[g.center_y(), ix]]).collect()
        };
        let w0 = (fwhm(&row(&a, 0), g.pitch), fwhm(&row(&b, 0), g.pitch));
        assert_relative_eq!(w0.0, w0.1, max_relative = 1e-3);
        let m = 3;
        let (wa, wb) = (fwhm(&row(&a, m), g.pitch), fwhm(&row(&b, m), g.pitch));
        // Gaussian line broadening m·0.03·θ1 added in quadrature to the intrinsic width
        let extra = f64::from(m) * 0.03 * order_center(1, lambda, 100e-9);
        let predicted = (wa * wa + extra * extra).sqrt();
        assert!(wb > wa * 1.05, "{wa} {wb}");
        assert_relative_eq!(wb, predicted, max_relative = 0.15);
    }

    #[test]
    fn blur_properties() {
        let mut values = Array2::zeros((41, 41));
        values[[20, 20]] = 1.0;
        let map = IntensityMap::new(values, 1e-6, Normalization::Raw).unwrap();
        let same = blur_tophat(&map, 0.0).unwrap();
        assert_eq!(same, map);
        let b = blur_tophat(&map, 5e-6).unwrap();
        assert_relative_eq!(b.total(), 1.0, max_relative = 1e-12);
        for iy in 0..41 {
            for ix in 0..41 {
                let inside = (iy as i64 - 20).abs() <= 2 && (ix as i64 - 20).abs() <= 2;
                let want = if inside { 1.0 / 25.0 } else { 0.0 };
                assert_relative_eq!(b.values[[iy, ix]], want, epsilon = 1e-15);
            }
        }
        assert!(matches!(blur_tophat(&map, 50e-6), Err(Error::KernelTooWide { .. })));
    }

    #[test]
    fn collimation_washes_out_array_fringes() {
        let pitch = 1.0 * MICRORADIAN;
        let period = 75.0 * MICRORADIAN;
        let values = Array2::from_shape_fn((8, 600), |(_, ix)| 1.0 + (std::f64::consts::TAU * ix as f64 * pitch / period).cos());
        let map = IntensityMap::new(values, pitch, Normalization::Raw).unwrap();
        let g = BeamlineGeometry {
            valve_to_skimmer: 0.4,
            skimmer_to_grating: 1.4,
            grating_to_detector: 1.25,
            skimmer_aperture: 150e-6,
            grating_array_extent: 50e-6,
        };
        let b = collimation_blur(&map, &g);
        // 8 rows are narrower than the kernel
        assert!(b.is_err());
        let values = Array2::from_shape_fn((600, 600), |(_, ix)| 1.0 + (std::f64::consts::TAU * ix as f64 * pitch / period).cos());
        let map = IntensityMap::new(values, pitch, Normalization::Raw).unwrap();
        let b = collimation_blur(&map, &g).unwrap();
        let row = b.values.row(300);
        let (lo, hi) = row.iter().fold((f64::MAX, f64::MIN), |(a, c), &v| (a.min(v), c.max(v)));
        let contrast = (hi - lo) / (hi + lo);
        let x = std::f64::consts::PI * divergence_angle(&g).unwrap() / period;
        assert!(contrast < 0.05, "{contrast}");
        assert_relative_eq!(contrast, (x.sin() / x).abs(), max_relative = 0.05);
    }

    #[test]
    fn mixture_rules() {
        let m = model(1, 0.0, atoms());
        let a = polychromatic_intensity(&m, &ParticleSpecies::helium_singlet()).unwrap();
        let one = mixture_intensity(&[(a.clone(), 1.0)]).unwrap();
        for (x, y) in one.values.iter().zip(a.values.iter()) {
            assert_relative_eq!(x, y, max_relative = 1e-12);
        }
        let mut b = a.clone();
        b.values.mapv_inplace(|v| v * 3.0);
        let with_zero = mixture_intensity(&[(a.clone(), 1.0), (b, 0.0)]).unwrap();
        for (x, y) in with_zero.values.iter().zip(a.values.iter()) {
            assert_relative_eq!(x, y, max_relative = 1e-12);
        }
        let coarse = IntensityMap::new(Array2::zeros((5, 5)), 1.0, Normalization::Raw).unwrap();
        assert!(matches!(
            mixture_intensity(&[(a, 1.0), (coarse, 1.0)]),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn dimer_orders_sit_at_half_angle() {
        let species = vec![
            (ParticleSpecies::helium_singlet(), 1.0),
            (ParticleSpecies::helium_dimer(), 1.0),
        ];
        let m = model(0, 0.0, species);
        let map = simulate(&InstrumentModel {
            geometry: BeamlineGeometry {
                skimmer_aperture: 1e-9,
                grating_array_extent: 1e-9,
                ..m.geometry
            },
            ..m.clone()
        })
        .unwrap();
        let g = map.grid();
        let atom = m.beam.mean_wavelength(&ParticleSpecies::helium_singlet()).unwrap();
        let dimer = m.beam.mean_wavelength(&ParticleSpecies::helium_dimer()).unwrap();
        assert_relative_eq!(dimer, atom / 2.0, max_relative = 1e-12);
        let peak_near = |theta: f64| {
            let c = g.index_x(theta).round() as usize;
            let best = (c - 3..=c + 3)
                .max_by(|&a, &b| map.values[[g.center_y(), a]].total_cmp(&map.values[[g.center_y(), b]]))
                .unwrap();
            g.angle_x(best)
        };
        let a1 = peak_near(order_center(1, atom, 100e-9));
        let d1 = peak_near(order_center(1, dimer, 100e-9));
        assert!((d1 - a1 / 2.0).abs() <= g.pitch, "{d1} {a1}");
    }

    #[test]
    fn view_matches_full_map_crop() {
        let mut full = model(1, 0.03, atoms());
        full.layout = TileLayout {
            pitch_x: 1.2 * MICROMETER,
            pitch_y: 1.2 * MICROMETER,
            count_x: 2,
            count_y: 2,
        };
        let mut windowed = full.clone();
        windowed.view = Some(View {
            half_width: 2.0e-3,
            half_height: 0.2e-3,
        });
        let s = ParticleSpecies::helium_singlet();
        let a = polychromatic_intensity(&full, &s).unwrap();
        let b = polychromatic_intensity(&windowed, &s).unwrap();
        let (ga, gb) = (a.grid(), b.grid());
        assert_eq!(gb.width % 2, 1);
        let at_a = |ix: usize, iy: usize| a.values[[ga.center_y() + iy - gb.center_y(), ga.center_x() + ix - gb.center_x()]];
        // the crop is not renormalised, so it differs by the tail fraction that
        // stretched samples carry off the full grid
        let ratio = b.values[[gb.center_y(), gb.center_x()]] / at_a(gb.center_x(), gb.center_y());
        assert!((ratio - 1.0).abs() < 5e-3, "{ratio}");
        for iy in 0..gb.height {
            for ix in 0..gb.width {
                let d = (at_a(ix, iy) * ratio - b.values[[iy, ix]]).abs();
                assert!(d < 1e-9 * a.max(), "({ix},{iy}) off by {d}");
            }
        }
        let _ = DetectionClass::SingletAtom;
    }
}
