//! Shared fixtures for the benchmarks.

use vortex_core::instrument::View;
use vortex_core::units::{MICRORADIAN, MICROMETER, MILLIMETER, MILLIRADIAN, NANOMETER};
use vortex_core::{BeamModel, BeamlineGeometry, FringeAxis, HologramSpec, InstrumentModel, ParticleSpecies, TileLayout};

pub fn fork(dislocations: u32, diameter: f64) -> HologramSpec {
    HologramSpec {
        period: 100.0 * NANOMETER,
        dislocations,
        diameter,
        open_fraction: 0.55,
        fringe_axis: FringeAxis::X,
    }
}

/// The 600 nm single-edge setup with atoms and dimers.
pub fn instrument(raster_pitch: f64, pad_factor: usize, view: Option<View>) -> InstrumentModel {
    InstrumentModel {
        beam: BeamModel::new(
            1090.0,
            0.03,
            vec![(ParticleSpecies::helium_singlet(), 0.9), (ParticleSpecies::helium_dimer(), 0.1)],
        )
        .expect("valid beam"),
        geometry: BeamlineGeometry {
            valve_to_skimmer: 400.0 * MILLIMETER,
            skimmer_to_grating: 1400.0 * MILLIMETER,
            grating_to_detector: 1250.0 * MILLIMETER,
            skimmer_aperture: 150.0 * MICROMETER,
            grating_array_extent: 50.0 * MICROMETER,
        },
        layout: TileLayout::single(),
        spec: fork(1, 600.0 * NANOMETER),
        erosion_margin: 7.5 * NANOMETER,
        detector_pixel_angle: 30.0 * MICRORADIAN,
        wavelength_sample_count: 15,
        raster_pitch,
        pad_factor,
        view,
    }
}

/// Window used by line-cut fits.
pub fn fit_view() -> View {
    View {
        half_width: 2.5 * MILLIRADIAN,
        half_height: 0.3 * MILLIRADIAN,
    }
}
