//! Supersonic beam source: species, velocity distribution and collimation.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{domain, Result};
use crate::units::{FWHM_PER_SIGMA, HELIUM4_MASS, PLANCK};

/// How a particle shows up on the detector and which lasers it responds to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetectionClass {
    SingletAtom,
    TripletAtom,
    Dimer,
}

impl DetectionClass {
    pub const ALL: [DetectionClass; 3] = [
        DetectionClass::SingletAtom,
        DetectionClass::TripletAtom,
        DetectionClass::Dimer,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            DetectionClass::SingletAtom => "singlet_atom",
            DetectionClass::TripletAtom => "triplet_atom",
            DetectionClass::Dimer => "dimer",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.tag() == tag)
    }
}

impl std::fmt::Display for DetectionClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSpecies {
    pub name: String,
    /// kg
    pub mass: f64,
    pub detection_class: DetectionClass,
}

impl ParticleSpecies {
    pub fn new(name: impl Into<String>, mass: f64, detection_class: DetectionClass) -> Result<Self> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(domain(format!("species mass must be positive, got {mass}")));
        }
        Ok(Self {
            name: name.into(),
            mass,
            detection_class,
        })
    }

    /// He* in the 2¹S state.
    pub fn helium_singlet() -> Self {
        Self {
            name: "He*(2^1S)".into(),
            mass: HELIUM4_MASS,
            detection_class: DetectionClass::SingletAtom,
        }
    }

    /// He* in the 2³S state.
    pub fn helium_triplet() -> Self {
        Self {
            name: "He*(2^3S)".into(),
            mass: HELIUM4_MASS,
            detection_class: DetectionClass::TripletAtom,
        }
    }

    /// Metastable He₂*.
    pub fn helium_dimer() -> Self {
        Self {
            name: "He2*".into(),
            mass: 2.0 * HELIUM4_MASS,
            detection_class: DetectionClass::Dimer,
        }
    }
}

/// Longitudinal beam description.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamModel {
    /// m/s
    pub mean_speed: f64,
    /// speed FWHM divided by the mean speed
    pub fractional_fwhm: f64,
    pub composition: Vec<(ParticleSpecies, f64)>,
}

impl BeamModel {
    pub fn new(
        mean_speed: f64,
        fractional_fwhm: f64,
        composition: Vec<(ParticleSpecies, f64)>,
    ) -> Result<Self> {
        let beam = Self {
            mean_speed,
            fractional_fwhm,
            composition,
        };
        beam.validate()?;
        Ok(beam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_speed > 0.0 && self.mean_speed.is_finite()) {
            return Err(domain(format!("mean speed must be positive, got {}", self.mean_speed)));
        }
        if !(0.0..1.0).contains(&self.fractional_fwhm) {
            return Err(domain(format!(
                "fractional FWHM must lie in [0, 1), got {}",
                self.fractional_fwhm
            )));
        }
        if self.composition.is_empty() {
            return Err(domain("beam composition is empty"));
        }
        if self.composition.iter().any(|(_, w)| !(*w >= 0.0 && w.is_finite())) {
            return Err(domain("composition weights must be finite and non-negative"));
        }
        if self.total_weight() <= 0.0 {
            return Err(domain("composition weights sum to zero"));
        }
        Ok(())
    }

    fn total_weight(&self) -> f64 {
        self.composition.iter().map(|(_, w)| w).sum()
    }

    /// Composition with weights rescaled to sum to one.
    pub fn normalized_composition(&self) -> Vec<(ParticleSpecies, f64)> {
        let total = self.total_weight();
        self.composition
            .iter()
            .map(|(s, w)| (s.clone(), w / total))
            .collect()
    }

    /// de Broglie wavelength of `species` at the mean speed.
    pub fn mean_wavelength(&self, species: &ParticleSpecies) -> Result<f64> {
        de_broglie_wavelength(species.mass, self.mean_speed)
    }

    pub fn speed_sigma(&self) -> f64 {
        self.fractional_fwhm * self.mean_speed / FWHM_PER_SIGMA
    }
}

/// Distances and apertures along the beamline, all in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamlineGeometry {
    pub valve_to_skimmer: f64,
    pub skimmer_to_grating: f64,
    pub grating_to_detector: f64,
    pub skimmer_aperture: f64,
    pub grating_array_extent: f64,
}

impl BeamlineGeometry {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("valve_to_skimmer", self.valve_to_skimmer),
            ("skimmer_to_grating", self.skimmer_to_grating),
            ("grating_to_detector", self.grating_to_detector),
            ("skimmer_aperture", self.skimmer_aperture),
            ("grating_array_extent", self.grating_array_extent),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// λ = h / (m·v).
pub fn de_broglie_wavelength(mass: f64, speed: f64) -> Result<f64> {
    if !(mass > 0.0 && speed > 0.0) || !mass.is_finite() || !speed.is_finite() {
        return Err(domain(format!(
            "de Broglie wavelength needs positive mass and speed, got m={mass}, v={speed}"
        )));
    }
    Ok(PLANCK / (mass * speed))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavelengthSample {
    pub wavelength: f64,
    pub weight: f64,
}

/// Equal-weight quantile samples of the Gaussian speed distribution, mapped to
/// wavelengths. Speeds sit at the midpoints `(k + 1/2)/count` of the normal
/// CDF, so the set is symmetric and its mean speed is the beam mean.
pub fn wavelength_samples(
    beam: &BeamModel,
    species: &ParticleSpecies,
    count: usize,
) -> Result<Vec<WavelengthSample>> {
    if count == 0 {
        return Err(domain("wavelength sample count must be at least 1"));
    }
    let sigma = beam.speed_sigma();
    if count == 1 || sigma == 0.0 {
        return Ok(vec![WavelengthSample {
            wavelength: beam.mean_wavelength(species)?,
            weight: 1.0,
        }]);
    }
    let unit = Normal::standard();
    let weight = 1.0 / count as f64;
    (0..count)
        .map(|k| {
            let z = unit.inverse_cdf((k as f64 + 0.5) / count as f64);
            let speed = beam.mean_speed + sigma * z;
            Ok(WavelengthSample {
                wavelength: de_broglie_wavelength(species.mass, speed)?,
                weight,
            })
        })
        .collect()
}

/// Full divergence angle admitted by the skimmer and the grating array.
pub fn divergence_angle(geometry: &BeamlineGeometry) -> Result<f64> {
    if !(geometry.skimmer_to_grating > 0.0) {
        return Err(domain("skimmer-to-grating distance must be positive"));
    }
    if geometry.skimmer_aperture < 0.0 || geometry.grating_array_extent < 0.0 {
        return Err(domain("apertures cannot be negative"));
    }
    Ok((geometry.skimmer_aperture + geometry.grating_array_extent) / geometry.skimmer_to_grating)
}

pub fn transverse_coherence_length(wavelength: f64, divergence: f64) -> Result<f64> {
    if !(divergence > 0.0) {
        return Err(domain("divergence must be positive for a finite coherence length"));
    }
    if !(wavelength > 0.0) {
        return Err(domain("wavelength must be positive"));
    }
    Ok(wavelength / divergence)
}
