//! Experiment configuration: a TOML file whose dimensional values all carry
//! explicit unit suffixes.

use serde::{Deserialize, Serialize};
use vortex_core::analysis::{FitModel, Parameter, Weighting};
use vortex_core::instrument::View;
use vortex_core::units::{format_quantity, parse_quantity, Dimension};
use vortex_core::{
    BeamModel, BeamlineGeometry, DeflectionModel, DetectionClass, FringeAxis, HologramSpec, InstrumentModel,
    ParticleSpecies, TileLayout,
};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    beam: RawBeam,
    geometry: RawGeometry,
    hologram: RawHologram,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    layout: Option<RawLayout>,
    instrument: RawInstrument,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    deflection: Option<RawDeflection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    analysis: Option<RawAnalysis>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBeam {
    mean_speed: String,
    fractional_fwhm: f64,
    species: Vec<RawSpecies>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpecies {
    name: String,
    mass: String,
    class: String,
    weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    valve_to_skimmer: String,
    skimmer_to_grating: String,
    grating_to_detector: String,
    skimmer_aperture: String,
    grating_array_extent: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHologram {
    period: String,
    dislocations: u32,
    diameter: String,
    open_fraction: f64,
    #[serde(default = "default_axis")]
    fringe_axis: String,
}

fn default_axis() -> String {
    "x".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayout {
    pitch_x: String,
    pitch_y: String,
    count_x: u32,
    count_y: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstrument {
    erosion_margin: String,
    detector_pixel: String,
    wavelength_samples: usize,
    raster_pitch: String,
    pad_factor: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    view_half_width: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    view_half_height: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDeflection {
    mean_kick: String,
    kick_spread: String,
    #[serde(default = "default_deflected")]
    affected_class: String,
}

fn default_deflected() -> String {
    DetectionClass::TripletAtom.tag().into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    center_y: String,
    box_width: String,
    box_height: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cut_half_range: Option<String>,
    weighting: String,
    open_width: RawLengthParam,
    fractional_fwhm: RawRatioParam,
    fit_species_weights: bool,
    baseline_fraction_max: f64,
    restarts: usize,
    max_iterations: usize,
    tolerance: f64,
    seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLengthParam {
    value: String,
    lower: String,
    upper: String,
    free: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRatioParam {
    value: f64,
    lower: f64,
    upper: f64,
    free: bool,
}

/// Line-cut geometry and fit settings.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisSettings {
    pub center_y: f64,
    pub box_width: f64,
    pub box_height: f64,
    /// keep only boxes with |position| ≤ this
    pub cut_half_range: Option<f64>,
    pub weighting: Weighting,
    pub open_width: Parameter,
    pub fractional_fwhm: Parameter,
    pub fit_species_weights: bool,
    pub baseline_fraction_max: f64,
    pub restarts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub instrument: InstrumentModel,
    pub deflection: Option<DeflectionModel>,
    pub analysis: Option<AnalysisSettings>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::User(format!("config: {e}")))?;
        let cx = Cx { text };
        let cfg = raw.resolve(&cx)?;
        cfg.instrument
            .validate()
            .map_err(|e| CliError::User(format!("config: {e}")))?;
        if let Some(a) = &cfg.analysis {
            cfg.fit_model_from(a)
                .map_err(|e| CliError::User(format!("config [analysis]: {e}")))?;
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&RawConfig::from(self)).expect("config serializes")
    }

    /// Fit model seeded from the `[analysis]` section.
    pub fn fit_model(&self) -> Result<FitModel, CliError> {
        let a = self
            .analysis
            .as_ref()
            .ok_or_else(|| CliError::User("config has no [analysis] section".into()))?;
        self.fit_model_from(a)
            .map_err(|e| CliError::User(format!("config [analysis]: {e}")))
    }

    fn fit_model_from(&self, a: &AnalysisSettings) -> Result<FitModel, String> {
        let check = |p: &Parameter, name: &str| {
            if p.lower <= p.value && p.value <= p.upper {
                Ok(())
            } else {
                Err(format!("{name} start value lies outside its bounds"))
            }
        };
        check(&a.open_width, "open_width")?;
        check(&a.fractional_fwhm, "fractional_fwhm")?;
        let mut m = FitModel::for_template(&self.instrument);
        m.open_width = a.open_width;
        m.fractional_fwhm = a.fractional_fwhm;
        for p in &mut m.species_weights {
            p.free = a.fit_species_weights;
        }
        m.baseline_fraction_max = a.baseline_fraction_max;
        m.weighting = a.weighting;
        m.restarts = a.restarts;
        m.max_iterations = a.max_iterations;
        m.tolerance = a.tolerance;
        m.seed = a.seed;
        Ok(m)
    }
}

/// Locates keys in the source text for diagnostics.
struct Cx<'a> {
    text: &'a str,
}

impl Cx<'_> {
    /// Line of `key` inside the `nth` occurrence of `[section]` or `[[section]]`.
    fn line_of(&self, section: &str, nth: usize, key: &str) -> Option<usize> {
        let mut seen = 0;
        let mut inside = false;
        for (i, line) in self.text.lines().enumerate() {
            let t = line.trim();
            if t.starts_with('[') {
                inside = false;
                if t.trim_matches(|c| c == '[' || c == ']').trim() == section {
                    inside = seen == nth;
                    seen += 1;
                }
                continue;
            }
            if inside {
                if let Some((k, _)) = t.split_once('=') {
                    if k.trim() == key {
                        return Some(i + 1);
                    }
                }
            }
        }
        None
    }

    fn quantity(&self, section: &str, key: &str, text: &str, dim: Dimension) -> Result<f64, CliError> {
        self.nth_quantity(section, 0, key, text, dim)
    }

    fn nth_quantity(&self, section: &str, nth: usize, key: &str, text: &str, dim: Dimension) -> Result<f64, CliError> {
        parse_quantity(text, dim).map_err(|e| self.nth_error(section, nth, key, &e.to_string()))
    }

    fn error(&self, section: &str, key: &str, why: &str) -> CliError {
        self.nth_error(section, 0, key, why)
    }

    fn nth_error(&self, section: &str, nth: usize, key: &str, why: &str) -> CliError {
        let at = match self.line_of(section, nth, key) {
            Some(l) => format!("line {l}, "),
            None => String::new(),
        };
        CliError::User(format!("config {at}[{section}] {key}: {why}"))
    }
}

impl RawConfig {
    fn resolve(&self, cx: &Cx) -> Result<ExperimentConfig, CliError> {
        use Dimension::*;
        let b = &self.beam;
        let mut composition = Vec::new();
        for (k, s) in b.species.iter().enumerate() {
            let mass = cx.nth_quantity("beam.species", k, "mass", &s.mass, Mass)?;
            let class = DetectionClass::from_tag(&s.class).ok_or_else(|| {
                cx.nth_error(
                    "beam.species",
                    k,
                    "class",
                    &format!("unknown class '{}' (singlet_atom, triplet_atom or dimer)", s.class),
                )
            })?;
            let species = ParticleSpecies::new(s.name.clone(), mass, class)
                .map_err(|e| cx.nth_error("beam.species", k, "mass", &e.to_string()))?;
            composition.push((species, s.weight));
        }
        let beam = BeamModel {
            mean_speed: cx.quantity("beam", "mean_speed", &b.mean_speed, Speed)?,
            fractional_fwhm: b.fractional_fwhm,
            composition,
        };

        let g = &self.geometry;
        let geometry = BeamlineGeometry {
            valve_to_skimmer: cx.quantity("geometry", "valve_to_skimmer", &g.valve_to_skimmer, Length)?,
            skimmer_to_grating: cx.quantity("geometry", "skimmer_to_grating", &g.skimmer_to_grating, Length)?,
            grating_to_detector: cx.quantity("geometry", "grating_to_detector", &g.grating_to_detector, Length)?,
            skimmer_aperture: cx.quantity("geometry", "skimmer_aperture", &g.skimmer_aperture, Length)?,
            grating_array_extent: cx.quantity("geometry", "grating_array_extent", &g.grating_array_extent, Length)?,
        };

        let h = &self.hologram;
        let fringe_axis = match h.fringe_axis.as_str() {
            "x" => FringeAxis::X,
            "y" => FringeAxis::Y,
            other => return Err(cx.error("hologram", "fringe_axis", &format!("expected \"x\" or \"y\", got '{other}'"))),
        };
        let spec = HologramSpec {
            period: cx.quantity("hologram", "period", &h.period, Length)?,
            dislocations: h.dislocations,
            diameter: cx.quantity("hologram", "diameter", &h.diameter, Length)?,
            open_fraction: h.open_fraction,
            fringe_axis,
        };

        let layout = match &self.layout {
            None => TileLayout::single(),
            Some(l) => TileLayout {
                pitch_x: cx.quantity("layout", "pitch_x", &l.pitch_x, Length)?,
                pitch_y: cx.quantity("layout", "pitch_y", &l.pitch_y, Length)?,
                count_x: l.count_x,
                count_y: l.count_y,
            },
        };

        let i = &self.instrument;
        let view = match (&i.view_half_width, &i.view_half_height) {
            (None, None) => None,
            (Some(w), Some(h)) => Some(View {
                half_width: cx.quantity("instrument", "view_half_width", w, Angle)?,
                half_height: cx.quantity("instrument", "view_half_height", h, Angle)?,
            }),
            (Some(_), None) => return Err(cx.error("instrument", "view_half_width", "view_half_height is missing")),
            (None, Some(_)) => return Err(cx.error("instrument", "view_half_height", "view_half_width is missing")),
        };
        let instrument = InstrumentModel {
            beam,
            geometry,
            layout,
            spec,
            erosion_margin: cx.quantity("instrument", "erosion_margin", &i.erosion_margin, Length)?,
            detector_pixel_angle: cx.quantity("instrument", "detector_pixel", &i.detector_pixel, Angle)?,
            wavelength_sample_count: i.wavelength_samples,
            raster_pitch: cx.quantity("instrument", "raster_pitch", &i.raster_pitch, Length)?,
            pad_factor: i.pad_factor,
            view,
        };

        let deflection = match &self.deflection {
            None => None,
            Some(d) => Some(DeflectionModel {
                mean_kick: cx.quantity("deflection", "mean_kick", &d.mean_kick, Angle)?,
                kick_spread: cx.quantity("deflection", "kick_spread", &d.kick_spread, Angle)?,
                affected_class: DetectionClass::from_tag(&d.affected_class).ok_or_else(|| {
                    cx.error("deflection", "affected_class", &format!("unknown class '{}'", d.affected_class))
                })?,
            }),
        };

        let analysis = match &self.analysis {
            None => None,
            Some(a) => {
                let w = &a.open_width;
                let f = &a.fractional_fwhm;
                Some(AnalysisSettings {
                    center_y: cx.quantity("analysis", "center_y", &a.center_y, Angle)?,
                    box_width: cx.quantity("analysis", "box_width", &a.box_width, Angle)?,
                    box_height: cx.quantity("analysis", "box_height", &a.box_height, Angle)?,
                    cut_half_range: match &a.cut_half_range {
                        None => None,
                        Some(r) => Some(cx.quantity("analysis", "cut_half_range", r, Angle)?),
                    },
                    weighting: Weighting::from_tag(&a.weighting).ok_or_else(|| {
                        cx.error("analysis", "weighting", &format!("expected \"uniform\" or \"poisson\", got '{}'", a.weighting))
                    })?,
                    open_width: Parameter {
                        value: cx.quantity("analysis.open_width", "value", &w.value, Length)?,
                        lower: cx.quantity("analysis.open_width", "lower", &w.lower, Length)?,
                        upper: cx.quantity("analysis.open_width", "upper", &w.upper, Length)?,
                        free: w.free,
                    },
                    fractional_fwhm: Parameter {
                        value: f.value,
                        lower: f.lower,
                        upper: f.upper,
                        free: f.free,
                    },
                    fit_species_weights: a.fit_species_weights,
                    baseline_fraction_max: a.baseline_fraction_max,
                    restarts: a.restarts,
                    max_iterations: a.max_iterations,
                    tolerance: a.tolerance,
                    seed: a.seed,
                })
            }
        };

        Ok(ExperimentConfig {
            instrument,
            deflection,
            analysis,
        })
    }
}

impl From<&ExperimentConfig> for RawConfig {
    fn from(c: &ExperimentConfig) -> Self {
        use Dimension::*;
        let q = format_quantity;
        let m = &c.instrument;
        let g = &m.geometry;
        RawConfig {
            beam: RawBeam {
                mean_speed: q(m.beam.mean_speed, Speed),
                fractional_fwhm: m.beam.fractional_fwhm,
                species: m
                    .beam
                    .composition
                    .iter()
                    .map(|(s, w)| RawSpecies {
                        name: s.name.clone(),
                        mass: q(s.mass, Mass),
                        class: s.detection_class.tag().into(),
                        weight: *w,
                    })
                    .collect(),
            },
            geometry: RawGeometry {
                valve_to_skimmer: q(g.valve_to_skimmer, Length),
                skimmer_to_grating: q(g.skimmer_to_grating, Length),
                grating_to_detector: q(g.grating_to_detector, Length),
                skimmer_aperture: q(g.skimmer_aperture, Length),
                grating_array_extent: q(g.grating_array_extent, Length),
            },
            hologram: RawHologram {
                period: q(m.spec.period, Length),
                dislocations: m.spec.dislocations,
                diameter: q(m.spec.diameter, Length),
                open_fraction: m.spec.open_fraction,
                fringe_axis: m.spec.fringe_axis.as_str().into(),
            },
            layout: Some(RawLayout {
                pitch_x: q(m.layout.pitch_x, Length),
                pitch_y: q(m.layout.pitch_y, Length),
                count_x: m.layout.count_x,
                count_y: m.layout.count_y,
            }),
            instrument: RawInstrument {
                erosion_margin: q(m.erosion_margin, Length),
                detector_pixel: q(m.detector_pixel_angle, Angle),
                wavelength_samples: m.wavelength_sample_count,
                raster_pitch: q(m.raster_pitch, Length),
                pad_factor: m.pad_factor,
                view_half_width: m.view.map(|v| q(v.half_width, Angle)),
                view_half_height: m.view.map(|v| q(v.half_height, Angle)),
            },
            deflection: c.deflection.map(|d| RawDeflection {
                mean_kick: q(d.mean_kick, Angle),
                kick_spread: q(d.kick_spread, Angle),
                affected_class: d.affected_class.tag().into(),
            }),
            analysis: c.analysis.as_ref().map(|a| RawAnalysis {
                center_y: q(a.center_y, Angle),
                box_width: q(a.box_width, Angle),
                box_height: q(a.box_height, Angle),
                cut_half_range: a.cut_half_range.map(|r| q(r, Angle)),
                weighting: a.weighting.as_str().into(),
                open_width: RawLengthParam {
                    value: q(a.open_width.value, Length),
                    lower: q(a.open_width.lower, Length),
                    upper: q(a.open_width.upper, Length),
                    free: a.open_width.free,
                },
                fractional_fwhm: RawRatioParam {
                    value: a.fractional_fwhm.value,
                    lower: a.fractional_fwhm.lower,
                    upper: a.fractional_fwhm.upper,
                    free: a.fractional_fwhm.free,
                },
                fit_species_weights: a.fit_species_weights,
                baseline_fraction_max: a.baseline_fraction_max,
                restarts: a.restarts,
                max_iterations: a.max_iterations,
                tolerance: a.tolerance,
                seed: a.seed,
            }),
        }
    }
}
