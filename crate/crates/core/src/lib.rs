//! Matter-wave vortex beams: fork-hologram design, far-field diffraction of
//! de Broglie waves, an instrument model with detection events, and line-cut
//! fitting against that model.

pub mod analysis;
pub mod beam;
pub mod diffraction;
pub mod error;
pub mod grid;
pub mod hologram;
pub mod instrument;
pub mod io;
pub mod rng;
pub mod units;

pub use analysis::{FitModel, FitResult, LineCut, Parameter, Weighting};
pub use beam::{BeamModel, BeamlineGeometry, DetectionClass, ParticleSpecies};
pub use diffraction::{FarField, IntensityMap, Normalization};
pub use error::{Error, Result};
pub use grid::{AngularGrid, PixelGrid};
pub use hologram::{FringeAxis, HologramSpec, RasterMask, TileLayout};
pub use instrument::{DeflectionModel, DetectorImage, Event, EventList, InstrumentModel, View};
