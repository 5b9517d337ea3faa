use thiserror::Error;

/// Errors produced by the simulation and analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("raster pitch {pitch_nm} nm is too coarse for period {period_nm} nm (need pitch <= period/20)")]
    Resolution { pitch_nm: f64, period_nm: f64 },

    #[error("transform of {width}x{height} exceeds the maximum supported size {max}")]
    TransformTooLarge { width: usize, height: usize, max: usize },

    #[error("Fresnel number {fresnel:.3} is not small; the far-field model does not apply")]
    FresnelRegime { fresnel: f64 },

    #[error("angular grids do not match: {0}")]
    GridMismatch(String),

    #[error("collimation kernel ({kernel_px:.2} px) is wider than the map ({map_px} px)")]
    KernelTooWide { kernel_px: f64, map_px: usize },

    #[error("phase winding unreliable: amplitude {amplitude:.3e} on the circle is below the floor {floor:.3e}")]
    UnreliableWinding { amplitude: f64, floor: f64 },

    #[error("cannot sample from a distribution with zero total weight")]
    EmptyDistribution,

    #[error("region {0} lies outside the image")]
    OutOfBounds(String),

    #[error("residual became non-finite at parameters {0:?}")]
    NonFiniteResidual(Vec<f64>),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
