use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use vortex_core::analysis::{extract_line_cut, fit_profile, LineCut};
use vortex_core::beam::{de_broglie_wavelength, divergence_angle, transverse_coherence_length};
use vortex_core::diffraction::{fresnel_number, order_center};
use vortex_core::hologram::{blocked_islands, export_mask, rasterize, MaskFormat};
use vortex_core::instrument::{accumulate, apply_deflection, sample_mixture, simulate, simulate_species};
use vortex_core::io::{
    read_detector_image, read_intensity_map, read_line_cut, write_detector_image, write_events,
    write_fit_report, write_intensity_map,
};
use vortex_core::rng::ALGORITHM_ID;
use vortex_core::units::{MICRORADIAN, MILLIRADIAN, NANOMETER, PICOMETER};
use vortex_core::RasterMask;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::plot::{write_pgm, Scale};

/// A config file as loaded: its bytes' hash plus the parsed content.
pub struct Loaded {
    pub config: ExperimentConfig,
    pub sha256: String,
}

pub fn load(path: &Path) -> Result<Loaded, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::User(format!("{}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::User(format!("{}: not UTF-8 text", path.display())))?;
    let config = ExperimentConfig::parse(&text).map_err(|e| match e {
        CliError::User(m) => CliError::User(format!("{}: {m}", path.display())),
        other => other,
    })?;
    Ok(Loaded {
        config,
        sha256: sha256_hex(&bytes),
    })
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Copy)]
pub struct PlotOptions {
    pub scale: Scale,
    pub saturate: Option<f64>,
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| CliError::User(format!("{}: {e}", dir.display())))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::User(format!("{}: {e}", path.display())))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s: OsString = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes `<output>.meta`: the command, the config hash and any extra keys.
fn write_meta(output: &Path, command: &str, loaded: &Loaded, extra: &[(&str, String)]) -> Result<(), CliError> {
    let mut out = create(&with_suffix(output, ".meta"))?;
    writeln!(out, "tool=vortex {}", env!("CARGO_PKG_VERSION"))?;
    writeln!(out, "command={command}")?;
    writeln!(out, "config_sha256={}", loaded.sha256)?;
    for (k, v) in extra {
        writeln!(out, "{k}={v}")?;
    }
    out.flush()?;
    Ok(())
}

fn plot(output: &Path, values: &ndarray::Array2<f64>, opts: Option<PlotOptions>) -> Result<(), CliError> {
    if let Some(o) = opts {
        let path = output.with_extension("pgm");
        let mut out = create(&path)?;
        write_pgm(&mut out, values, o.scale, o.saturate)?;
        out.flush()?;
        eprintln!("plot: {}", path.display());
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DesignFormat {
    Pbm,
    Svg,
    All,
}

pub fn design(loaded: &Loaded, stem: &Path, format: DesignFormat, erode: bool) -> Result<(), CliError> {
    let m = &loaded.config.instrument;
    let mask: RasterMask = if erode {
        m.mask()?
    } else {
        rasterize(&m.spec, m.raster_pitch, m.spec.diameter)?
    };
    let mut written = Vec::new();
    let mut emit = |ext: &str, fmt: MaskFormat| -> Result<(), CliError> {
        let path = stem.with_extension(ext);
        let mut out = create(&path)?;
        export_mask(&mask, fmt, &mut out)?;
        out.flush()?;
        write_meta(&path, "design", loaded, &[("eroded", erode.to_string())])?;
        written.push(path);
        Ok(())
    };
    if matches!(format, DesignFormat::Pbm | DesignFormat::All) {
        emit("pbm", MaskFormat::RasterBitmap)?;
    }
    if matches!(format, DesignFormat::Svg | DesignFormat::All) {
        emit("svg", MaskFormat::VectorPolygons)?;
    }

    let spec = &m.spec;
    let margin = if erode { m.erosion_margin } else { 0.0 };
    println!("dislocations        {}", spec.dislocations);
    println!("period              {:.1} nm", spec.period / NANOMETER);
    println!("diameter            {:.1} nm", spec.diameter / NANOMETER);
    println!("raster              {} x {} px at {:.2} nm", mask.width(), mask.height(), mask.pixel_pitch / NANOMETER);
    println!("open width          {:.2} nm (designed {:.2} nm)", (spec.open_width() - 2.0 * margin) / NANOMETER, spec.open_width() / NANOMETER);
    println!("open pixels         {} of {}", mask.open_count(), mask.width() * mask.height());
    println!("open fraction       {:.4} inside the disk", mask.open_fraction_in_disk(spec.diameter));
    println!("blocked islands     {}", blocked_islands(&mask).len());
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

pub fn simulate_map(loaded: &Loaded, output: &Path, plot_opts: Option<PlotOptions>) -> Result<(), CliError> {
    let m = &loaded.config.instrument;
    let map = simulate(m)?;
    let mut out = create(output)?;
    write_intensity_map(&mut out, &map)?;
    out.flush()?;
    write_meta(output, "simulate", loaded, &[])?;
    plot(output, &map.values, plot_opts)?;
    let g = map.grid();
    println!(
        "{} x {} map at {:.3} urad/px, normalization {}",
        g.width,
        g.height,
        g.pitch / MICRORADIAN,
        map.normalization.as_str()
    );
    Ok(())
}

pub fn events(
    loaded: &Loaded,
    count: usize,
    seed: u64,
    output: &Path,
    image_path: &Path,
    plot_opts: Option<PlotOptions>,
) -> Result<(), CliError> {
    let cfg = &loaded.config;
    let parts = simulate_species(&cfg.instrument)?;
    let components: Vec<_> = parts
        .iter()
        .map(|s| (&s.map, s.weight, s.species.detection_class))
        .collect();
    let mut list = sample_mixture(&components, count, seed)?;
    if let Some(d) = &cfg.deflection {
        list = apply_deflection(&list, d, seed)?;
    }
    let image = accumulate(&list, cfg.instrument.detector_pixel_angle)?;

    let mut out = create(output)?;
    write_events(&mut out, &list)?;
    out.flush()?;
    let extra = [
        ("seed", seed.to_string()),
        ("rng", ALGORITHM_ID.to_string()),
        ("count", count.to_string()),
    ];
    write_meta(output, "events", loaded, &extra)?;

    let mut out = create(image_path)?;
    write_detector_image(&mut out, &image)?;
    out.flush()?;
    write_meta(image_path, "events", loaded, &extra)?;
    plot(image_path, &image.counts.mapv(|c| c as f64), plot_opts)?;
    println!(
        "{} events on a {} x {} image of {:.1} urad pixels",
        list.len(),
        image.counts.ncols(),
        image.counts.nrows(),
        image.pixel_angle / MICRORADIAN
    );
    Ok(())
}

/// Reads a line cut (CSV) or a VWI1 image and reduces the latter to a cut.
fn read_data(loaded: &Loaded, path: &Path) -> Result<LineCut, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::User(format!("{}: {e}", path.display())))?;
    let named = |e: vortex_core::Error| CliError::User(format!("{}: {e}", path.display()));
    if !bytes.starts_with(b"VWI1") {
        return read_line_cut(BufReader::new(&bytes[..])).map_err(named);
    }
    let a = loaded
        .config
        .analysis
        .as_ref()
        .ok_or_else(|| CliError::User("fitting an image needs an [analysis] section".into()))?;
    let full = match read_detector_image(&bytes[..]) {
        Ok(image) => extract_line_cut(&image, a.center_y, a.box_width, a.box_height),
        Err(first) => match read_intensity_map(&bytes[..]) {
            Ok(map) => extract_line_cut(&map, a.center_y, a.box_width, a.box_height),
            Err(_) => Err(first),
        },
    }
    .map_err(named)?;
    Ok(match a.cut_half_range {
        None => full,
        Some(r) => {
            let keep: Vec<usize> = (0..full.len()).filter(|&i| full.positions[i].abs() <= r).collect();
            LineCut {
                positions: keep.iter().map(|&i| full.positions[i]).collect(),
                values: keep.iter().map(|&i| full.values[i]).collect(),
                ..full
            }
        }
    })
}

pub fn fit(loaded: &Loaded, data_path: &Path, output: &Path, curve_path: &Path) -> Result<(), CliError> {
    let cfg = &loaded.config;
    let model = cfg.fit_model()?;
    let data = read_data(loaded, data_path)?;
    let result = fit_profile(&data, &model, &cfg.instrument)?;
    let names: Vec<String> = cfg
        .instrument
        .beam
        .composition
        .iter()
        .map(|(s, _)| s.name.clone())
        .collect();

    let mut out = create(output)?;
    write_fit_report(&mut out, &result, &names)?;
    out.flush()?;
    let data_hash = sha256_hex(&fs::read(data_path)?);
    let extra = [("data_sha256", data_hash), ("seed", model.seed.to_string())];
    write_meta(output, "fit", loaded, &extra)?;

    let mut out = create(curve_path)?;
    writeln!(out, "position_urad,data,model")?;
    for ((p, d), f) in data.positions.iter().zip(&data.values).zip(&result.model_cut.values) {
        writeln!(out, "{},{d},{f}", p / MICRORADIAN)?;
    }
    out.flush()?;
    write_meta(curve_path, "fit", loaded, &extra)?;

    let v = &result.values;
    println!(
        "open width {:.2} nm, velocity FWHM {:.2}%, residual {:.4e} (start {:.4e}), {} iterations",
        v.open_width / NANOMETER,
        100.0 * v.fractional_fwhm,
        result.residual,
        result.initial_residual,
        result.iterations
    );
    if !result.converged {
        return Err(CliError::NotConverged(format!(
            "stopped after {} iterations; report written to {}",
            result.iterations,
            output.display()
        )));
    }
    Ok(())
}

/// Prints derived beam and geometry quantities.
pub fn check(loaded: &Loaded) -> Result<(), CliError> {
    let m = &loaded.config.instrument;
    let divergence = divergence_angle(&m.geometry)?;
    println!("config sha256       {}", loaded.sha256);
    println!("divergence          {:.1} urad", divergence / MICRORADIAN);
    for (s, w) in m.beam.normalized_composition() {
        let lambda = de_broglie_wavelength(s.mass, m.beam.mean_speed)?;
        let coherence = transverse_coherence_length(lambda, divergence)?;
        let f = fresnel_number(m.spec.diameter, lambda, m.geometry.grating_to_detector);
        println!(
            "{:<18}  weight {w:.3}  lambda {:.3} pm  first order {:.4} mrad  coherence {:.0} nm  Fresnel {f:.3}",
            s.name,
            lambda / PICOMETER,
            order_center(1, lambda, m.spec.period) / MILLIRADIAN,
            coherence / NANOMETER,
        );
    }
    let g = m.reference_grid()?;
    println!("grid                {} x {} at {:.3} urad", g.width, g.height, g.pitch / MICRORADIAN);
    Ok(())
}
