//! Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned below.
//!
//! Run with `cargo test -p vortex-core --test acceptance -- --nocapture` to see
//! the report.

use std::time::Instant;

use ndarray::Array2;
use statrs::function::gamma::ln_gamma;
use vortex_core::analysis::{
    extract_line_cut, find_order_peaks, fit_profile, forward_cut, FitModel, LineCut, Parameter, Weighting,
};
use vortex_core::beam::{de_broglie_wavelength, BeamModel, BeamlineGeometry, DetectionClass, ParticleSpecies};
use vortex_core::diffraction::{
    azimuthal_mean, far_field, intensity, measure_topological_charge, order_center, ring_radius, FarField, IntensityMap,
    Normalization,
};
use vortex_core::grid::PixelGrid;
use vortex_core::hologram::{rasterize, rasterize_eroded, FringeAxis, HologramSpec, RasterMask, TileLayout};
use vortex_core::instrument::{
    accumulate, apply_deflection, collimation_blur, mixture_intensity, polychromatic_intensity, sample_events,
    sample_mixture, simulate, simulate_species, total_variation, DeflectionModel, EventList, InstrumentModel,
};
use vortex_core::io::write_events;
use vortex_core::units::*;

// criterion 1
const STATED_WAVELENGTH: f64 = 90.0 * PICOMETER;
const WAVELENGTH_EXPECTED: f64 = 91.5 * PICOMETER;
const WAVELENGTH_ROUNDING: f64 = 0.05 * PICOMETER;
const WAVELENGTH_VS_STATED: f64 = 0.02;
// criterion 2
const ATOM_ANGLE: f64 = 0.90 * MILLIRADIAN;
const DIMER_ANGLE: f64 = 0.457 * MILLIRADIAN;
const ANGLE_TOLERANCE: f64 = 0.01;
// criterion 3
const CHARGE_TOLERANCE: f64 = 0.05;
// criterion 4
const NULL_FRACTION: f64 = 0.01;
// criterion 5
const PARSEVAL_TOLERANCE: f64 = 1e-10;
const CHROMATIC_TOLERANCE: f64 = 1e-6;
const BLUR_TOLERANCE: f64 = 1e-9;
const INVERSION_TOLERANCE: f64 = 1e-10;
// criterion 6
const EVEN_ORDER_SUPPRESSION: f64 = 1e-4;
// criterion 7
const EVENT_COUNT: usize = 200_000;
const DETECTOR_PIXEL: f64 = 30.0 * MICRORADIAN;
const TV_TOLERANCE: f64 = 0.02;
// criterion 8
const TRUE_WIDTH: f64 = 40.0 * NANOMETER;
const START_WIDTH: f64 = 55.0 * NANOMETER;
const NOISELESS_WIDTH_TOLERANCE: f64 = 0.5 * NANOMETER;
const NOISY_WIDTH_TOLERANCE: f64 = 2.0 * NANOMETER;
const NOISY_SEEDS: u64 = 10;
const FIT_RUNTIME_LIMIT_S: f64 = 300.0;
// criterion 9
const KS_ALPHA: f64 = 0.05;

/// Criteria that fail against their pinned tolerance, with the cause. The run
/// still prints FAIL for them; the assertion only flags a change of outcome.
const KNOWN_RED: &[(&str, &str)] = &[
    ("4", "cores of |l| >= 4 rings fill in where they overlap the neighbouring orders"),
    ("7", "counting noise of 2e5 events over the sparse wide-angle halo alone gives TV ~ 0.09"),
];

const RASTER: f64 = 2.5 * NANOMETER;
const PAD: usize = 8;

struct Line {
    id: String,
    pass: bool,
    detail: String,
}

#[derive(Default)]
struct Report {
    lines: Vec<Line>,
}

impl Report {
    fn add(&mut self, id: &str, pass: bool, detail: String) {
        println!("{} criterion {id}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.lines.push(Line {
            id: id.to_string(),
            pass,
            detail,
        });
    }

    fn info(&self, id: &str, detail: String) {
        println!("INFO criterion {id}: {detail}");
    }
}

fn hologram(n: u32, diameter: f64, open_fraction: f64) -> HologramSpec {
    HologramSpec {
        period: 100.0 * NANOMETER,
        dislocations: n,
        diameter,
        open_fraction,
        fringe_axis: FringeAxis::X,
    }
}

fn fig2_geometry() -> BeamlineGeometry {
    BeamlineGeometry {
        valve_to_skimmer: 400.0 * MILLIMETER,
        skimmer_to_grating: 1400.0 * MILLIMETER,
        grating_to_detector: 1250.0 * MILLIMETER,
        skimmer_aperture: 150.0 * MICROMETER,
        grating_array_extent: 50.0 * MICROMETER,
    }
}

fn instrument(spec: HologramSpec, margin: f64, species: Vec<(ParticleSpecies, f64)>) -> InstrumentModel {
    InstrumentModel {
        beam: BeamModel::new(1090.0, 0.03, species).unwrap(),
        geometry: fig2_geometry(),
        layout: TileLayout::single(),
        spec,
        erosion_margin: margin,
        detector_pixel_angle: DETECTOR_PIXEL,
        wavelength_sample_count: 15,
        raster_pitch: RASTER,
        pad_factor: PAD,
        view: None,
    }
}

fn mono_map(mask: &RasterMask, wavelength: f64) -> (FarField, IntensityMap) {
    let field = far_field(mask, wavelength, PAD).unwrap();
    let map = intensity(&field, Normalization::Raw);
    (field, map)
}

fn center_row_cut(map: &IntensityMap) -> LineCut {
    extract_line_cut(map, 0.0, map.angular_pitch, map.angular_pitch).unwrap()
}

/// Position of order +1 and −1 from a single-row cut; vortex orders report the
/// midpoint between the ring lobes.
fn first_order_angles(map: &IntensityMap, wavelength: f64, n: u32) -> (f64, f64) {
    let cut = center_row_cut(map);
    let r = find_order_peaks(&cut, wavelength, 100.0 * NANOMETER, 1, n).unwrap();
    let m = |order: i32| r.orders.iter().find(|p| p.order == order).unwrap();
    assert!(!m(1).missing && !m(-1).missing);
    (m(-1).position, m(1).position)
}

fn criterion_1(rep: &mut Report) {
    let atom = de_broglie_wavelength(HELIUM4_MASS, 1090.0).unwrap();
    let dimer = de_broglie_wavelength(ParticleSpecies::helium_dimer().mass, 1090.0).unwrap();
    let rel = (atom / STATED_WAVELENGTH - 1.0).abs();
    let halves = dimer == atom / 2.0;
    let pass = (atom - WAVELENGTH_EXPECTED).abs() <= WAVELENGTH_ROUNDING && rel < WAVELENGTH_VS_STATED && halves;
    rep.add(
        "1",
        pass,
        format!(
            "lambda(He, 1090 m/s) = {:.3} pm (expect 91.5 +- 0.05), {:.2}% from 90 pm (< 2%), dimer = {:.4} pm, exactly half: {halves}",
            atom / PICOMETER,
            rel * 100.0,
            dimer / PICOMETER
        ),
    );
}

fn criterion_2(rep: &mut Report) {
    let t = Instant::now();
    let dimer_lambda = de_broglie_wavelength(ParticleSpecies::helium_dimer().mass, 1090.0).unwrap();
    let mut worst_atom: f64 = 0.0;
    let mut worst_dimer: f64 = 0.0;
    let mut parts = Vec::new();
    for n in [0, 1] {
        let mask = rasterize(&hologram(n, 600.0 * NANOMETER, 0.5), RASTER, 600.0 * NANOMETER).unwrap();
        let (_, map) = mono_map(&mask, STATED_WAVELENGTH);
        let (lo, hi) = first_order_angles(&map, STATED_WAVELENGTH, n);
        for a in [-lo, hi] {
            worst_atom = worst_atom.max((a / ATOM_ANGLE - 1.0).abs());
        }
        let (_, dmap) = mono_map(&mask, dimer_lambda);
        let (dlo, dhi) = first_order_angles(&dmap, dimer_lambda, n);
        for a in [-dlo, dhi] {
            worst_dimer = worst_dimer.max((a / DIMER_ANGLE - 1.0).abs());
        }
        parts.push(format!(
            "n={n}: atoms {:+.4}/{:+.4} mrad, dimers {:+.4}/{:+.4} mrad",
            lo * 1e3,
            hi * 1e3,
            dlo * 1e3,
            dhi * 1e3
        ));
    }
    let secs = t.elapsed().as_secs_f64();
    rep.add(
        "2",
        worst_atom <= ANGLE_TOLERANCE && worst_dimer <= ANGLE_TOLERANCE && secs < 10.0,
        format!(
            "{}; worst deviation atoms {:.2}%, dimers {:.2}% (tol 1%); {secs:.1} s (< 10 s)",
            parts.join("; "),
            worst_atom * 100.0,
            worst_dimer * 100.0
        ),
    );
    let atom_lambda = de_broglie_wavelength(HELIUM4_MASS, 1090.0).unwrap();
    rep.info(
        "2",
        format!(
            "atoms are simulated at the stated 90 pm; at 1090 m/s they would sit at {:.4} mrad",
            order_center(1, atom_lambda, 100.0 * NANOMETER) * 1e3
        ),
    );
}

struct Ladder {
    charges: Vec<(i32, f64)>,
    nulls: Vec<(i32, f64)>,
    radii: Vec<(i32, f64)>,
}

/// Charge, core-to-ring ratio and ring radius of orders ±1..±max_order.
fn ladder(n: u32, max_order: i32) -> Ladder {
    // effective 40/60 duty cycle so that even orders carry intensity
    let mask = rasterize(&hologram(n, 600.0 * NANOMETER, 0.4), RASTER, 600.0 * NANOMETER).unwrap();
    let (field, map) = mono_map(&mask, STATED_WAVELENGTH);
    let spacing = STATED_WAVELENGTH / (100.0 * NANOMETER);
    let mut out = Ladder {
        charges: vec![],
        nulls: vec![],
        radii: vec![],
    };
    for m in (-max_order..=max_order).filter(|&m| m != 0) {
        let c = (order_center(m, STATED_WAVELENGTH, 100.0 * NANOMETER), 0.0);
        // search the whole cell of this order, up to the midpoint to its neighbours
        let r = ring_radius(&map, c, 0.5 * spacing).unwrap();
        let ring = azimuthal_mean(&map, c, r);
        out.nulls.push((m, map.at(c.0, c.1) / ring));
        out.radii.push((m, r));
        out.charges.push((m, measure_topological_charge(&field, c, r).unwrap()));
    }
    out
}

fn criterion_3_and_4(rep: &mut Report) {
    let t = Instant::now();
    let one = ladder(1, 4);
    let two = ladder(2, 3);
    let secs = t.elapsed().as_secs_f64();

    let mut ok = true;
    let mut text = Vec::new();
    for (lad, n) in [(&one, 1), (&two, 2)] {
        let s: Vec<String> = lad
            .charges
            .iter()
            .filter(|(m, _)| *m > 0)
            .map(|&(m, q)| {
                ok &= (q - f64::from(n) * m as f64).abs() <= CHARGE_TOLERANCE;
                format!("{q:.3}")
            })
            .collect();
        // negative orders carry the opposite charge
        for &(m, q) in lad.charges.iter().filter(|(m, _)| *m < 0) {
            ok &= (q - f64::from(n) * m as f64).abs() <= CHARGE_TOLERANCE;
        }
        text.push(format!("n={n} orders 1.. -> [{}]", s.join(", ")));
    }
    rep.add("3", ok && secs < 30.0, format!("{} (tol 0.05); {secs:.1} s (< 30 s)", text.join("; ")));

    let worst = one.nulls.iter().chain(&two.nulls).map(|x| x.1).fold(0.0, f64::max);
    let positive = |l: &Ladder| -> Vec<f64> { l.radii.iter().filter(|(m, _)| *m > 0).map(|x| x.1).collect() };
    let (r1, r2) = (positive(&one), positive(&two));
    let increasing = r1.windows(2).all(|w| w[1] > w[0]) && r2.windows(2).all(|w| w[1] > w[0]);
    let larger = r2[0] > r1[0];
    let fmt = |v: &[f64]| v.iter().map(|r| format!("{:.1}", r * 1e6)).collect::<Vec<_>>().join(", ");
    // worse of the ±m pair, listed by charge
    let nulls = |l: &Ladder, n: i32| -> String {
        let top = l.nulls.iter().map(|x| x.0).max().unwrap();
        (1..=top)
            .map(|m| {
                let v = l.nulls.iter().filter(|x| x.0.abs() == m).map(|x| x.1).fold(0.0, f64::max);
                format!("l={}: {v:.1e}", m * n)
            })
            .collect::<Vec<_>>()
            .join(", ")
    };
    rep.add(
        "4",
        worst < NULL_FRACTION && increasing && larger,
        format!(
            "core/ring n=1 [{}], n=2 [{}] (each < 1e-2); ring radii n=1 [{}] urad, n=2 [{}] urad; increasing {increasing}; n=2 first ring larger {larger}",
            nulls(&one, 1),
            nulls(&two, 2),
            fmt(&r1),
            fmt(&r2)
        ),
    );
}

fn inversion_asymmetry(map: &IntensityMap) -> f64 {
    let (h, w) = map.values.dim();
    let g = map.grid();
    let max = map.max();
    let mut worst: f64 = 0.0;
    for iy in 0..h {
        let my = 2 * g.center_y() as i64 - iy as i64;
        if my < 0 || my >= h as i64 {
            continue;
        }
        for ix in 0..w {
            let mx = 2 * g.center_x() as i64 - ix as i64;
            if mx < 0 || mx >= w as i64 {
                continue;
            }
            let d = (map.values[[iy, ix]] - map.values[[my as usize, mx as usize]]).abs();
            worst = worst.max(d / max);
        }
    }
    worst
}

fn criterion_5(rep: &mut Report) {
    let mut parseval: f64 = 0.0;
    let mut inversion: f64 = 0.0;
    for (n, f, margin) in [(0, 0.5, 0.0), (1, 0.5, 0.0), (2, 0.5, 0.0), (1, 0.55, 7.5 * NANOMETER)] {
        let spec = hologram(n, 600.0 * NANOMETER, f);
        let mask = rasterize_eroded(&spec, margin, RASTER, 600.0 * NANOMETER).unwrap();
        let (field, map) = mono_map(&mask, STATED_WAVELENGTH);
        let open = mask.open_count() as f64;
        parseval = parseval.max((field.power() - open).abs() / open);
        inversion = inversion.max(inversion_asymmetry(&map));
    }
    let model = instrument(hologram(1, 600.0 * NANOMETER, 0.5), 0.0, vec![(ParticleSpecies::helium_singlet(), 1.0)]);
    let poly = polychromatic_intensity(&model, &ParticleSpecies::helium_singlet()).unwrap();
    let chromatic = (poly.total() - 1.0).abs();
    let blurred = collimation_blur(&poly, &model.geometry).unwrap();
    let blur = (blurred.total() - poly.total()).abs() / poly.total();
    let mix = mixture_intensity(&[(poly.clone(), 0.7), (blurred.clone(), 0.3)]).unwrap();
    let mixture = (mix.total() - 1.0).abs();
    let pass = parseval <= PARSEVAL_TOLERANCE
        && chromatic <= CHROMATIC_TOLERANCE
        && blur <= BLUR_TOLERANCE
        && mixture <= CHROMATIC_TOLERANCE
        && inversion <= INVERSION_TOLERANCE;
    rep.add(
        "5",
        pass,
        format!(
            "Parseval {parseval:.1e} (1e-10), chromatic {chromatic:.1e} (1e-6), blur {blur:.1e} (1e-9), mixture {mixture:.1e}, inversion {inversion:.1e} (1e-10)"
        ),
    );
}

/// Peak |m| = 2 over peak |m| = 1 for straight slits.
fn even_to_odd(map: &IntensityMap) -> f64 {
    let at = |m: i32| map.at(order_center(m, STATED_WAVELENGTH, 100.0 * NANOMETER), 0.0);
    (at(2).max(at(-2))) / (at(1).max(at(-1)))
}

fn slit_window(open_fraction: f64, periods: usize) -> RasterMask {
    let per = (100.0 * NANOMETER / RASTER).round() as usize;
    let open = (open_fraction * per as f64).round() as usize;
    let side = per * periods;
    RasterMask::new(Array2::from_shape_fn((side, side), |(_, x)| x % per < open), RASTER).unwrap()
}

fn criterion_6(rep: &mut Report) {
    let (_, half) = mono_map(&slit_window(0.5, 6), STATED_WAVELENGTH);
    let (_, forty) = mono_map(&slit_window(0.4, 6), STATED_WAVELENGTH);
    let r50 = even_to_odd(&half);
    let r40 = even_to_odd(&forty);
    // square-wave Fourier coefficients: sinc²(2πf)/sinc²(πf)
    let sinc = |x: f64| x.sin() / x;
    let expect40 = (sinc(2.0 * std::f64::consts::PI * 0.4) / sinc(std::f64::consts::PI * 0.4)).powi(2);
    rep.add(
        "6",
        r50 < EVEN_ORDER_SUPPRESSION && r40 > 1e-2 && (r40 / expect40 - 1.0).abs() < 0.05,
        format!(
            "straight slits over 6x6 periods: |m|=2 / |m|=1 at 50/50 = {r50:.1e} (< 1e-4); at 40/60 = {r40:.4} (square-wave value {expect40:.4})"
        ),
    );
    let disk = rasterize(&hologram(0, 600.0 * NANOMETER, 0.5), RASTER, 600.0 * NANOMETER).unwrap();
    let (_, dmap) = mono_map(&disk, STATED_WAVELENGTH);
    rep.info(
        "6",
        format!(
            "same 50/50 slits inside the 600 nm disk: ratio {:.1e}, set by the aperture's diffraction tails, not by the duty cycle",
            even_to_odd(&dmap)
        ),
    );
}

fn events_bytes(map: &IntensityMap, threads: usize) -> Vec<u8> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let ev = sample_events(map, EVENT_COUNT, 2024, DetectionClass::SingletAtom).unwrap();
        let mut buf = Vec::new();
        write_events(&mut buf, &ev).unwrap();
        buf
    })
}

fn criterion_7(rep: &mut Report) {
    let model = instrument(hologram(1, 600.0 * NANOMETER, 0.5), 0.0, vec![(ParticleSpecies::helium_singlet(), 1.0)]);
    let map = simulate(&model).unwrap();
    let ev = sample_events(&map, EVENT_COUNT, 7, DetectionClass::SingletAtom).unwrap();
    let image = accumulate(&ev, DETECTOR_PIXEL).unwrap();
    let tv = total_variation(&image, &map);
    let one = events_bytes(&map, 1);
    let four = events_bytes(&map, 4);
    let same = one == four;
    // effective number of occupied detector pixels, sum(p)^2 / sum(p^2)
    let expected = vortex_core::instrument::expected_counts(&map, &image.grid());
    let (s1, s2) = expected.iter().fold((0.0, 0.0), |(a, b), p| (a + p, b + p * p));
    let k_eff = s1 * s1 / s2;
    rep.add(
        "7",
        tv < TV_TOLERANCE && same,
        format!(
            "TV({EVENT_COUNT} events, 30 urad pixels) = {tv:.4} (< 0.02); byte-identical events on 1 and 4 threads: {same}"
        ),
    );
    // E|n - mu| for Poisson counts: 2 e^-mu mu^(k+1) / k!, k = floor(mu)
    let n = EVENT_COUNT as f64;
    let total = map.total();
    let floor: f64 = expected
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| {
            let mu = n * p / total;
            let k = mu.floor();
            2.0 * (-mu + (k + 1.0) * mu.ln() - ln_gamma(k + 1.0)).exp()
        })
        .sum::<f64>()
        / (2.0 * n);
    rep.info(
        "7",
        format!(
            "participation ratio {k_eff:.0} pixels; an exact sampler is expected to reach TV = {floor:.4} from counting noise alone (measured/expected = {:.3})",
            tv / floor
        ),
    );
}

fn fig3_template() -> InstrumentModel {
    // fabricated 55 nm slits, 7.5 nm eroded from each edge
    instrument(
        hologram(1, 600.0 * NANOMETER, 0.55),
        7.5 * NANOMETER,
        vec![(ParticleSpecies::helium_singlet(), 1.0)],
    )
}

fn fig3_cut(image: &impl PixelGrid) -> LineCut {
    let full = extract_line_cut(image, 0.0, 30.0 * MICRORADIAN, 90.0 * MICRORADIAN).unwrap();
    let keep: Vec<usize> = (0..full.len())
        .filter(|&i| full.positions[i].abs() <= 2.25 * MILLIRADIAN)
        .collect();
    LineCut {
        positions: keep.iter().map(|&i| full.positions[i]).collect(),
        values: keep.iter().map(|&i| full.values[i]).collect(),
        ..full
    }
}

fn float_width(template: &InstrumentModel, weighting: Weighting, seed: u64) -> FitModel {
    let mut m = FitModel::for_template(template);
    m.open_width = Parameter::free(START_WIDTH, 5.0 * NANOMETER, 95.0 * NANOMETER);
    m.fractional_fwhm = Parameter::free(0.05, 0.0, 0.2);
    m.weighting = weighting;
    m.seed = seed;
    m
}

fn criterion_8(rep: &mut Report) {
    let t = Instant::now();
    let template = fig3_template();
    let truth = simulate(&template).unwrap();

    let mut noiseless = fig3_cut(&truth);
    noiseless.values = forward_cut(&template, TRUE_WIDTH, 0.03, &[1.0], &noiseless)
        .unwrap()
        .iter()
        .map(|v| 1e5 * v)
        .collect();
    let clean = fit_profile(&noiseless, &float_width(&template, Weighting::Uniform, 0), &template).unwrap();
    let clean_err = (clean.values.open_width - TRUE_WIDTH).abs();

    let mut widths = Vec::new();
    let mut first_noisy = None;
    for seed in 0..NOISY_SEEDS {
        let ev = sample_events(&truth, EVENT_COUNT, 100 + seed, DetectionClass::SingletAtom).unwrap();
        let cut = fig3_cut(&accumulate(&ev, DETECTOR_PIXEL).unwrap());
        let fit = fit_profile(&cut, &float_width(&template, Weighting::Poisson, seed), &template).unwrap();
        widths.push(fit.values.open_width);
        if first_noisy.is_none() {
            first_noisy = Some((cut, fit));
        }
    }
    let worst_noisy = widths.iter().map(|w| (w - TRUE_WIDTH).abs()).fold(0.0, f64::max);

    let (cut, floated) = first_noisy.unwrap();
    let mut fixed = float_width(&template, Weighting::Poisson, 0);
    fixed.open_width = Parameter::fixed(START_WIDTH);
    let pinned = fit_profile(&cut, &fixed, &template).unwrap();
    let improves = floated.residual < pinned.residual;
    let secs = t.elapsed().as_secs_f64();

    let list = widths.iter().map(|w| format!("{:.2}", w * 1e9)).collect::<Vec<_>>().join(", ");
    rep.add(
        "8",
        clean_err <= NOISELESS_WIDTH_TOLERANCE
            && worst_noisy <= NOISY_WIDTH_TOLERANCE
            && improves
            && secs < FIT_RUNTIME_LIMIT_S,
        format!(
            "noiseless width {:.3} nm (40 +- 0.5), FWHM {:.2}%; Poisson widths [{list}] nm, worst {:.2} nm off (<= 2); residual at 55 nm {:.4e} -> floated {:.4e} ({improves}); {secs:.0} s (< 300 s)",
            clean.values.open_width * 1e9,
            clean.values.fractional_fwhm * 100.0,
            worst_noisy * 1e9,
            pinned.residual,
            floated.residual
        ),
    );
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// Two-sample Kolmogorov–Smirnov p-value, asymptotic distribution.
fn ks_p_value(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d): (usize, usize, f64) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    let ne = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
    let lambda = (ne.sqrt() + 0.12 + 0.11 / ne.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    p.clamp(0.0, 1.0)
}

fn theta_y_near(events: &EventList, center_x: f64, half: f64) -> Vec<f64> {
    events
        .events
        .iter()
        .filter(|e| (e.theta_x.abs() - center_x).abs() <= half)
        .map(|e| e.theta_y)
        .collect()
}

fn criterion_9(rep: &mut Report) {
    // straight-slit reference grating, triplet and singlet atoms plus dimers
    let model = instrument(
        hologram(0, 600.0 * NANOMETER, 0.5),
        0.0,
        vec![
            (ParticleSpecies::helium_singlet(), 0.1),
            (ParticleSpecies::helium_triplet(), 0.7),
            (ParticleSpecies::helium_dimer(), 0.2),
        ],
    );
    let maps = simulate_species(&model).unwrap();
    let parts: Vec<(&IntensityMap, f64, DetectionClass)> = maps
        .iter()
        .map(|s| (&s.map, s.weight, s.species.detection_class))
        .collect();
    let before = sample_mixture(&parts, EVENT_COUNT, 11).unwrap();
    let kick = DeflectionModel {
        mean_kick: 150.0 * MICRORADIAN,
        kick_spread: 60.0 * MICRORADIAN,
        affected_class: DetectionClass::TripletAtom,
    };
    let after = apply_deflection(&before, &kick, 12).unwrap();

    let atom_order = order_center(1, model.beam.mean_wavelength(&ParticleSpecies::helium_singlet()).unwrap(), 100.0 * NANOMETER);
    let dimer_order = atom_order / 2.0;
    let window = 60.0 * MICRORADIAN;
    let (a0, a1) = (theta_y_near(&before, atom_order, window), theta_y_near(&after, atom_order, window));
    let (d0, d1) = (theta_y_near(&before, dimer_order, window), theta_y_near(&after, dimer_order, window));
    let (m0, s0) = mean_sd(&a0);
    let (m1, s1) = mean_sd(&a1);
    let shift_sigma = (m1 - m0) / (s0 / (a0.len() as f64).sqrt());
    let p_atoms = ks_p_value(&a0, &a1);
    let p_dimers = ks_p_value(&d0, &d1);
    let pass = shift_sigma > 5.0 && s1 > s0 && p_atoms < KS_ALPHA && p_dimers > KS_ALPHA;
    let atoms_in_window = before
        .events
        .iter()
        .filter(|e| (e.theta_x.abs() - dimer_order).abs() <= window && e.species != DetectionClass::Dimer)
        .count();
    rep.add(
        "9",
        pass,
        format!(
            "odd atomic orders: theta_y mean {:+.1} -> {:+.1} urad ({shift_sigma:.0} sigma), sd {:.1} -> {:.1} urad, KS p = {p_atoms:.1e}; half orders: KS p = {p_dimers:.3} (> 0.05, n = {}/{})",
            m0 * 1e6,
            m1 * 1e6,
            s0 * 1e6,
            s1 * 1e6,
            d0.len(),
            d1.len()
        ),
    );
    let narrow = 15.0 * MICRORADIAN;
    let p_narrow = ks_p_value(&theta_y_near(&before, dimer_order, narrow), &theta_y_near(&after, dimer_order, narrow));
    rep.info(
        "9",
        format!(
            "{:.1}% of the events in the half-order window are atoms (diffraction tails and collimation blur of orders 0 and 1); a single 30 urad detector column gives KS p = {p_narrow:.3}",
            100.0 * atoms_in_window as f64 / d0.len() as f64
        ),
    );
    // the half-order p value sits near the threshold; report how often other seed pairs clear it
    let trials = 20u64;
    let mut p_values: Vec<f64> = (0..trials)
        .map(|k| {
            let b = sample_mixture(&parts, EVENT_COUNT, 100 + 2 * k).unwrap();
            let a = apply_deflection(&b, &kick, 101 + 2 * k).unwrap();
            ks_p_value(&theta_y_near(&b, dimer_order, window), &theta_y_near(&a, dimer_order, window))
        })
        .collect();
    p_values.sort_by(f64::total_cmp);
    rep.info(
        "9",
        format!(
            "half-order KS p over {trials} other seed pairs: median {:.3}, {} of {trials} above 0.05",
            p_values[p_values.len() / 2],
            p_values.iter().filter(|&&p| p > KS_ALPHA).count()
        ),
    );
}

#[test]
fn acceptance() {
    let mut rep = Report::default();
    criterion_1(&mut rep);
    criterion_2(&mut rep);
    criterion_3_and_4(&mut rep);
    criterion_5(&mut rep);
    criterion_6(&mut rep);
    criterion_7(&mut rep);
    criterion_8(&mut rep);
    criterion_9(&mut rep);
    let failed: Vec<&str> = rep.lines.iter().filter(|l| !l.pass).map(|l| l.id.as_str()).collect();
    println!("summary: {} passed, failed {:?}", rep.lines.len() - failed.len(), failed);
    for l in rep.lines.iter().filter(|l| !l.pass) {
        match KNOWN_RED.iter().find(|(id, _)| *id == l.id) {
            Some((_, why)) => println!("known red {}: {why}", l.id),
            None => println!("unexpected red {}: {}", l.id, l.detail),
        }
    }
    assert_eq!(
        failed,
        KNOWN_RED.iter().map(|(id, _)| *id).collect::<Vec<_>>(),
        "acceptance outcome changed; known red criteria: {KNOWN_RED:?}"
    );
}

