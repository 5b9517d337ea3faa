use ndarray::Array2;
use rayon::prelude::*;

use crate::beam::DetectionClass;
use crate::diffraction::IntensityMap;
use crate::error::{domain, Error, Result};
use crate::grid::{overlap, AngularGrid, PixelGrid};
use crate::rng::{standard_normal_pair, streams, unit_f64, Philox4x32};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub theta_x: f64,
    pub theta_y: f64,
    pub species: DetectionClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventList {
    pub events: Vec<Event>,
    pub rng_seed: u64,
}

impl EventList {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Rigid momentum kick plus Gaussian heating along θy for one detection class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeflectionModel {
    pub mean_kick: f64,
    pub kick_spread: f64,
    pub affected_class: DetectionClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorImage {
    /// shape (height, width), centred like every angular grid
    pub counts: Array2<u64>,
    pub pixel_angle: f64,
    pub total_events: u64,
}

impl DetectorImage {
    pub fn grid(&self) -> AngularGrid {
        let (h, w) = self.counts.dim();
        AngularGrid::new(w, h, self.pixel_angle)
    }
}

impl PixelGrid for DetectorImage {
    fn grid(&self) -> AngularGrid {
        DetectorImage::grid(self)
    }

    fn value(&self, iy: usize, ix: usize) -> f64 {
        self.counts[[iy, ix]] as f64
    }
}

/// Cumulative pixel weights of one map.
struct Sampler<'a> {
    map: &'a IntensityMap,
    grid: AngularGrid,
    cdf: Vec<f64>,
}

impl<'a> Sampler<'a> {
    fn new(map: &'a IntensityMap) -> Self {
        let mut acc = 0.0;
        let cdf = map
            .values
            .iter()
            .map(|&v| {
                acc += v;
                acc
            })
            .collect();
        Self {
            map,
            grid: map.grid(),
            cdf,
        }
    }

    fn total(&self) -> f64 {
        self.cdf.last().copied().unwrap_or(0.0)
    }

    fn draw(&self, block: [u32; 4]) -> (f64, f64) {
        let u = unit_f64(block[0], block[1]) * self.total();
        let k = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        let (iy, ix) = (k / self.grid.width, k % self.grid.width);
        debug_assert!(self.map.values[[iy, ix]] > 0.0);
        let jx = f64::from(block[2]) / 4_294_967_296.0 - 0.5;
        let jy = f64::from(block[3]) / 4_294_967_296.0 - 0.5;
        (
            self.grid.angle_x(ix) + jx * self.grid.pitch,
            self.grid.angle_y(iy) + jy * self.grid.pitch,
        )
    }
}

/// Independent impacts drawn from `map` treated as a pixel probability mass
/// function, with uniform jitter inside the chosen pixel. Event `i` uses only
/// counter `i` of the generator, so the list does not depend on threading.
pub fn sample_events(map: &IntensityMap, count: usize, seed: u64, species: DetectionClass) -> Result<EventList> {
    sample_mixture(&[(map, 1.0, species)], count, seed)
}

/// Like [`sample_events`] for several species: each event first picks a
/// species by weight, then a pixel from that species' map.
pub fn sample_mixture(
    components: &[(&IntensityMap, f64, DetectionClass)],
    count: usize,
    seed: u64,
) -> Result<EventList> {
    if count == 0 {
        return Ok(EventList {
            events: Vec::new(),
            rng_seed: seed,
        });
    }
    if components.is_empty() {
        return Err(domain("no species to sample"));
    }
    let samplers: Vec<Sampler> = components.iter().map(|(m, _, _)| Sampler::new(m)).collect();
    let mut weights = Vec::with_capacity(components.len());
    let mut acc = 0.0;
    for ((_, w, _), s) in components.iter().zip(&samplers) {
        if !(*w >= 0.0) || !w.is_finite() {
            return Err(domain("species weights must be finite and non-negative"));
        }
        if *w > 0.0 && !(s.total() > 0.0) {
            return Err(Error::EmptyDistribution);
        }
        acc += w;
        weights.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::EmptyDistribution);
    }
    let rng = Philox4x32::new(seed);
    let events = (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let pick = if components.len() == 1 {
                0
            } else {
                let b = rng.draw(streams::SPECIES, i);
                let u = unit_f64(b[0], b[1]) * acc;
                weights.partition_point(|&c| c <= u).min(weights.len() - 1)
            };
            let (theta_x, theta_y) = samplers[pick].draw(rng.draw(streams::EVENTS, i));
            Event {
                theta_x,
                theta_y,
                species: components[pick].2,
            }
        })
        .collect();
    Ok(EventList { events, rng_seed: seed })
}

/// Shifts θy of every event of the affected class by `mean_kick + σ·N(0,1)`.
pub fn apply_deflection(events: &EventList, model: &DeflectionModel, seed: u64) -> Result<EventList> {
    if !(model.kick_spread >= 0.0) || !model.mean_kick.is_finite() || !model.kick_spread.is_finite() {
        return Err(domain("kick spread must be finite and non-negative"));
    }
    let rng = Philox4x32::new(seed);
    let out = events
        .events
        .par_iter()
        .enumerate()
        .map(|(i, e)| {
            if e.species != model.affected_class {
                return *e;
            }
            let noise = if model.kick_spread > 0.0 {
                standard_normal_pair(rng.draw(streams::DEFLECTION, i as u64)).0
            } else {
                0.0
            };
            Event {
                theta_y: e.theta_y + model.mean_kick + model.kick_spread * noise,
                ..*e
            }
        })
        .collect();
    Ok(EventList {
        events: out,
        rng_seed: events.rng_seed,
    })
}

const MAX_IMAGE_HALF: usize = 1 << 14;

/// Histogram on the smallest odd, centred grid that holds every event.
pub fn accumulate(events: &EventList, pixel_angle: f64) -> Result<DetectorImage> {
    if !(pixel_angle > 0.0) {
        return Err(domain("pixel angle must be positive"));
    }
    let mut reach = (0.0f64, 0.0f64);
    for e in &events.events {
        if !e.theta_x.is_finite() || !e.theta_y.is_finite() {
            return Err(domain("event angles must be finite"));
        }
        reach.0 = reach.0.max(e.theta_x.abs());
        reach.1 = reach.1.max(e.theta_y.abs());
    }
    let half = |r: f64| -> Result<usize> {
        let h = (r / pixel_angle).round() as usize + 1;
        if h > MAX_IMAGE_HALF {
            Err(domain(format!("events extend {r:e} rad, too far for {pixel_angle:e} rad pixels")))
        } else {
            Ok(h)
        }
    };
    let (hx, hy) = (half(reach.0)?, half(reach.1)?);
    let grid = AngularGrid::new(2 * hx + 1, 2 * hy + 1, pixel_angle);
    let image = accumulate_on(events, grid);
    debug_assert_eq!(image.total_events as usize, events.len());
    Ok(image)
}

/// Histogram on a fixed grid; events outside it are not counted.
pub fn accumulate_on(events: &EventList, grid: AngularGrid) -> DetectorImage {
    let mut counts = Array2::zeros((grid.height, grid.width));
    let mut total = 0;
    for e in &events.events {
        let ix = grid.index_x(e.theta_x).round();
        let iy = grid.index_y(e.theta_y).round();
        if ix >= 0.0 && iy >= 0.0 && (ix as usize) < grid.width && (iy as usize) < grid.height {
            counts[[iy as usize, ix as usize]] += 1;
            total += 1;
        }
    }
    DetectorImage {
        counts,
        pixel_angle: grid.pitch,
        total_events: total,
    }
}

/// Sparse overlap weights from the cells of a centred 1-D source axis to
/// those of a destination axis, as fractions of the source cell.
fn overlap_taps(src: (usize, usize, f64), dst: (usize, usize, f64)) -> Vec<Vec<(usize, f64)>> {
    let (src_len, src_center, src_pitch) = src;
    let (dst_len, dst_center, dst_pitch) = dst;
    let cell = |a: f64| a / dst_pitch + dst_center as f64 + 0.5;
    (0..src_len)
        .map(|i| {
            let a0 = (i as f64 - src_center as f64 - 0.5) * src_pitch;
            let a1 = a0 + src_pitch;
            let j0 = cell(a0).floor().max(0.0) as usize;
            let j1 = (cell(a1).floor().max(0.0) as usize).min(dst_len.saturating_sub(1));
            (j0..=j1)
                .filter_map(|j| {
                    let b0 = (j as f64 - dst_center as f64 - 0.5) * dst_pitch;
                    let o = overlap(a0, a1, b0, b0 + dst_pitch);
                    (o > 0.0).then_some((j, o / src_pitch))
                })
                .collect()
        })
        .collect()
}

/// Probability of landing in each cell of `grid` under the jittered-pixel
/// model used by the sampler, scaled to the map total.
pub fn expected_counts(map: &IntensityMap, grid: &AngularGrid) -> Array2<f64> {
    let g = map.grid();
    let tx = overlap_taps((g.width, g.center_x(), g.pitch), (grid.width, grid.center_x(), grid.pitch));
    let ty = overlap_taps((g.height, g.center_y(), g.pitch), (grid.height, grid.center_y(), grid.pitch));
    let mut rows = Array2::<f64>::zeros((g.height, grid.width));
    for ((iy, ix), &v) in map.values.indexed_iter() {
        if v != 0.0 {
            for &(j, w) in &tx[ix] {
                rows[[iy, j]] += w * v;
            }
        }
    }
    let mut out = Array2::zeros((grid.height, grid.width));
    for iy in 0..g.height {
        for &(j, w) in &ty[iy] {
            for jx in 0..grid.width {
                out[[j, jx]] += w * rows[[iy, jx]];
            }
        }
    }
    out
}

/// Total-variation distance between the normalised image histogram and the
/// map's expected distribution over the image cells.
pub fn total_variation(image: &DetectorImage, map: &IntensityMap) -> f64 {
    let expected = expected_counts(map, &image.grid());
    let total_p = map.total();
    let n = image.total_events as f64;
    if n == 0.0 || total_p == 0.0 {
        return if n == 0.0 && total_p == 0.0 { 0.0 } else { 1.0 };
    }
    let inside: f64 = expected.sum();
    let mut tv = 0.0;
    for (c, p) in image.counts.iter().zip(expected.iter()) {
        tv += (*c as f64 / n - p / total_p).abs();
    }
    // mass of the map that falls outside the image
    tv += (total_p - inside).max(0.0) / total_p;
    tv / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffraction::Normalization;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn small_map() -> IntensityMap {
        let values = Array2::from_shape_fn((9, 11), |(iy, ix)| 1.0 + ((ix * 7 + iy * 3) % 5) as f64);
        IntensityMap::new(values, 2e-6, Normalization::Raw).unwrap()
    }

    #[test]
    fn empty_and_degenerate_inputs() {
        let m = small_map();
        assert!(sample_events(&m, 0, 1, DetectionClass::SingletAtom).unwrap().is_empty());
        let zero = IntensityMap::new(Array2::zeros((3, 3)), 1e-6, Normalization::Raw).unwrap();
        assert!(matches!(
            sample_events(&zero, 5, 1, DetectionClass::SingletAtom),
            Err(Error::EmptyDistribution)
        ));
        let img = accumulate(&EventList { events: vec![], rng_seed: 0 }, 30e-6).unwrap();
        assert_eq!(img.total_events, 0);
        assert!(img.counts.iter().all(|&c| c == 0));
    }

    #[test]
    fn single_pixel_map_confines_events() {
        let mut values = Array2::zeros((5, 5));
        values[[1, 3]] = 2.0;
        let m = IntensityMap::new(values, 10e-6, Normalization::Raw).unwrap();
        let g = m.grid();
        let ev = sample_events(&m, 500, 9, DetectionClass::Dimer).unwrap();
        for e in &ev.events {
            assert!((e.theta_x - g.angle_x(3)).abs() <= 5e-6);
            assert!((e.theta_y - g.angle_y(1)).abs() <= 5e-6);
            assert_eq!(e.species, DetectionClass::Dimer);
        }
    }

    #[test]
    fn reproducible_across_threads() {
        let m = small_map();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sample_events(&m, 20_000, 77, DetectionClass::SingletAtom).unwrap())
        };
        assert_eq!(run(1), run(4));
        assert_ne!(run(1), sample_events(&m, 20_000, 78, DetectionClass::SingletAtom).unwrap());
    }

    #[test]
    fn chi_square_of_multinomial_counts() {
        let m = small_map();
        let n = 100_000;
        let g = m.grid();
        let total = m.total();
        let dof = (g.width * g.height - 1) as f64;
        let dist = ChiSquared::new(dof).unwrap();
        let mut pvalues = Vec::new();
        for seed in 0..20 {
            let ev = sample_events(&m, n, seed, DetectionClass::SingletAtom).unwrap();
            let img = accumulate_on(&ev, g);
            assert_eq!(img.total_events as usize, n);
            let chi2: f64 = img
                .counts
                .iter()
                .zip(m.values.iter())
                .map(|(&c, &v)| {
                    let e = n as f64 * v / total;
                    (c as f64 - e).powi(2) / e
                })
                .sum();
            pvalues.push(1.0 - dist.cdf(chi2));
        }
        assert!(pvalues.iter().any(|&p| p >= 0.01), "{pvalues:?}");
        // roughly uniform: not piled up at either end
        let low = pvalues.iter().filter(|&&p| p < 0.5).count();
        assert!((3..=17).contains(&low), "{pvalues:?}");
    }

    #[test]
    fn deflection_rules() {
        let m = small_map();
        let ev = sample_events(&m, 4000, 3, DetectionClass::TripletAtom).unwrap();
        let none = DeflectionModel {
            mean_kick: 0.0,
            kick_spread: 0.0,
            affected_class: DetectionClass::TripletAtom,
        };
        assert_eq!(apply_deflection(&ev, &none, 1).unwrap(), ev);
        let kick = DeflectionModel {
            mean_kick: 50e-6,
            kick_spread: 20e-6,
            affected_class: DetectionClass::TripletAtom,
        };
        let moved = apply_deflection(&ev, &kick, 1).unwrap();
        assert_eq!(moved.len(), ev.len());
        let n = ev.len() as f64;
        let mut shift = 0.0;
        for (a, b) in ev.events.iter().zip(&moved.events) {
            assert_eq!(a.theta_x, b.theta_x);
            shift += b.theta_y - a.theta_y;
        }
        let mean = shift / n;
        assert!((mean - 50e-6).abs() < 3.0 * 20e-6 / n.sqrt(), "{mean}");
        let dimers = sample_events(&m, 100, 3, DetectionClass::Dimer).unwrap();
        assert_eq!(apply_deflection(&dimers, &kick, 1).unwrap(), dimers);
        let bad = DeflectionModel { kick_spread: -1.0, ..kick };
        assert!(apply_deflection(&ev, &bad, 1).is_err());
    }

    #[test]
    fn accumulate_counts_every_event() {
        let m = small_map();
        let ev = sample_events(&m, 3000, 5, DetectionClass::SingletAtom).unwrap();
        let img = accumulate(&ev, 3e-6).unwrap();
        assert_eq!(img.total_events, 3000);
        assert_eq!(img.counts.iter().sum::<u64>(), 3000);
        let g = img.grid();
        assert_eq!(g.width % 2, 1);
        assert_eq!(g.angle_x(g.center_x()), 0.0);
    }

    #[test]
    fn expected_counts_conserve_mass() {
        let m = small_map();
        let grid = AngularGrid::new(9, 7, 3e-6);
        let e = expected_counts(&m, &grid);
        assert!((e.sum() - m.total()).abs() < 1e-9 * m.total());
        let tv_self = {
            let ev = sample_events(&m, 200_000, 11, DetectionClass::SingletAtom).unwrap();
            total_variation(&accumulate_on(&ev, grid), &m)
        };
        assert!(tv_self < 0.01, "{tv_self}");
    }
}
