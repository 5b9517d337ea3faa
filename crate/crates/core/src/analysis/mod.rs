//! Line cuts, order peaks, ring observables and forward-model fitting.

mod fit;
mod simplex;

use crate::diffraction::{azimuthal_mean, order_center, IntensityMap};
use crate::error::{domain, Error, Result};
use crate::grid::{overlap, PixelGrid};

pub use fit::{fit_profile, forward_cut, FitModel, FitResult, FitValues, Parameter, Weighting};
pub use simplex::{minimize, SimplexOptions, SimplexOutcome};

/// Returned by [`ring_dark_core_contrast`] when the core is darker than the
/// dynamic range can express.
pub const CONTRAST_CAP: f64 = 1e9;

#[derive(Debug, Clone, PartialEq)]
pub struct LineCut {
    /// box centres along x, rad
    pub positions: Vec<f64>,
    pub values: Vec<f64>,
    pub box_width: f64,
    pub box_height: f64,
    /// transverse position of the boxes, rad
    pub center_y: f64,
}

impl LineCut {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

/// Integrates `image` over `box_width × box_height` rectangles centred at
/// `(k·box_width, center_y)` for every integer `k` whose box lies inside the
/// image. Pixels partially inside a box contribute by overlap area.
pub fn extract_line_cut<G: PixelGrid>(image: &G, center_y: f64, box_width: f64, box_height: f64) -> Result<LineCut> {
    if !(box_width > 0.0 && box_height > 0.0) {
        return Err(domain("line-cut boxes must have positive size"));
    }
    let g = image.grid();
    let (x0, x1) = g.span_x();
    let (y0, y1) = g.span_y();
    let slack = 1e-9 * g.pitch;
    let (b0, b1) = (center_y - box_height / 2.0, center_y + box_height / 2.0);
    if b0 < y0 - slack || b1 > y1 + slack {
        return Err(Error::OutOfBounds(format!(
            "line-cut rows {:.1}..{:.1} urad",
            b0 * 1e6,
            b1 * 1e6
        )));
    }
    let k_lo = ((x0 + box_width / 2.0 - slack) / box_width).ceil() as i64;
    let k_hi = ((x1 - box_width / 2.0 + slack) / box_width).floor() as i64;
    if k_hi < k_lo {
        return Err(Error::OutOfBounds(format!(
            "line-cut box of {:.1} urad is wider than the image",
            box_width * 1e6
        )));
    }
    let positions: Vec<f64> = (k_lo..=k_hi).map(|k| k as f64 * box_width).collect();
    let values = integrate_boxes(image, &positions, center_y, box_width, box_height);
    Ok(LineCut {
        positions,
        values,
        box_width,
        box_height,
        center_y,
    })
}

/// Box sums at the given centres; parts of a box outside the image add nothing.
pub(crate) fn integrate_boxes<G: PixelGrid>(
    image: &G,
    positions: &[f64],
    center_y: f64,
    box_width: f64,
    box_height: f64,
) -> Vec<f64> {
    let g = image.grid();
    let cell = |i: usize, c: usize| (i as f64 - c as f64 - 0.5) * g.pitch;
    // covered fractions, with round-off at shared edges snapped to whole pixels
    let frac = |lo: f64, a0: f64, a1: f64| {
        let w = overlap(lo, lo + g.pitch, a0, a1) / g.pitch;
        if (1.0 - w).abs() < 1e-9 {
            1.0
        } else if w < 1e-9 {
            0.0
        } else {
            w
        }
    };
    let (b0, b1) = (center_y - box_height / 2.0, center_y + box_height / 2.0);
    let row_weights: Vec<(usize, f64)> = (0..g.height)
        .filter_map(|iy| {
            let w = frac(cell(iy, g.center_y()), b0, b1);
            (w > 0.0).then_some((iy, w))
        })
        .collect();
    // collapse rows first; the cut is linear in the image
    let column: Vec<f64> = (0..g.width)
        .map(|ix| row_weights.iter().map(|&(iy, w)| w * image.value(iy, ix)).sum())
        .collect();
    positions
        .iter()
        .map(|&c| {
            let (a0, a1) = (c - box_width / 2.0, c + box_width / 2.0);
            let first = (g.index_x(a0) - 0.5).floor().max(0.0) as usize;
            let last = ((g.index_x(a1) + 0.5).ceil().max(0.0) as usize).min(g.width - 1);
            let mut v = 0.0;
            for (ix, col) in column.iter().enumerate().take(last + 1).skip(first) {
                let w = frac(cell(ix, g.center_x()), a0, a1);
                if w > 0.0 {
                    v += w * col;
                }
            }
            v
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderPeak {
    pub order: i32,
    /// peak angle; for a vortex order the midpoint between its two lobes
    pub position: f64,
    /// peak value; for a vortex order the larger lobe
    pub height: f64,
    /// `(left, right)` lobe angles of a vortex order
    pub lobes: Option<(f64, f64)>,
    /// no local maximum inside the order window
    pub missing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakReport {
    pub orders: Vec<OrderPeak>,
    /// local maxima outside every order window, as `(position, height)`
    pub unassigned: Vec<(f64, f64)>,
}

/// Unassigned maxima below this fraction of the cut maximum are ignored.
const UNASSIGNED_FLOOR: f64 = 0.01;

fn local_maxima(values: &[f64]) -> Vec<usize> {
    let n = values.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            // walk across a plateau
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] {
                out.push((i + j) / 2);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Parabolic refinement of a sampled maximum, clamped to half a step.
fn refine(cut: &LineCut, i: usize) -> f64 {
    let v = &cut.values;
    if i == 0 || i + 1 >= v.len() {
        return cut.positions[i];
    }
    let denom = v[i - 1] - 2.0 * v[i] + v[i + 1];
    let shift = if denom < 0.0 {
        (0.5 * (v[i - 1] - v[i + 1]) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    cut.positions[i] + shift * cut.box_width
}

/// Locates each order `m ∈ [−max_order, max_order]` within `±λ/(4d)` of `m·λ/d`.
/// Orders with `|m|·dislocations ≥ 1` are rings, seen in a cut as two lobes.
pub fn find_order_peaks(
    cut: &LineCut,
    wavelength: f64,
    period: f64,
    max_order: u32,
    dislocations: u32,
) -> Result<PeakReport> {
    if !(wavelength > 0.0 && period > 0.0) {
        return Err(domain("wavelength and period must be positive"));
    }
    if cut.is_empty() {
        return Err(domain("empty line cut"));
    }
    let reach = f64::from(max_order) * wavelength / period;
    let (first, last) = (cut.positions[0], *cut.positions.last().unwrap());
    if first > -reach || last < reach {
        return Err(Error::OutOfBounds(format!(
            "cut spans {:.1}..{:.1} urad, orders need ±{:.1} urad",
            first * 1e6,
            last * 1e6,
            reach * 1e6
        )));
    }
    let half_window = wavelength / (4.0 * period);
    let maxima = local_maxima(&cut.values);
    let mut assigned = vec![false; maxima.len()];
    let mut orders = Vec::new();
    for m in -(max_order as i32)..=(max_order as i32) {
        let c = order_center(m, wavelength, period);
        let inside: Vec<usize> = maxima
            .iter()
            .enumerate()
            .filter(|(_, &i)| (cut.positions[i] - c).abs() <= half_window)
            .map(|(k, _)| k)
            .collect();
        for &k in &inside {
            assigned[k] = true;
        }
        let best = |ks: &[usize]| -> Option<usize> {
            ks.iter()
                .map(|&k| maxima[k])
                .max_by(|&a, &b| cut.values[a].total_cmp(&cut.values[b]))
        };
        let vortex = m.unsigned_abs() * dislocations >= 1;
        let peak = if inside.is_empty() {
            OrderPeak {
                order: m,
                position: c,
                height: 0.0,
                lobes: None,
                missing: true,
            }
        } else if vortex {
            let left: Vec<usize> = inside.iter().copied().filter(|&k| cut.positions[maxima[k]] < c).collect();
            let right: Vec<usize> = inside.iter().copied().filter(|&k| cut.positions[maxima[k]] >= c).collect();
            match (best(&left), best(&right)) {
                (Some(l), Some(r)) => {
                    let (pl, pr) = (refine(cut, l), refine(cut, r));
                    OrderPeak {
                        order: m,
                        position: 0.5 * (pl + pr),
                        height: cut.values[l].max(cut.values[r]),
                        lobes: Some((pl, pr)),
                        missing: false,
                    }
                }
                _ => {
                    // the dark core is filled in: a single maximum
                    let i = best(&inside).unwrap();
                    OrderPeak {
                        order: m,
                        position: refine(cut, i),
                        height: cut.values[i],
                        lobes: None,
                        missing: false,
                    }
                }
            }
        } else {
            let i = best(&inside).unwrap();
            OrderPeak {
                order: m,
                position: refine(cut, i),
                height: cut.values[i],
                lobes: None,
                missing: false,
            }
        };
        orders.push(peak);
    }
    let floor = UNASSIGNED_FLOOR * cut.max();
    let unassigned = maxima
        .iter()
        .zip(&assigned)
        .filter(|(&i, &a)| !a && cut.values[i] >= floor && cut.values[i] > 0.0)
        .map(|(&i, _)| (refine(cut, i), cut.values[i]))
        .collect();
    Ok(PeakReport { orders, unassigned })
}

/// Mean intensity on the ring over the intensity at its centre.
pub fn ring_dark_core_contrast(map: &IntensityMap, center: (f64, f64), ring_radius: f64) -> Result<f64> {
    let g = map.grid();
    let (x0, x1) = g.span_x();
    let (y0, y1) = g.span_y();
    if center.0 - ring_radius < x0 || center.0 + ring_radius > x1 || center.1 - ring_radius < y0 || center.1 + ring_radius > y1 {
        return Err(Error::OutOfBounds(format!("ring of radius {:.1} urad", ring_radius * 1e6)));
    }
    let ring = azimuthal_mean(map, center, ring_radius);
    let core = map.at(center.0, center.1);
    if core <= ring / CONTRAST_CAP {
        return Ok(CONTRAST_CAP);
    }
    Ok(ring / core)
}
