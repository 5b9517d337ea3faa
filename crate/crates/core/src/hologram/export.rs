//! Fabrication exports: plain PBM rasters and SVG outlines of blocked regions.

use std::collections::{HashMap, VecDeque};
use std::io::Write;

use ndarray::Array2;

use super::{MaskProvenance, RasterMask};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskFormat {
    RasterBitmap,
    VectorPolygons,
}

/// Writes `mask` in the requested format.
pub fn export_mask<W: Write>(mask: &RasterMask, format: MaskFormat, out: &mut W) -> Result<()> {
    match format {
        MaskFormat::RasterBitmap => write_pbm(mask, out),
        MaskFormat::VectorPolygons => write_svg(mask, out),
    }
}

/// Plain PBM: `P1`, dimensions, then one text row per mask row with `1` for
/// blocked pixels. The first row written is the top of the mask (largest y).
fn write_pbm<W: Write>(mask: &RasterMask, out: &mut W) -> Result<()> {
    let (w, h) = (mask.width(), mask.height());
    writeln!(out, "P1")?;
    writeln!(out, "{w} {h}")?;
    let mut line = String::with_capacity(2 * w);
    for iy in (0..h).rev() {
        line.clear();
        for ix in 0..w {
            if ix > 0 {
                line.push(' ');
            }
            line.push(if mask.occupancy[[iy, ix]] { '0' } else { '1' });
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Reads a plain PBM written by [`export_mask`] (or any conforming P1 file).
pub fn import_pbm(text: &str, pixel_pitch: f64) -> Result<RasterMask> {
    let mut tokens = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let content = line.split('#').next().unwrap_or("");
        for tok in content.split_whitespace() {
            tokens.push((lineno + 1, tok));
        }
    }
    let mut it = tokens.into_iter();
    match it.next() {
        Some((_, "P1")) => {}
        Some((line, t)) => {
            return Err(Error::Parse {
                line,
                message: format!("expected P1 magic, found '{t}'"),
            })
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty bitmap".into(),
            })
        }
    }
    let mut dim = |what: &str| -> Result<usize> {
        let (line, t) = it.next().ok_or(Error::Parse {
            line: 1,
            message: format!("missing {what}"),
        })?;
        t.parse().map_err(|_| Error::Parse {
            line,
            message: format!("bad {what} '{t}'"),
        })
    };
    let w = dim("width")?;
    let h = dim("height")?;
    let mut bits = Vec::with_capacity(w * h);
    for (line, t) in it {
        for c in t.chars() {
            match c {
                '0' => bits.push(true),
                '1' => bits.push(false),
                _ => {
                    return Err(Error::Parse {
                        line,
                        message: format!("unexpected pixel '{c}'"),
                    })
                }
            }
        }
    }
    if bits.len() != w * h {
        return Err(Error::Parse {
            line: text.lines().count(),
            message: format!("expected {} pixels, found {}", w * h, bits.len()),
        });
    }
    let occupancy = Array2::from_shape_fn((h, w), |(iy, ix)| bits[(h - 1 - iy) * w + ix]);
    RasterMask::new(occupancy, pixel_pitch)
}

/// One 4-connected blocked region: its outer ring and the rings of the open
/// holes inside it. Vertices are in metres in the mask plane; outer rings run
/// counter-clockwise and holes clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockedIsland {
    pub outer: Vec<(f64, f64)>,
    pub holes: Vec<Vec<(f64, f64)>>,
}

fn signed_area(ring: &[(f64, f64)]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| {
            let (x0, y0) = ring[i];
            let (x1, y1) = ring[(i + 1) % n];
            x0 * y1 - x1 * y0
        })
        .sum::<f64>()
        / 2.0
}

impl BlockedIsland {
    /// Enclosed blocked area, holes subtracted.
    pub fn area(&self) -> f64 {
        signed_area(&self.outer) + self.holes.iter().map(|h| signed_area(h)).sum::<f64>()
    }
}

fn label_blocked(occ: &Array2<bool>) -> Array2<usize> {
    let (h, w) = occ.dim();
    let mut label = Array2::from_elem((h, w), usize::MAX);
    let mut next = 0;
    let mut queue = VecDeque::new();
    for sy in 0..h {
        for sx in 0..w {
            if occ[[sy, sx]] || label[[sy, sx]] != usize::MAX {
                continue;
            }
            label[[sy, sx]] = next;
            queue.push_back((sx, sy));
            while let Some((x, y)) = queue.pop_front() {
                let mut visit = |nx: usize, ny: usize| {
                    if !occ[[ny, nx]] && label[[ny, nx]] == usize::MAX {
                        label[[ny, nx]] = next;
                        queue.push_back((nx, ny));
                    }
                };
                if x > 0 {
                    visit(x - 1, y);
                }
                if x + 1 < w {
                    visit(x + 1, y);
                }
                if y > 0 {
                    visit(x, y - 1);
                }
                if y + 1 < h {
                    visit(x, y + 1);
                }
            }
            next += 1;
        }
    }
    label
}

type Corner = (i64, i64);

/// Traces the blocked set into closed rings on the pixel-corner lattice.
///
/// Boundary edges are oriented with the blocked pixel on their left. At
/// saddle corners (two diagonal blocked pixels) the walk turns left, which
/// keeps diagonal neighbours in separate islands, matching 4-connectivity.
pub fn blocked_islands(mask: &RasterMask) -> Vec<BlockedIsland> {
    let occ = &mask.occupancy;
    let (h, w) = occ.dim();
    let blocked = |x: i64, y: i64| -> bool {
        x >= 0 && y >= 0 && x < w as i64 && y < h as i64 && !occ[[y as usize, x as usize]]
    };

    let mut outgoing: HashMap<Corner, Vec<Corner>> = HashMap::new();
    for iy in 0..h as i64 {
        for ix in 0..w as i64 {
            if !blocked(ix, iy) {
                continue;
            }
            if !blocked(ix, iy - 1) {
                outgoing.entry((ix, iy)).or_default().push((ix + 1, iy));
            }
            if !blocked(ix + 1, iy) {
                outgoing.entry((ix + 1, iy)).or_default().push((ix + 1, iy + 1));
            }
            if !blocked(ix, iy + 1) {
                outgoing.entry((ix + 1, iy + 1)).or_default().push((ix, iy + 1));
            }
            if !blocked(ix - 1, iy) {
                outgoing.entry((ix, iy + 1)).or_default().push((ix, iy));
            }
        }
    }

    let labels = label_blocked(occ);
    let mut starts: Vec<Corner> = outgoing.keys().copied().collect();
    starts.sort_unstable();

    let mut rings: Vec<(usize, Vec<Corner>)> = Vec::new();
    for start in starts {
        while let Some(first) = outgoing.get_mut(&start).and_then(|v| v.pop()) {
            let owner = left_pixel(start, first);
            let label = labels[[owner.1 as usize, owner.0 as usize]];
            let mut ring = vec![start];
            let (mut prev, mut cur) = (start, first);
            while cur != start {
                ring.push(cur);
                let dir = (cur.0 - prev.0, cur.1 - prev.1);
                let options = outgoing.get_mut(&cur).expect("open boundary chain");
                let pick = if options.len() == 1 {
                    0
                } else {
                    // prefer the left turn at saddles
                    let left = (-dir.1, dir.0);
                    options
                        .iter()
                        .position(|&n| (n.0 - cur.0, n.1 - cur.1) == left)
                        .unwrap_or(0)
                };
                let next = options.swap_remove(pick);
                prev = cur;
                cur = next;
            }
            rings.push((label, simplify(ring)));
        }
    }

    let cx = w as f64 / 2.0;
    let cy = h as f64 / 2.0;
    let to_phys = |c: Corner| -> (f64, f64) {
        (
            mask.origin.0 + (c.0 as f64 - cx) * mask.pixel_pitch,
            mask.origin.1 + (c.1 as f64 - cy) * mask.pixel_pitch,
        )
    };

    let mut by_label: HashMap<usize, BlockedIsland> = HashMap::new();
    let mut order = Vec::new();
    for (label, ring) in rings {
        let phys: Vec<_> = ring.into_iter().map(to_phys).collect();
        let entry = by_label.entry(label).or_insert_with(|| {
            order.push(label);
            BlockedIsland {
                outer: Vec::new(),
                holes: Vec::new(),
            }
        });
        if signed_area(&phys) > 0.0 {
            entry.outer = phys;
        } else {
            entry.holes.push(phys);
        }
    }
    order.sort_unstable();
    order
        .into_iter()
        .filter_map(|l| by_label.remove(&l))
        .collect()
}

fn left_pixel(from: Corner, to: Corner) -> Corner {
    match (to.0 - from.0, to.1 - from.1) {
        (1, 0) => (from.0, from.1),
        (0, 1) => (from.0 - 1, from.1),
        (-1, 0) => (from.0 - 1, from.1 - 1),
        _ => (from.0, from.1 - 1),
    }
}

/// Drops vertices in the middle of straight runs.
fn simplify(ring: Vec<Corner>) -> Vec<Corner> {
    let n = ring.len();
    (0..n)
        .filter(|&i| {
            let a = ring[(i + n - 1) % n];
            let b = ring[i];
            let c = ring[(i + 1) % n];
            (b.0 - a.0) * (c.1 - b.1) - (b.1 - a.1) * (c.0 - b.0) != 0
        })
        .map(|i| ring[i])
        .collect()
}

fn num(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn write_svg<W: Write>(mask: &RasterMask, out: &mut W) -> Result<()> {
    let nm = 1e9;
    let width = mask.width() as f64 * mask.pixel_pitch * nm;
    let height = mask.height() as f64 * mask.pixel_pitch * nm;
    let x0 = mask.origin.0 * nm - width / 2.0;
    // SVG y grows downwards; flip the mask plane
    let y0 = -mask.origin.1 * nm - height / 2.0;
    writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}nm" height="{h}nm" viewBox="{x} {y} {w} {h}">"#,
        w = num(width),
        h = num(height),
        x = num(x0),
        y = num(y0),
    )?;
    writeln!(out, "  <metadata>")?;
    writeln!(
        out,
        r#"    <raster width="{}" height="{}" pixel_pitch_nm="{}" units="nm"/>"#,
        mask.width(),
        mask.height(),
        num(mask.pixel_pitch * nm)
    )?;
    if let Some(MaskProvenance {
        spec,
        erosion_margin,
    }) = mask.provenance
    {
        writeln!(
            out,
            r#"    <hologram period_nm="{}" dislocations="{}" diameter_nm="{}" open_fraction="{}" fringe_axis="{}" erosion_margin_nm="{}"/>"#,
            num(spec.period * nm),
            spec.dislocations,
            num(spec.diameter * nm),
            spec.open_fraction,
            spec.fringe_axis.as_str(),
            num(erosion_margin * nm)
        )?;
    }
    writeln!(out, "  </metadata>")?;
    for island in blocked_islands(mask) {
        let mut d = String::new();
        for ring in std::iter::once(&island.outer).chain(island.holes.iter()) {
            for (i, &(x, y)) in ring.iter().enumerate() {
                let cmd = if i == 0 { 'M' } else { 'L' };
                d.push_str(&format!("{cmd}{} {} ", num(x * nm), num(-y * nm)));
            }
            d.push_str("Z ");
        }
        writeln!(
            out,
            r#"  <path fill="black" fill-rule="evenodd" d="{}"/>"#,
            d.trim_end()
        )?;
    }
    writeln!(out, "</svg>")?;
    Ok(())
}
