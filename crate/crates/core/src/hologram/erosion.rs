use ndarray::Array2;

use super::RasterMask;

const FAR: f64 = 1e20;

/// Lower envelope of parabolas (Felzenszwalb & Huttenlocher), squared distances.
fn squared_distance_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let mut s;
        loop {
            let p = v[k];
            s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
            if s <= z[k] {
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Squared distance, in pixels, from every pixel centre to the nearest blocked
/// pixel centre. Everything beyond the grid counts as blocked.
pub(crate) fn squared_distance_to_blocked(occ: &Array2<bool>) -> Array2<f64> {
    let (h, w) = occ.dim();
    let (ph, pw) = (h + 2, w + 2);
    let mut grid = Array2::from_elem((ph, pw), 0.0);
    for ((iy, ix), &o) in occ.indexed_iter() {
        if o {
            grid[[iy + 1, ix + 1]] = FAR;
        }
    }
    let mut col = vec![0.0; ph];
    let mut out = vec![0.0; ph];
    for x in 0..pw {
        for y in 0..ph {
            col[y] = grid[[y, x]];
        }
        squared_distance_1d(&col, &mut out);
        for y in 0..ph {
            grid[[y, x]] = out[y];
        }
    }
    let mut row = vec![0.0; pw];
    let mut out = vec![0.0; pw];
    for y in 0..ph {
        for x in 0..pw {
            row[x] = grid[[y, x]];
        }
        squared_distance_1d(&row, &mut out);
        for x in 0..pw {
            grid[[y, x]] = out[x];
        }
    }
    grid.slice(ndarray::s![1..h + 1, 1..w + 1]).to_owned()
}

/// Morphological erosion of the open set by a disk of radius `margin` (m):
/// an open pixel closes when a blocked pixel centre lies within `margin`.
pub fn erode_open_regions(mask: &RasterMask, margin: f64) -> RasterMask {
    if !(margin > 0.0) {
        return mask.clone();
    }
    let r = margin / mask.pixel_pitch;
    let limit = r * r * (1.0 + 1e-12) + 1e-12;
    let dist = squared_distance_to_blocked(&mask.occupancy);
    let occupancy = Array2::from_shape_fn(mask.occupancy.dim(), |(iy, ix)| {
        mask.occupancy[[iy, ix]] && dist[[iy, ix]] > limit
    });
    let mut out = RasterMask {
        occupancy,
        ..mask.clone()
    };
    if let Some(p) = out.provenance.as_mut() {
        p.erosion_margin += margin;
    }
    if out.is_empty() && !mask.is_empty() {
        log::warn!(
            "erosion by {:.2} nm closed every open pixel of the mask",
            margin * 1e9
        );
    }
    out
}
