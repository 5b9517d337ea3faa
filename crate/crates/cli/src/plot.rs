//! Greyscale PGM renderings of maps and detector images.

use std::io::Write;

use ndarray::Array2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Scale {
    Linear,
    Log,
}

/// Binary PGM (P5), top row = largest θy. Values at or above
/// `saturate·max` render white; in log scale the range spans 4 decades.
pub fn write_pgm<W: Write>(out: &mut W, values: &Array2<f64>, scale: Scale, saturate: Option<f64>) -> std::io::Result<()> {
    let (h, w) = values.dim();
    let max = values.iter().cloned().fold(0.0f64, f64::max);
    let top = max * saturate.unwrap_or(1.0);
    let level = |v: f64| -> u8 {
        if !(top > 0.0) {
            return 0;
        }
        let x = match scale {
            Scale::Linear => v / top,
            Scale::Log => {
                if v <= 0.0 {
                    0.0
                } else {
                    1.0 + (v / top).log10() / 4.0
                }
            }
        };
        (x.clamp(0.0, 1.0) * 255.0).round() as u8
    };
    write!(out, "P5\n{w} {h}\n255\n")?;
    let mut row = Vec::with_capacity(w);
    for iy in (0..h).rev() {
        row.clear();
        row.extend((0..w).map(|ix| level(values[[iy, ix]])));
        out.write_all(&row)?;
    }
    Ok(())
}
