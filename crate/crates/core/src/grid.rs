//! Centered angular grids shared by far fields, intensity maps and detector images.
//!
//! Pixel `(ix, iy)` is centred on `((ix - width/2)·pitch, (iy - height/2)·pitch)`
//! with integer division, so the zero angle is always a pixel centre. Arrays are
//! stored as `Array2` with shape `(height, width)`, row index = y.

use std::ops::{Add, Mul};

use ndarray::Array2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularGrid {
    pub width: usize,
    pub height: usize,
    /// rad per pixel, both axes
    pub pitch: f64,
}

impl AngularGrid {
    pub fn new(width: usize, height: usize, pitch: f64) -> Self {
        Self {
            width,
            height,
            pitch,
        }
    }

    pub fn center_x(&self) -> usize {
        self.width / 2
    }

    pub fn center_y(&self) -> usize {
        self.height / 2
    }

    pub fn angle_x(&self, ix: usize) -> f64 {
        (ix as f64 - self.center_x() as f64) * self.pitch
    }

    pub fn angle_y(&self, iy: usize) -> f64 {
        (iy as f64 - self.center_y() as f64) * self.pitch
    }

    /// Continuous pixel coordinate of an angle (pixel centres are integers).
    pub fn index_x(&self, theta: f64) -> f64 {
        theta / self.pitch + self.center_x() as f64
    }

    pub fn index_y(&self, theta: f64) -> f64 {
        theta / self.pitch + self.center_y() as f64
    }

    /// Angular span covered by pixel edges along x.
    pub fn span_x(&self) -> (f64, f64) {
        let c = self.center_x() as f64;
        ((-c - 0.5) * self.pitch, (self.width as f64 - 1.0 - c + 0.5) * self.pitch)
    }

    pub fn span_y(&self) -> (f64, f64) {
        let c = self.center_y() as f64;
        ((-c - 0.5) * self.pitch, (self.height as f64 - 1.0 - c + 0.5) * self.pitch)
    }

    pub fn same_as(&self, other: &AngularGrid) -> bool {
        self.width == other.width
            && self.height == other.height
            && (self.pitch - other.pitch).abs() <= 1e-12 * self.pitch.abs()
    }
}

/// Read access to a real-valued grid; implemented by maps and detector images.
pub trait PixelGrid {
    fn grid(&self) -> AngularGrid;
    fn value(&self, iy: usize, ix: usize) -> f64;
}

/// Bilinear interpolation at fractional pixel coordinates; samples outside the
/// array count as zero.
pub fn bilinear<T>(data: &Array2<T>, fx: f64, fy: f64) -> T
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    let (h, w) = data.dim();
    let x0 = fx.floor();
    let y0 = fy.floor();
    let tx = fx - x0;
    let ty = fy - y0;
    let (x0, y0) = (x0 as i64, y0 as i64);
    let at = |x: i64, y: i64| -> T {
        if x < 0 || y < 0 || x >= w as i64 || y >= h as i64 {
            T::default()
        } else {
            data[[y as usize, x as usize]]
        }
    };
    let mut acc = T::default();
    if (1.0 - tx) * (1.0 - ty) != 0.0 {
        acc = acc + at(x0, y0) * ((1.0 - tx) * (1.0 - ty));
    }
    if tx * (1.0 - ty) != 0.0 {
        acc = acc + at(x0 + 1, y0) * (tx * (1.0 - ty));
    }
    if (1.0 - tx) * ty != 0.0 {
        acc = acc + at(x0, y0 + 1) * ((1.0 - tx) * ty);
    }
    if tx * ty != 0.0 {
        acc = acc + at(x0 + 1, y0 + 1) * (tx * ty);
    }
    acc
}

/// Length of the overlap between `[a0, a1]` and `[b0, b1]`.
pub(crate) fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}
