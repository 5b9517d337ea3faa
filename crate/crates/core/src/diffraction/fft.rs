use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

/// Largest transform edge accepted by [`super::far_field`].
pub const MAX_TRANSFORM: usize = 8192;

fn transform_rows(data: &mut [Complex64], len: usize, fft: &Arc<dyn Fft<f64>>) {
    data.par_chunks_mut(len).for_each_init(
        || vec![Complex64::default(); fft.get_inplace_scratch_len()],
        |scratch, row| fft.process_with_scratch(row, scratch),
    );
}

fn transpose(data: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); n * n];
    out.par_chunks_mut(n).enumerate().for_each(|(c, row)| {
        for (r, v) in row.iter_mut().enumerate() {
            *v = data[r * n + c];
        }
    });
    out
}

/// Unnormalised square 2-D DFT with the `+i` kernel,
/// `out[ky·n + kx] = Σ in[y·n + x]·exp(2πi(kx·x + ky·y)/n)`.
/// Only the first `filled_rows` rows of the input may be non-zero.
pub(crate) fn dft2_plus_i(mut data: Vec<Complex64>, n: usize, filled_rows: usize) -> Vec<Complex64> {
    debug_assert_eq!(data.len(), n * n);
    let fft = FftPlanner::new().plan_fft_inverse(n);
    transform_rows(&mut data[..filled_rows.min(n) * n], n, &fft);
    let mut t = transpose(&data, n);
    drop(data);
    transform_rows(&mut t, n, &fft);
    transpose(&t, n)
}
