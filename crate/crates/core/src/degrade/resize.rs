//! Antialiased bicubic downsampling compatible with MATLAB `imresize`.
//!
//! Cubic convolution kernel with `a = -0.5`. When shrinking by an integer
//! factor `s`, the kernel is stretched by `s` (support `4s` input taps per
//! output sample), each weight row is normalized to sum to one, and indices
//! past the border are mirrored with the edge sample repeated.

use crate::error::{Result, SrgaError};
use crate::image::{FloatImage, CHANNELS};

/// Keys cubic convolution kernel, `a = -0.5`.
pub fn cubic(x: f64) -> f64 {
    let ax = x.abs();
    let ax2 = ax * ax;
    let ax3 = ax2 * ax;
    if ax <= 1.0 {
        1.5 * ax3 - 2.5 * ax2 + 1.0
    } else if ax < 2.0 {
        -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0
    } else {
        0.0
    }
}

/// Sparse weight table for one axis: for each output sample, the input
/// indices it reads and their normalized weights.
#[derive(Clone, Debug)]
pub struct ResampleTable {
    pub indices: Vec<Vec<usize>>,
    pub weights: Vec<Vec<f64>>,
}

impl ResampleTable {
    /// Table for shrinking `in_len` samples by the integer factor `scale`.
    pub fn downscale(in_len: usize, scale: usize) -> Self {
        let ratio = 1.0 / scale as f64;
        let kernel_width = 4.0 / ratio;
        let out_len = in_len / scale;
        let taps = kernel_width.ceil() as isize + 2;
        let mut indices = Vec::with_capacity(out_len);
        let mut weights = Vec::with_capacity(out_len);
        for i in 1..=out_len {
            // Output sample i (1-based) maps to input coordinate u (1-based).
            let u = i as f64 / ratio + 0.5 * (1.0 - 1.0 / ratio);
            let left = (u - kernel_width / 2.0).floor() as isize;
            let mut row_idx = Vec::with_capacity(taps as usize);
            let mut row_w = Vec::with_capacity(taps as usize);
            for p in 0..taps {
                let j = left + p;
                let w = ratio * cubic(ratio * (u - j as f64));
                if w != 0.0 {
                    row_idx.push(mirror(j, in_len));
                    row_w.push(w);
                }
            }
            let sum: f64 = row_w.iter().sum();
            row_w.iter_mut().for_each(|w| *w /= sum);
            indices.push(row_idx);
            weights.push(row_w);
        }
        ResampleTable { indices, weights }
    }
}

/// Maps a 1-based, possibly out-of-range index onto `0..len` by symmetric
/// extension (edge sample repeated).
fn mirror(j: isize, len: usize) -> usize {
    let n = len as isize;
    let m = (j - 1).rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

/// Shrinks both axes by `scale`. Dimensions must be divisible by `scale`.
pub fn downsample(img: &FloatImage, scale: usize) -> Result<FloatImage> {
    if scale == 0 {
        return Err(SrgaError::Parameter("scale factor must be positive".into()));
    }
    if !img.width.is_multiple_of(scale) || !img.height.is_multiple_of(scale) {
        return Err(SrgaError::Dimension(format!(
            "{}x{} is not divisible by scale {scale}",
            img.width, img.height
        )));
    }
    if scale == 1 {
        return Ok(img.clone());
    }
    let (w, h) = (img.width, img.height);
    let (ow, oh) = (w / scale, h / scale);

    // Rows (height) first, then columns.
    let rows = ResampleTable::downscale(h, scale);
    let mut tmp = FloatImage::zeros(w, oh);
    for (oy, (idx, wts)) in rows.indices.iter().zip(&rows.weights).enumerate() {
        for x in 0..w {
            for c in 0..CHANNELS {
                let v: f64 = idx.iter().zip(wts).map(|(&sy, &k)| k * img.get(x, sy, c)).sum();
                tmp.set(x, oy, c, v);
            }
        }
    }
    let cols = ResampleTable::downscale(w, scale);
    let mut out = FloatImage::zeros(ow, oh);
    for y in 0..oh {
        for (ox, (idx, wts)) in cols.indices.iter().zip(&cols.weights).enumerate() {
            for c in 0..CHANNELS {
                let v: f64 = idx.iter().zip(wts).map(|(&sx, &k)| k * tmp.get(sx, y, c)).sum();
                out.set(ox, y, c, v);
            }
        }
    }
    Ok(out)
}
