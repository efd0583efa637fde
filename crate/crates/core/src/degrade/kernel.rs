//! Gaussian blur kernels and 2-D convolution with reflect padding.

use crate::error::{Result, SrgaError};
use crate::image::{FloatImage, CHANNELS};

/// Side length of every blur kernel.
pub const KERNEL_SIZE: usize = 21;

/// A normalized square blur kernel, row-major, centered.
#[derive(Clone, Debug, PartialEq)]
pub struct BlurKernel {
    size: usize,
    weights: Vec<f64>,
    /// Present when the kernel is the outer product of this 1-D kernel with
    /// itself.
    separable: Option<Vec<f64>>,
}

impl BlurKernel {
    /// Sampled isotropic Gaussian with standard deviation `sigma` pixels.
    pub fn isotropic(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(SrgaError::Parameter(format!("blur width must be positive, got {sigma}")));
        }
        let half = (KERNEL_SIZE / 2) as isize;
        let mut line: Vec<f64> = (-half..=half)
            .map(|x| (-((x * x) as f64) / (2.0 * sigma * sigma)).exp())
            .collect();
        let sum: f64 = line.iter().sum();
        line.iter_mut().for_each(|v| *v /= sum);
        let weights = line
            .iter()
            .flat_map(|&wy| line.iter().map(move |&wx| wy * wx))
            .collect();
        Ok(BlurKernel {
            size: KERNEL_SIZE,
            weights,
            separable: Some(line),
        })
    }

    /// Sampled anisotropic Gaussian with covariance
    /// `R(θ) · diag(σ1², σ2²) · R(θ)ᵀ`; σ1 lies along the rotated x axis.
    pub fn anisotropic(sigma1: f64, sigma2: f64, theta: f64) -> Result<Self> {
        for s in [sigma1, sigma2] {
            if !(s > 0.0 && s.is_finite()) {
                return Err(SrgaError::Parameter(format!(
                    "anisotropic kernel widths must be positive, got ({sigma1}, {sigma2})"
                )));
            }
        }
        if !theta.is_finite() {
            return Err(SrgaError::Parameter("rotation must be finite".into()));
        }
        let (s, c) = theta.sin_cos();
        let (v1, v2) = (sigma1 * sigma1, sigma2 * sigma2);
        // Covariance entries.
        let sxx = c * c * v1 + s * s * v2;
        let syy = s * s * v1 + c * c * v2;
        let sxy = c * s * (v1 - v2);
        let det = sxx * syy - sxy * sxy;
        let (ixx, iyy, ixy) = (syy / det, sxx / det, -sxy / det);

        let half = (KERNEL_SIZE / 2) as isize;
        let mut weights = Vec::with_capacity(KERNEL_SIZE * KERNEL_SIZE);
        for y in -half..=half {
            for x in -half..=half {
                let (xf, yf) = (x as f64, y as f64);
                let q = ixx * xf * xf + 2.0 * ixy * xf * yf + iyy * yf * yf;
                weights.push((-0.5 * q).exp());
            }
        }
        let sum: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|v| *v /= sum);
        Ok(BlurKernel {
            size: KERNEL_SIZE,
            weights,
            separable: None,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at offset (dx, dy) from the center.
    pub fn at(&self, dx: isize, dy: isize) -> f64 {
        let half = (self.size / 2) as isize;
        self.weights[((dy + half) as usize) * self.size + (dx + half) as usize]
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Second moments (Σ k·x², Σ k·y²) about the center.
    pub fn second_moments(&self) -> (f64, f64) {
        let half = (self.size / 2) as isize;
        let (mut mx, mut my) = (0.0, 0.0);
        for dy in -half..=half {
            for dx in -half..=half {
                let w = self.at(dx, dy);
                mx += w * (dx * dx) as f64;
                my += w * (dy * dy) as f64;
            }
        }
        (mx, my)
    }

    /// Convolves each channel, reflecting (without repeating the edge
    /// sample) beyond the borders.
    pub fn apply(&self, img: &FloatImage) -> Result<FloatImage> {
        let half = self.size / 2;
        if img.width <= half || img.height <= half {
            return Err(SrgaError::Dimension(format!(
                "{}x{} image too small for a {}px kernel",
                img.width, img.height, self.size
            )));
        }
        Ok(match &self.separable {
            Some(line) => {
                let tmp = convolve_axis(img, line, Axis::X);
                convolve_axis(&tmp, line, Axis::Y)
            }
            None => self.convolve_full(img),
        })
    }

    fn convolve_full(&self, img: &FloatImage) -> FloatImage {
        let half = (self.size / 2) as isize;
        let (w, h) = (img.width, img.height);
        let mut out = FloatImage::zeros(w, h);
        for y in 0..h {
            for x in 0..w {
                let mut acc = [0.0; CHANNELS];
                for ky in -half..=half {
                    let sy = reflect(y as isize + ky, h);
                    for kx in -half..=half {
                        let k = self.at(kx, ky);
                        let sx = reflect(x as isize + kx, w);
                        let base = (sy * w + sx) * CHANNELS;
                        for (c, a) in acc.iter_mut().enumerate() {
                            *a += k * img.data[base + c];
                        }
                    }
                }
                for (c, a) in acc.iter().enumerate() {
                    out.set(x, y, c, *a);
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
}

fn convolve_axis(img: &FloatImage, line: &[f64], axis: Axis) -> FloatImage {
    let half = (line.len() / 2) as isize;
    let (w, h) = (img.width, img.height);
    let mut out = FloatImage::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; CHANNELS];
            for (i, &k) in line.iter().enumerate() {
                let off = i as isize - half;
                let (sx, sy) = match axis {
                    Axis::X => (reflect(x as isize + off, w), y),
                    Axis::Y => (x, reflect(y as isize + off, h)),
                };
                let base = (sy * w + sx) * CHANNELS;
                for (c, a) in acc.iter_mut().enumerate() {
                    *a += k * img.data[base + c];
                }
            }
            for (c, a) in acc.iter().enumerate() {
                out.set(x, y, c, *a);
            }
        }
    }
    out
}

/// Mirror index into `0..len` without duplicating the edge sample.
pub(crate) fn reflect(i: isize, len: usize) -> usize {
    let n = len as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - m;
    }
    m as usize
}
