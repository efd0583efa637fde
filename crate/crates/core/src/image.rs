//! 8-bit RGB patches, a floating-point working image, and PNG I/O.

use std::path::Path;

use crate::error::{Result, SrgaError};

pub const CHANNELS: usize = 3;

/// Row-major interleaved 8-bit RGB raster.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImagePatch {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl ImagePatch {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height * CHANNELS {
            return Err(SrgaError::Dimension(format!(
                "{width}x{height} RGB patch needs {} samples, got {}",
                width * height * CHANNELS,
                data.len()
            )));
        }
        Ok(ImagePatch {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        ImagePatch {
            width,
            height,
            data: vec![value; width * height * CHANNELS],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for y in 0..height {
            for x in 0..width {
                for c in 0..CHANNELS {
                    data.push(f(x, y, c));
                }
            }
        }
        ImagePatch {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * CHANNELS + c]
    }

    /// Copies the `size`×`size` window whose top-left corner is (x0, y0).
    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Result<ImagePatch> {
        if x0 + width > self.width || y0 + height > self.height {
            return Err(SrgaError::Dimension(format!(
                "crop {width}x{height}+{x0}+{y0} exceeds {}x{} image",
                self.width, self.height
            )));
        }
        let mut data = Vec::with_capacity(width * height * CHANNELS);
        for y in y0..y0 + height {
            let start = (y * self.width + x0) * CHANNELS;
            data.extend_from_slice(&self.data[start..start + width * CHANNELS]);
        }
        Ok(ImagePatch {
            width,
            height,
            data,
        })
    }

    pub fn to_float(&self) -> FloatImage {
        FloatImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f64::from(v)).collect(),
        }
    }

    pub fn load_png(path: &Path) -> Result<ImagePatch> {
        let img = image::open(path)
            .map_err(|e| SrgaError::Image {
                path: path.to_path_buf(),
                source: e,
            })?
            .to_rgb8();
        let (w, h) = img.dimensions();
        ImagePatch::new(w as usize, h as usize, img.into_raw())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let img = image::RgbImage::from_raw(self.width as u32, self.height as u32, self.data.clone())
            .expect("buffer length checked at construction");
        img.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| SrgaError::Image {
                path: path.to_path_buf(),
                source: e,
            })
    }
}

/// Interleaved RGB image with `f64` samples on the 0–255 scale, used
/// between degradation steps so quantization happens once.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl FloatImage {
    pub fn zeros(width: usize, height: usize) -> Self {
        FloatImage {
            width,
            height,
            data: vec![0.0; width * height * CHANNELS],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * CHANNELS + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * CHANNELS + c] = v;
    }

    /// Rounds half away from zero and clamps to [0, 255].
    pub fn quantize(&self) -> ImagePatch {
        ImagePatch {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8).collect(),
        }
    }
}

/// Cuts `image` into `patch_size` squares stepping by `stride`, in raster
/// order. Partial patches at the right and bottom edges are dropped.
pub fn extract_patches(image: &ImagePatch, patch_size: usize, stride: usize) -> Result<Vec<ImagePatch>> {
    if patch_size == 0 || stride == 0 {
        return Err(SrgaError::Parameter("patch size and stride must be positive".into()));
    }
    if image.width < patch_size || image.height < patch_size {
        return Err(SrgaError::Dimension(format!(
            "{}x{} image is smaller than a {patch_size}px patch",
            image.width, image.height
        )));
    }
    let origins = |len: usize| (0..=len - patch_size).step_by(stride);
    let mut out = Vec::new();
    for y in origins(image.height) {
        for x in origins(image.width) {
            out.push(image.crop(x, y, patch_size, patch_size)?);
        }
    }
    Ok(out)
}

/// Top-left corners matching [`extract_patches`] for a `width`×`height` image.
pub fn patch_origins(width: usize, height: usize, patch_size: usize, stride: usize) -> Vec<(usize, usize)> {
    if width < patch_size || height < patch_size || stride == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for y in (0..=height - patch_size).step_by(stride) {
        for x in (0..=width - patch_size).step_by(stride) {
            out.push((x, y));
        }
    }
    out
}
