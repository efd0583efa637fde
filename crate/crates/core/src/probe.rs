//! A fixed-weight convolutional feature extractor standing in for the body
//! of a super-resolution network.
//!
//! Four 3×3 convolutions, stride 1, reflect padding, channels
//! 3 → 16 → 32 → 64 → 64, ReLU after every layer except the last, no bias and
//! no normalization. Without biases the network is positively homogeneous:
//! scaling the input by `c > 0` scales every feature by exactly `c`.
//!
//! Weights are drawn from `ChaCha8Rng::seed_from_u64(seed)` as
//! `(2u − 1)·sqrt(3 / fan_in)` with `u = rng.random::<f64>()`, layer by
//! layer, in (out channel, in channel, ky, kx) order, then rounded to `f32`.

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::degrade::kernel::reflect;
use crate::error::{Result, SrgaError};
use crate::featstore::{FeatureMeta, FeatureSet};
use crate::image::{FloatImage, ImagePatch};

/// Channel widths from input to output.
pub const PROBE_CHANNELS: [usize; 5] = [3, 16, 32, 64, 64];
pub const PROBE_KERNEL: usize = 3;
pub const PROBE_LAYER_TAG: &str = "probe.conv4";

struct ConvLayer {
    in_ch: usize,
    out_ch: usize,
    /// (9·in_ch) × out_ch; row index is (ky·3 + kx)·in_ch + ci.
    weights: Array2<f32>,
    relu: bool,
}

pub struct ProbeNet {
    seed: u64,
    layers: Vec<ConvLayer>,
}

impl ProbeNet {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let taps = PROBE_KERNEL * PROBE_KERNEL;
        let n_layers = PROBE_CHANNELS.len() - 1;
        let layers = (0..n_layers)
            .map(|l| {
                let (in_ch, out_ch) = (PROBE_CHANNELS[l], PROBE_CHANNELS[l + 1]);
                let bound = (3.0 / (taps * in_ch) as f64).sqrt();
                let mut weights = Array2::<f32>::zeros((taps * in_ch, out_ch));
                for o in 0..out_ch {
                    for ci in 0..in_ch {
                        for tap in 0..taps {
                            let u: f64 = rng.random();
                            weights[(tap * in_ch + ci, o)] = ((2.0 * u - 1.0) * bound) as f32;
                        }
                    }
                }
                ConvLayer {
                    in_ch,
                    out_ch,
                    weights,
                    relu: l + 1 < n_layers,
                }
            })
            .collect();
        ProbeNet { seed, layers }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn model_id(&self) -> String {
        format!("probe-net-seed{}", self.seed)
    }

    pub fn out_channels(&self) -> usize {
        *PROBE_CHANNELS.last().unwrap()
    }

    /// Weights of layer `l` as a (9·in) × out matrix.
    pub fn layer_weights(&self, l: usize) -> ArrayView2<'_, f32> {
        self.layers[l].weights.view()
    }

    /// Runs one image given as interleaved RGB in [0, 1]; returns H×W×C
    /// features, C fastest.
    pub fn forward(&self, width: usize, height: usize, input: &[f32]) -> Vec<f32> {
        let mut act = input.to_vec();
        for layer in &self.layers {
            let cols = im2col(&act, width, height, layer.in_ch);
            let mut out = cols.dot(&layer.weights);
            if layer.relu {
                out.mapv_inplace(|v| v.max(0.0));
            }
            debug_assert_eq!(out.ncols(), layer.out_ch);
            act = out.into_raw_vec_and_offset().0;
        }
        act
    }

    /// Features for 8-bit patches (scaled to [0, 1] internally).
    pub fn extract_features(&self, patches: &[ImagePatch], dataset_id: &str) -> Result<FeatureSet> {
        let dims = common_dims(patches.iter().map(|p| (p.width(), p.height())))?;
        let inputs: Vec<Vec<f32>> = patches
            .iter()
            .map(|p| p.data().iter().map(|&v| f32::from(v) / 255.0).collect())
            .collect();
        self.run(dims, &inputs, dataset_id)
    }

    /// Features for floating-point images on the 0–255 scale, skipping
    /// 8-bit quantization.
    pub fn extract_features_float(&self, images: &[FloatImage], dataset_id: &str) -> Result<FeatureSet> {
        let dims = common_dims(images.iter().map(|p| (p.width, p.height)))?;
        let inputs: Vec<Vec<f32>> = images
            .iter()
            .map(|p| p.data.iter().map(|&v| v as f32 / 255.0).collect())
            .collect();
        self.run(dims, &inputs, dataset_id)
    }

    fn run(&self, (w, h): (usize, usize), inputs: &[Vec<f32>], dataset_id: &str) -> Result<FeatureSet> {
        let maps: Vec<Vec<f32>> = inputs.par_iter().map(|x| self.forward(w, h, x)).collect();
        let c = self.out_channels();
        let mut data = Vec::with_capacity(maps.len() * w * h * c);
        for m in maps {
            data.extend(m);
        }
        FeatureSet::new(
            [inputs.len(), h, w, c],
            data,
            FeatureMeta {
                model_id: self.model_id(),
                dataset_id: dataset_id.to_string(),
                layer_tag: PROBE_LAYER_TAG.to_string(),
            },
        )
    }
}

fn common_dims(mut sizes: impl Iterator<Item = (usize, usize)>) -> Result<(usize, usize)> {
    let first = sizes
        .next()
        .ok_or_else(|| SrgaError::Dimension("no input patches".into()))?;
    if first.0 < 2 || first.1 < 2 {
        return Err(SrgaError::Dimension(format!(
            "{}x{} patch too small for 3x3 reflect padding",
            first.0, first.1
        )));
    }
    for s in sizes {
        if s != first {
            return Err(SrgaError::Dimension(format!(
                "mixed patch sizes: {}x{} and {}x{}",
                first.0, first.1, s.0, s.1
            )));
        }
    }
    Ok(first)
}

/// (H·W) × (9·C) patch matrix with reflect padding.
fn im2col(act: &[f32], w: usize, h: usize, ch: usize) -> Array2<f32> {
    let taps = PROBE_KERNEL * PROBE_KERNEL;
    let mut cols = Array2::<f32>::zeros((w * h, taps * ch));
    let flat = cols.as_slice_mut().expect("fresh array is contiguous");
    let row_len = taps * ch;
    for y in 0..h {
        for x in 0..w {
            let row = &mut flat[(y * w + x) * row_len..][..row_len];
            for ky in 0..PROBE_KERNEL {
                let sy = reflect(y as isize + ky as isize - 1, h);
                for kx in 0..PROBE_KERNEL {
                    let sx = reflect(x as isize + kx as isize - 1, w);
                    let src = &act[(sy * w + sx) * ch..][..ch];
                    row[(ky * PROBE_KERNEL + kx) * ch..][..ch].copy_from_slice(src);
                }
            }
        }
    }
    cols
}
