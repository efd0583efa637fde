//! Procedural HR source images for desk-scale experiments.
//!
//! A dead-leaves model: occluding discs whose radii follow a `r⁻³` power
//! law, painted back to front. The resulting images have scale-invariant
//! statistics and heavy-tailed gradients, close enough to natural photos for
//! exercising the degradation and feature pipelines.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, SrgaError};
use crate::image::{extract_patches, ImagePatch, CHANNELS};

#[derive(Clone, Copy, Debug)]
pub struct SceneParams {
    pub width: usize,
    pub height: usize,
    pub min_radius: f64,
    pub max_radius: f64,
    /// Discs per 100×100 pixels of canvas.
    pub density: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            width: 512,
            height: 512,
            min_radius: 1.5,
            max_radius: 120.0,
            density: 120.0,
        }
    }
}

/// Renders one scene. Image `index` under `seed` always yields the same pixels.
pub fn dead_leaves(params: &SceneParams, seed: u64, index: u64) -> ImagePatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let (w, h) = (params.width, params.height);
    let mut canvas = vec![0.0f64; w * h * CHANNELS];

    // Background: a smooth gradient.
    let bg: [f64; 3] = std::array::from_fn(|_| rng.random_range(40.0..200.0));
    let (gx, gy) = (rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
    for y in 0..h {
        for x in 0..w {
            for c in 0..CHANNELS {
                canvas[(y * w + x) * CHANNELS + c] = bg[c] + gx * x as f64 + gy * y as f64;
            }
        }
    }

    let count = ((w * h) as f64 / 1e4 * params.density).round() as usize;
    let inv_lo = params.min_radius.powi(-2);
    let inv_hi = params.max_radius.powi(-2);
    for _ in 0..count {
        let u: f64 = rng.random();
        let r = (inv_lo - u * (inv_lo - inv_hi)).powf(-0.5);
        let cx = rng.random_range(-r..w as f64 + r);
        let cy = rng.random_range(-r..h as f64 + r);
        let lum = rng.random_range(10.0..245.0);
        let tint: [f64; 3] = std::array::from_fn(|_| rng.random_range(-35.0..35.0));
        let shade = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let shade_gain = rng.random_range(0.0..40.0) / r.max(1.0);
        let texture = rng.random_range(0.0..6.0);
        let freq = rng.random_range(0.2..1.2);

        let x0 = (cx - r).floor().max(0.0) as usize;
        let x1 = ((cx + r).ceil() as isize).clamp(0, w as isize) as usize;
        let y0 = (cy - r).floor().max(0.0) as usize;
        let y1 = ((cy + r).ceil() as isize).clamp(0, h as isize) as usize;
        let r2 = r * r;
        for y in y0..y1 {
            let dy = y as f64 + 0.5 - cy;
            for x in x0..x1 {
                let dx = x as f64 + 0.5 - cx;
                if dx * dx + dy * dy > r2 {
                    continue;
                }
                let base = lum
                    + shade_gain * (shade.0 * dx + shade.1 * dy)
                    + texture * ((dx * freq).sin() * (dy * freq * 0.7).cos());
                for c in 0..CHANNELS {
                    canvas[(y * w + x) * CHANNELS + c] = base + tint[c];
                }
            }
        }
    }

    let data = canvas.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    ImagePatch::new(w, h, data).expect("canvas sized for the image")
}

/// Renders `count` scenes into `dir` as `scene_00000.png`, ... and returns
/// their paths.
pub fn write_scenes(dir: &Path, count: usize, params: &SceneParams, seed: u64) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| SrgaError::io(dir, e))?;
    (0..count)
        .map(|i| {
            let path = dir.join(format!("scene_{i:05}.png"));
            dead_leaves(params, seed, i as u64).save_png(&path)?;
            Ok(path)
        })
        .collect()
}

/// The first `count` non-overlapping `patch`-sized tiles of scenes 0, 1, ...
/// in raster order, without touching the disk.
pub fn scene_patches(params: &SceneParams, seed: u64, patch: usize, count: usize) -> Result<Vec<ImagePatch>> {
    let per_scene = (params.width / patch) * (params.height / patch);
    if per_scene == 0 && count > 0 {
        return Err(SrgaError::Dimension(format!(
            "{}x{} scenes hold no {patch}px patches",
            params.width, params.height
        )));
    }
    let scenes = count.div_ceil(per_scene.max(1));
    let mut out: Vec<ImagePatch> = (0..scenes as u64)
        .into_par_iter()
        .map(|i| extract_patches(&dead_leaves(params, seed, i), patch, patch))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    out.truncate(count);
    Ok(out)
}
