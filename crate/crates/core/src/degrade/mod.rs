//! Synthetic degradations following `LR = (HR ⊗ k)↓s + n`, plus a global
//! luminance offset.
//!
//! All intermediate work is in `f64` on the 0–255 scale; the pipeline
//! quantizes once at the end. Randomness for patch `i` comes from
//! [`patch_rng`]`(seed, i)`, so results do not depend on processing order.

pub mod kernel;
pub mod resize;
pub mod spec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SrgaError};
use crate::image::{FloatImage, ImagePatch};

pub use kernel::{BlurKernel, KERNEL_SIZE};
pub use spec::{AnisoParams, DegradationKind, DegradationSpec};

/// The random stream for patch `index` under `seed`.
///
/// ChaCha8 keyed by `seed_from_u64(seed)`, with the 64-bit stream id set to
/// the patch index. Per patch, draws happen in this order: anisotropic
/// kernel parameters (σ1, σ2, θ; only for per-patch random kernels), then
/// one standard normal per LR sample in (row, column, channel) order.
pub fn patch_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Blurs an HR patch with the kernel described by `spec`.
pub fn gaussian_blur(patch: &ImagePatch, spec: &DegradationSpec) -> Result<ImagePatch> {
    let kernel = blur_kernel::<ChaCha8Rng>(spec, None)?;
    Ok(kernel.apply(&patch.to_float())?.quantize())
}

/// Antialiased bicubic shrink by `scale`.
pub fn bicubic_downsample(patch: &ImagePatch, scale: usize) -> Result<ImagePatch> {
    Ok(resize::downsample(&patch.to_float(), scale)?.quantize())
}

/// Adds seeded Gaussian noise to an LR patch, then clamps and rounds.
pub fn add_noise(patch: &ImagePatch, spec: &DegradationSpec, patch_index: u64) -> Result<ImagePatch> {
    if !spec.kind.has_noise() {
        return Err(SrgaError::Parameter(format!("{:?} carries no noise", spec.kind)));
    }
    let level = noise_level(spec)?;
    if level == 0.0 {
        return Ok(patch.clone());
    }
    let mut img = patch.to_float();
    let mut rng = patch_rng(spec.seed, patch_index);
    add_noise_in_place(&mut img, level, &mut rng);
    Ok(img.quantize())
}

/// Adds `delta` to every sample, saturating at 0 and 255.
pub fn luminance_shift(patch: &ImagePatch, delta: f64) -> ImagePatch {
    let mut img = patch.to_float();
    img.data.iter_mut().for_each(|v| *v += delta);
    img.quantize()
}

fn noise_level(spec: &DegradationSpec) -> Result<f64> {
    match spec.noise_level {
        Some(l) if l >= 0.0 && l.is_finite() => Ok(l),
        Some(l) => Err(SrgaError::Parameter(format!("noise level must be >= 0, got {l}"))),
        None => Err(SrgaError::Parameter("noise level missing".into())),
    }
}

pub fn add_noise_in_place<R: Rng + ?Sized>(img: &mut FloatImage, level: f64, rng: &mut R) {
    for v in img.data.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *v += level * z;
    }
}

/// Kernel for `spec`. Per-patch random anisotropic kernels draw their
/// parameters from `rng`, which must then be supplied.
fn blur_kernel<R: Rng + ?Sized>(spec: &DegradationSpec, rng: Option<&mut R>) -> Result<BlurKernel> {
    match spec.kind {
        DegradationKind::IsoBlur | DegradationKind::BlurNoise => {
            BlurKernel::isotropic(spec.blur_width.unwrap_or(f64::NAN))
        }
        DegradationKind::AnisoBlur => match (spec.aniso, rng) {
            (Some(a), _) => BlurKernel::anisotropic(a.sigma1, a.sigma2, a.theta),
            (None, Some(rng)) => {
                let a = sample_aniso(rng);
                BlurKernel::anisotropic(a.sigma1, a.sigma2, a.theta)
            }
            (None, None) => Err(SrgaError::Parameter(
                "random anisotropic blur needs a per-patch random stream".into(),
            )),
        },
        other => Err(SrgaError::Parameter(format!("{other:?} is not a blur degradation"))),
    }
}

/// Draws PIES-AnisoBlur kernel parameters: both widths uniform in
/// [0.6, 5], rotation uniform in [0, π].
pub fn sample_aniso<R: Rng + ?Sized>(rng: &mut R) -> AnisoParams {
    let (lo, hi) = spec::ANISO_WIDTH_RANGE;
    let sigma1 = rng.random_range(lo..=hi);
    let sigma2 = rng.random_range(lo..=hi);
    let theta = rng.random_range(0.0..=std::f64::consts::PI);
    AnisoParams {
        sigma1,
        sigma2,
        theta,
    }
}

/// Runs the full pipeline on one HR patch, returning the unquantized LR.
pub fn degrade_float(hr: &ImagePatch, spec: &DegradationSpec, patch_index: u64) -> Result<FloatImage> {
    spec.validate()?;
    let mut rng = patch_rng(spec.seed, patch_index);
    let mut img = hr.to_float();
    if spec.kind.has_blur() {
        img = blur_kernel(spec, Some(&mut rng))?.apply(&img)?;
    }
    img = resize::downsample(&img, spec.scale)?;
    if spec.kind.has_noise() {
        let level = noise_level(spec)?;
        if level > 0.0 {
            add_noise_in_place(&mut img, level, &mut rng);
        }
    }
    if spec.lum_delta != 0.0 {
        img.data.iter_mut().for_each(|v| *v += spec.lum_delta);
    }
    Ok(img)
}

/// Runs the full pipeline on one HR patch and quantizes the LR result.
pub fn degrade(hr: &ImagePatch, spec: &DegradationSpec, patch_index: u64) -> Result<ImagePatch> {
    Ok(degrade_float(hr, spec, patch_index)?.quantize())
}
