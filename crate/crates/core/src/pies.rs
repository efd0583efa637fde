//! Patch-based evaluation set synthesis: HR patches cut from source images,
//! LR counterparts degraded per [`DegradationSpec`], and a JSON manifest.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::degrade::{self, DegradationSpec};
use crate::error::{Result, SrgaError};
use crate::image::{patch_origins, ImagePatch};

pub const HR_PATCH_SIZE: usize = 128;
pub const PATCHES_PER_SUBSET: usize = 800;
pub const MANIFEST_FILE: &str = "manifest.json";
/// Recorded in manifests: noise samples are drawn independently per channel.
pub const NOISE_MODEL: &str = "gaussian-iid-per-channel";

/// An HR patch and where it came from.
#[derive(Clone, Debug)]
pub struct SourcedPatch {
    pub patch: ImagePatch,
    pub source_image: String,
    pub source_offset: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub hr_path: String,
    pub lr_path: String,
    pub source_image: String,
    /// (x, y) of the patch's top-left corner in the source image.
    pub source_offset: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset_id: String,
    pub spec: DegradationSpec,
    pub seed: u64,
    pub scale: usize,
    pub noise_model: String,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        let raw = fs::read(path).map_err(|e| SrgaError::io(path, e))?;
        serde_json::from_slice(&raw).map_err(|e| SrgaError::Json {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut json = serde_json::to_vec_pretty(self).map_err(|e| SrgaError::Json {
            path: path.to_path_buf(),
            source: e,
        })?;
        json.push(b'\n');
        fs::write(path, json).map_err(|e| SrgaError::io(path, e))
    }
}

fn png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| SrgaError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("png"))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Cuts the first `count` non-overlapping HR patches from the PNGs in
/// `hr_dir`, visiting files in name order and patches in raster order.
pub fn collect_hr_patches(hr_dir: &Path, count: usize) -> Result<Vec<SourcedPatch>> {
    let mut out = Vec::with_capacity(count);
    if count == 0 {
        return Ok(out);
    }
    for file in png_files(hr_dir)? {
        let img = ImagePatch::load_png(&file)?;
        let name = file.file_name().unwrap_or_default().to_string_lossy().into_owned();
        for (x, y) in patch_origins(img.width(), img.height(), HR_PATCH_SIZE, HR_PATCH_SIZE) {
            out.push(SourcedPatch {
                patch: img.crop(x, y, HR_PATCH_SIZE, HR_PATCH_SIZE)?,
                source_image: name.clone(),
                source_offset: [x, y],
            });
            if out.len() == count {
                return Ok(out);
            }
        }
    }
    Err(SrgaError::Dimension(format!(
        "{} yields only {} HR patches of {HR_PATCH_SIZE}px, {count} requested",
        hr_dir.display(),
        out.len()
    )))
}

/// Degrades every HR patch; patch `i` uses random stream `i`.
pub fn degrade_all(hr: &[ImagePatch], spec: &DegradationSpec) -> Result<Vec<ImagePatch>> {
    spec.validate()?;
    hr.par_iter()
        .enumerate()
        .map(|(i, p)| degrade::degrade(p, spec, i as u64))
        .collect()
}

fn patch_name(i: usize) -> String {
    format!("{i:05}.png")
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| SrgaError::io(dir, e))
}

fn write_hr(dir: &Path, hr: &[SourcedPatch]) -> Result<()> {
    create_dir(dir)?;
    hr.par_iter()
        .enumerate()
        .try_for_each(|(i, p)| p.patch.save_png(&dir.join(patch_name(i))))
}

/// Writes LR patches for `spec` under `subset_dir/lr` and the manifest under
/// `subset_dir`. `hr_prefix` is the HR directory relative to `subset_dir`.
fn write_subset(
    subset_dir: &Path,
    hr_prefix: &str,
    hr: &[SourcedPatch],
    spec: &DegradationSpec,
) -> Result<Manifest> {
    let lr_dir = subset_dir.join("lr");
    create_dir(&lr_dir)?;
    let hr_patches: Vec<ImagePatch> = hr.iter().map(|p| p.patch.clone()).collect();
    let lr = degrade_all(&hr_patches, spec)?;
    lr.par_iter()
        .enumerate()
        .try_for_each(|(i, p)| p.save_png(&lr_dir.join(patch_name(i))))?;

    let entries = hr
        .iter()
        .enumerate()
        .map(|(i, p)| ManifestEntry {
            hr_path: format!("{hr_prefix}/{}", patch_name(i)),
            lr_path: format!("lr/{}", patch_name(i)),
            source_image: p.source_image.clone(),
            source_offset: p.source_offset,
        })
        .collect();
    let manifest = Manifest {
        dataset_id: spec.label(),
        spec: *spec,
        seed: spec.seed,
        scale: spec.scale,
        noise_model: NOISE_MODEL.to_string(),
        entries,
    };
    manifest.save(&subset_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Synthesizes one subset: `count` HR patches in `out_dir/hr`, their LR
/// versions in `out_dir/lr`, and `out_dir/manifest.json`.
pub fn synth_pies(hr_dir: &Path, out_dir: &Path, spec: &DegradationSpec, count: usize) -> Result<Manifest> {
    spec.validate()?;
    create_dir(out_dir)?;
    let hr = collect_hr_patches(hr_dir, count)?;
    write_hr(&out_dir.join("hr"), &hr)?;
    write_subset(out_dir, "hr", &hr, spec)
}

/// Synthesizes several subsets sharing one set of HR patches in
/// `out_dir/hr`; subset `s` goes to `out_dir/<s.label()>`.
pub fn synth_grid(
    hr_dir: &Path,
    out_dir: &Path,
    specs: &[DegradationSpec],
    count: usize,
) -> Result<Vec<Manifest>> {
    for s in specs {
        s.validate()?;
    }
    create_dir(out_dir)?;
    let hr = collect_hr_patches(hr_dir, count)?;
    write_hr(&out_dir.join("hr"), &hr)?;
    specs
        .iter()
        .map(|s| write_subset(&out_dir.join(s.label()), "../hr", &hr, s))
        .collect()
}

/// Loads the LR patches listed in a manifest, in manifest order.
pub fn load_lr(manifest_path: &Path) -> Result<Vec<ImagePatch>> {
    let manifest = Manifest::load(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    manifest
        .entries
        .par_iter()
        .map(|e| ImagePatch::load_png(&base.join(&e.lr_path)))
        .collect()
}

/// Loads every PNG in `dir`, sorted by file name.
pub fn load_png_dir(dir: &Path) -> Result<Vec<ImagePatch>> {
    png_files(dir)?.par_iter().map(|p| ImagePatch::load_png(p)).collect()
}
