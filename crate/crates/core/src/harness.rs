//! Experiment drivers: degradation sweeps, luminance jitter, and content
//! splits, over any source of per-degradation feature sets.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::degrade::DegradationSpec;
use crate::error::{Result, SrgaError};
use crate::featstore::{read_feature_file, FeatureSet};
use crate::ggd::{fit_ggd, GgdParams};
use crate::image::{FloatImage, ImagePatch};
use crate::metric::{srga_index, FddResult, ScoreConfig, Scorer, SrgaReport};
use crate::pca::fit_pca;
use crate::pies::degrade_all;
use crate::probe::ProbeNet;

/// Subset sizes of the parameter convergence table.
pub const CONVERGENCE_SIZES: [usize; 5] = [50, 100, 200, 400, 800];

/// Anything that can produce features for a degradation of its content.
pub trait FeatureSource: Sync {
    fn model_id(&self) -> String;
    fn features(&self, spec: &DegradationSpec) -> Result<FeatureSet>;
}

/// The probe network applied to LR patches synthesized on the fly from a
/// fixed pool of HR patches.
pub struct ProbeSource {
    net: ProbeNet,
    hr: Vec<ImagePatch>,
}

impl ProbeSource {
    pub fn new(net: ProbeNet, hr: Vec<ImagePatch>) -> Self {
        ProbeSource { net, hr }
    }

    pub fn net(&self) -> &ProbeNet {
        &self.net
    }

    pub fn hr(&self) -> &[ImagePatch] {
        &self.hr
    }

    pub fn lr_patches(&self, spec: &DegradationSpec) -> Result<Vec<ImagePatch>> {
        degrade_all(&self.hr, spec)
    }

    /// Features of unquantized LR images whose intensities are multiplied
    /// by `gain` before entering the network.
    pub fn features_scaled(&self, spec: &DegradationSpec, gain: f64) -> Result<FeatureSet> {
        let lr: Vec<FloatImage> = self
            .hr
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut img = crate::degrade::degrade_float(p, spec, i as u64)?;
                img.data.iter_mut().for_each(|v| *v *= gain);
                Ok(img)
            })
            .collect::<Result<_>>()?;
        self.net.extract_features_float(&lr, &spec.label())
    }
}

impl FeatureSource for ProbeSource {
    fn model_id(&self) -> String {
        self.net.model_id()
    }

    fn features(&self, spec: &DegradationSpec) -> Result<FeatureSet> {
        let lr = self.lr_patches(spec)?;
        self.net.extract_features(&lr, &spec.label())
    }
}

/// Pre-exported feature files keyed by dataset label.
pub struct FileSource {
    model_id: String,
    files: BTreeMap<String, PathBuf>,
}

impl FileSource {
    pub fn new(model_id: &str, files: BTreeMap<String, PathBuf>) -> Self {
        FileSource {
            model_id: model_id.to_string(),
            files,
        }
    }

    /// Every `<label>.npy` in `dir`.
    pub fn from_dir(model_id: &str, dir: &Path) -> Result<Self> {
        let mut files = BTreeMap::new();
        for entry in std::fs::read_dir(dir).map_err(|e| SrgaError::io(dir, e))? {
            let path = entry.map_err(|e| SrgaError::io(dir, e))?.path();
            if path.extension().and_then(|e| e.to_str()) == Some("npy") {
                if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                    files.insert(stem.to_string(), path.clone());
                }
            }
        }
        Ok(FileSource::new(model_id, files))
    }
}

impl FeatureSource for FileSource {
    fn model_id(&self) -> String {
        self.model_id.clone()
    }

    fn features(&self, spec: &DegradationSpec) -> Result<FeatureSet> {
        let label = spec.label();
        let path = self
            .files
            .get(&label)
            .ok_or_else(|| SrgaError::Contract(format!("no feature file for subset '{label}'")))?;
        let mut set = read_feature_file(path)?;
        if set.meta.dataset_id == "unknown" {
            set.meta.dataset_id = label;
        }
        Ok(set)
    }
}

/// One point of a plot-ready curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub test_id: String,
    pub degradation_param: f64,
    pub srga: f64,
    pub fdd: f64,
    pub alpha: f64,
    pub sigma: f64,
}

impl CurvePoint {
    fn new(test_id: String, param: f64, r: &FddResult, delta: f64) -> Result<Self> {
        Ok(CurvePoint {
            test_id,
            degradation_param: param,
            srga: srga_index(r.fdd, delta)?,
            fdd: r.fdd,
            alpha: r.ggd_test.alpha,
            sigma: r.ggd_test.sigma,
        })
    }
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub report: SrgaReport,
    pub curve: Vec<CurvePoint>,
}

/// Formats a float with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `test_id,degradation_param,srga,fdd,alpha,sigma` rows.
pub fn write_curve_csv<W: Write>(mut out: W, points: &[CurvePoint]) -> std::io::Result<()> {
    writeln!(out, "test_id,degradation_param,srga,fdd,alpha,sigma")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            p.test_id,
            fmt_float(p.degradation_param),
            fmt_float(p.srga),
            fmt_float(p.fdd),
            fmt_float(p.alpha),
            fmt_float(p.sigma)
        )?;
    }
    Ok(())
}

/// Scores every test degradation against the reference degradation,
/// ordered by severity.
pub fn run_sweep(
    source: &dyn FeatureSource,
    ref_spec: &DegradationSpec,
    test_specs: &[DegradationSpec],
    cfg: &ScoreConfig,
) -> Result<SweepResult> {
    if test_specs.is_empty() {
        return Err(SrgaError::Contract("sweep needs at least one test degradation".into()));
    }
    let reference = source.features(ref_spec)?;
    sweep_against(source, &reference, test_specs, cfg)
}

/// [`run_sweep`] with precomputed reference features.
pub fn sweep_against(
    source: &dyn FeatureSource,
    reference: &FeatureSet,
    test_specs: &[DegradationSpec],
    cfg: &ScoreConfig,
) -> Result<SweepResult> {
    if test_specs.is_empty() {
        return Err(SrgaError::Contract("sweep needs at least one test degradation".into()));
    }
    let mut specs = test_specs.to_vec();
    specs.sort_by(|a, b| a.severity_key().partial_cmp(&b.severity_key()).expect("finite"));
    let scorer = Scorer::new(reference, *cfg)?;
    let ref_id = reference.meta.dataset_id.clone();
    let mut scored = Vec::with_capacity(specs.len());
    let mut curve = Vec::with_capacity(specs.len());
    for spec in &specs {
        let label = spec.label();
        if label == ref_id {
            return Err(SrgaError::Contract(format!(
                "reference dataset '{ref_id}' cannot also be a test dataset"
            )));
        }
        let test = source.features(spec)?;
        let r = scorer.score(&test)?;
        log::info!("{label}: fdd={:.6e} alpha={:.4} sigma={:.4}", r.fdd, r.ggd_test.alpha, r.ggd_test.sigma);
        curve.push(CurvePoint::new(label.clone(), spec.severity(), &r, cfg.delta)?);
        scored.push((label, r));
    }
    let report = SrgaReport::assemble(&source.model_id(), &ref_id, cfg, scored)?;
    Ok(SweepResult { report, curve })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JitterPoint {
    pub delta: f64,
    pub srga: f64,
    pub fdd: f64,
    pub alpha: f64,
    pub sigma: f64,
}

/// Scores `test_spec` with each global luminance offset against a fixed
/// reference.
pub fn run_jitter(
    source: &dyn FeatureSource,
    reference: &FeatureSet,
    test_spec: &DegradationSpec,
    deltas: &[f64],
    cfg: &ScoreConfig,
) -> Result<Vec<JitterPoint>> {
    if deltas.is_empty() {
        return Err(SrgaError::Contract("jitter needs at least one offset".into()));
    }
    let scorer = Scorer::new(reference, *cfg)?;
    deltas
        .iter()
        .map(|&d| {
            let spec = test_spec.with_lum_delta(test_spec.lum_delta + d);
            let r = scorer.score(&source.features(&spec)?)?;
            Ok(JitterPoint {
                delta: d,
                srga: srga_index(r.fdd, cfg.delta)?,
                fdd: r.fdd,
                alpha: r.ggd_test.alpha,
                sigma: r.ggd_test.sigma,
            })
        })
        .collect()
}

pub fn write_jitter_csv<W: Write>(mut out: W, points: &[JitterPoint]) -> std::io::Result<()> {
    writeln!(out, "delta,srga,fdd,alpha,sigma")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_float(p.delta),
            fmt_float(p.srga),
            fmt_float(p.fdd),
            fmt_float(p.alpha),
            fmt_float(p.sigma)
        )?;
    }
    Ok(())
}

/// Two disjoint, equally sized groups of tensor indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContentSplit {
    a: Vec<usize>,
    b: Vec<usize>,
}

impl ContentSplit {
    pub fn new(a: Vec<usize>, b: Vec<usize>) -> Result<Self> {
        if a.is_empty() || a.len() != b.len() {
            return Err(SrgaError::Contract(format!(
                "content subsets must be non-empty and equal in size ({} vs {})",
                a.len(),
                b.len()
            )));
        }
        let seen: std::collections::HashSet<usize> = a.iter().copied().collect();
        if seen.len() != a.len() || b.iter().collect::<std::collections::HashSet<_>>().len() != b.len() {
            return Err(SrgaError::Contract("content subset lists an index twice".into()));
        }
        if let Some(dup) = b.iter().find(|i| seen.contains(i)) {
            return Err(SrgaError::Contract(format!(
                "content subsets overlap (index {dup} in both)"
            )));
        }
        Ok(ContentSplit { a, b })
    }

    /// Shuffles `0..pool` with `seed` and takes two consecutive runs of
    /// `size` indices.
    pub fn random(pool: usize, size: usize, seed: u64) -> Result<Self> {
        if 2 * size > pool {
            return Err(SrgaError::Contract(format!(
                "cannot draw two disjoint subsets of {size} from {pool} items"
            )));
        }
        let order = shuffled(pool, seed);
        ContentSplit::new(order[..size].to_vec(), order[size..2 * size].to_vec())
    }

    pub fn a(&self) -> &[usize] {
        &self.a
    }

    pub fn b(&self) -> &[usize] {
        &self.b
    }
}

fn shuffled(pool: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..pool).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitOutcome {
    pub seed: Option<u64>,
    pub ggd_a: GgdParams,
    pub ggd_b: GgdParams,
    pub fdd: f64,
    pub srga: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub size: usize,
    pub alpha: f64,
    pub sigma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub seed: u64,
    pub rows: Vec<ConvergenceRow>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContentSplitReport {
    pub dataset_id: String,
    pub subset_size: usize,
    pub pairs: Vec<SplitOutcome>,
    pub convergence: Vec<ConvergenceTable>,
}

/// Pairwise index between the two halves of `split`, first half as the
/// reference.
pub fn score_split(features: &FeatureSet, split: &ContentSplit, cfg: &ScoreConfig) -> Result<FddResult> {
    let mut a = features.select(split.a())?;
    let mut b = features.select(split.b())?;
    a.meta.dataset_id = format!("{}[a]", features.meta.dataset_id);
    b.meta.dataset_id = format!("{}[b]", features.meta.dataset_id);
    Scorer::new(&a, *cfg)?.score(&b)
}

/// Fitted parameters on growing prefixes of `order`, all projected onto one
/// basis fitted on the whole set.
pub fn convergence_table(
    features: &FeatureSet,
    order: &[usize],
    sizes: &[usize],
    cfg: &ScoreConfig,
) -> Result<Vec<ConvergenceRow>> {
    let coords = full_set_coords(features, cfg)?;
    convergence_rows(&coords, order, sizes)
}

fn full_set_coords(features: &FeatureSet, cfg: &ScoreConfig) -> Result<Array2<f64>> {
    let dim = cfg.dim.min(features.len() - 1);
    let proj = fit_pca(features.flatten().view(), dim, &features.meta.dataset_id)?;
    Ok(proj.project(features.flatten().view())?.coords)
}

fn convergence_rows(coords: &Array2<f64>, order: &[usize], sizes: &[usize]) -> Result<Vec<ConvergenceRow>> {
    sizes
        .iter()
        .filter(|&&s| s <= order.len())
        .map(|&size| {
            let pooled: Vec<f64> = order[..size]
                .iter()
                .flat_map(|&i| coords.row(i).to_vec())
                .collect();
            let g = fit_ggd(&pooled)?;
            Ok(ConvergenceRow {
                size,
                alpha: g.alpha,
                sigma: g.sigma,
            })
        })
        .collect()
}

/// Content-insensitivity study for one degradation: pairwise indices over
/// random disjoint halves, and parameter convergence with subset size.
pub fn run_content_split(
    source: &dyn FeatureSource,
    spec: &DegradationSpec,
    split_seeds: &[u64],
    subset_size: usize,
    cfg: &ScoreConfig,
) -> Result<ContentSplitReport> {
    let features = source.features(spec)?;
    content_split_report(&features, split_seeds, subset_size, cfg)
}

/// [`run_content_split`] on precomputed features.
pub fn content_split_report(
    features: &FeatureSet,
    split_seeds: &[u64],
    subset_size: usize,
    cfg: &ScoreConfig,
) -> Result<ContentSplitReport> {
    if split_seeds.is_empty() {
        return Err(SrgaError::Contract("content split needs at least one seed".into()));
    }
    let coords = full_set_coords(features, cfg)?;
    let mut pairs = Vec::with_capacity(split_seeds.len());
    let mut convergence = Vec::with_capacity(split_seeds.len());
    for &seed in split_seeds {
        let split = ContentSplit::random(features.len(), subset_size, seed)?;
        let r = score_split(features, &split, cfg)?;
        pairs.push(SplitOutcome {
            seed: Some(seed),
            ggd_a: r.ggd_ref,
            ggd_b: r.ggd_test,
            fdd: r.fdd,
            srga: srga_index(r.fdd, cfg.delta)?,
        });
        let order = shuffled(features.len(), seed);
        convergence.push(ConvergenceTable {
            seed,
            rows: convergence_rows(&coords, &order, &CONVERGENCE_SIZES)?,
        });
    }
    Ok(ContentSplitReport {
        dataset_id: features.meta.dataset_id.clone(),
        subset_size,
        pairs,
        convergence,
    })
}
