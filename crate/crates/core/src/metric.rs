//! Feature distribution distance, the SRGA index and its mean, and PSNR.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SrgaError};
use crate::featstore::FeatureSet;
use crate::ggd::{fit_ggd, ggd_kld, GgdParams};
use crate::image::ImagePatch;
use crate::pca::{fit_pca, PcaMode, PcaProjection};

/// Log-shift constant of the index.
pub const DEFAULT_DELTA: f64 = 5.0;
/// Number of principal components kept.
pub const DEFAULT_DIM: usize = 300;
/// PSNR reported for identical images.
pub const PSNR_CAP_DB: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreConfig {
    pub dim: usize,
    pub delta: f64,
    pub pca_mode: PcaMode,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            dim: DEFAULT_DIM,
            delta: DEFAULT_DELTA,
            pca_mode: PcaMode::Ref,
        }
    }
}

/// `log10(fdd + 10^-delta) + delta`.
pub fn srga_index(fdd: f64, delta: f64) -> Result<f64> {
    if !fdd.is_finite() || fdd < 0.0 {
        return Err(SrgaError::Contract(format!("FDD must be finite and >= 0, got {fdd}")));
    }
    Ok((fdd + 10f64.powf(-delta)).log10() + delta)
}

/// Arithmetic mean of per-dataset indices.
pub fn msrga(indices: &[f64]) -> Result<f64> {
    if indices.is_empty() {
        return Err(SrgaError::Contract("mSRGA needs at least one test dataset".into()));
    }
    Ok(indices.iter().sum::<f64>() / indices.len() as f64)
}

/// Peak signal-to-noise ratio over all samples, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &ImagePatch, b: &ImagePatch) -> Result<f64> {
    if (a.width(), a.height()) != (b.width(), b.height()) {
        return Err(SrgaError::Dimension(format!(
            "PSNR of {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let sse: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| (f64::from(x) - f64::from(y)).powi(2))
        .sum();
    if sse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    let mse = sse / a.data().len() as f64;
    Ok((10.0 * (255.0f64 * 255.0 / mse).log10()).min(PSNR_CAP_DB))
}

/// Outcome of comparing one test dataset against the reference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FddResult {
    pub fdd: f64,
    pub ggd_ref: GgdParams,
    pub ggd_test: GgdParams,
}

/// GGD fitted to the pooled coordinates of `set` in the basis `proj`.
pub fn fit_projected(proj: &PcaProjection, set: &FeatureSet) -> Result<GgdParams> {
    let x = proj.project(set.flatten().view())?;
    fit_ggd(x.pooled())
}

/// Scores test datasets against one reference, caching whatever the PCA
/// mode allows to be reused.
pub struct Scorer<'a> {
    cfg: ScoreConfig,
    reference: &'a FeatureSet,
    ref_projection: Option<PcaProjection>,
    ref_ggd: Option<GgdParams>,
}

impl<'a> Scorer<'a> {
    pub fn new(reference: &'a FeatureSet, cfg: ScoreConfig) -> Result<Self> {
        let id = &reference.meta.dataset_id;
        let (ref_projection, ref_ggd) = match cfg.pca_mode {
            PcaMode::Ref => {
                let proj = fit_pca(reference.flatten().view(), cfg.dim, id)?;
                let ggd = fit_projected(&proj, reference)?;
                (Some(proj), Some(ggd))
            }
            PcaMode::PerDataset => {
                let proj = fit_pca(reference.flatten().view(), cfg.dim, id)?;
                (None, Some(fit_projected(&proj, reference)?))
            }
            PcaMode::Joint => (None, None),
        };
        Ok(Scorer {
            cfg,
            reference,
            ref_projection,
            ref_ggd,
        })
    }

    pub fn config(&self) -> &ScoreConfig {
        &self.cfg
    }

    pub fn reference(&self) -> &FeatureSet {
        self.reference
    }

    /// The reference projection, available in `ref` mode.
    pub fn projection(&self) -> Option<&PcaProjection> {
        self.ref_projection.as_ref()
    }

    pub fn score(&self, test: &FeatureSet) -> Result<FddResult> {
        if test.shape()[1..] != self.reference.shape()[1..] {
            return Err(SrgaError::Contract(format!(
                "feature maps differ: reference {:?} vs test {:?}",
                &self.reference.shape()[1..],
                &test.shape()[1..]
            )));
        }
        let (ggd_ref, ggd_test) = match self.cfg.pca_mode {
            PcaMode::Ref => {
                let proj = self.ref_projection.as_ref().expect("fitted in ref mode");
                (self.ref_ggd.expect("fitted in ref mode"), fit_projected(proj, test)?)
            }
            PcaMode::PerDataset => {
                let proj = fit_pca(test.flatten().view(), self.cfg.dim, &test.meta.dataset_id)?;
                (self.ref_ggd.expect("fitted in per-dataset mode"), fit_projected(&proj, test)?)
            }
            PcaMode::Joint => {
                let joint = self.reference.concat(test)?;
                let proj = fit_pca(joint.flatten().view(), self.cfg.dim, &joint.meta.dataset_id)?;
                drop(joint);
                (fit_projected(&proj, self.reference)?, fit_projected(&proj, test)?)
            }
        };
        let fdd = ggd_kld(&ggd_ref, &ggd_test)?;
        Ok(FddResult {
            fdd,
            ggd_ref,
            ggd_test,
        })
    }
}

/// One-shot FDD between a reference and a test feature set.
pub fn compute_fdd(reference: &FeatureSet, test: &FeatureSet, cfg: &ScoreConfig) -> Result<FddResult> {
    Scorer::new(reference, *cfg)?.score(test)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrgaEntry {
    pub test_id: String,
    pub fdd: f64,
    pub srga: f64,
    pub ggd_ref: GgdParams,
    pub ggd_test: GgdParams,
}

/// Per-dataset indices against one reference plus their mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrgaReport {
    pub model_id: String,
    pub reference_id: String,
    pub delta: f64,
    pub dim: usize,
    pub pca_mode: PcaMode,
    pub entries: Vec<SrgaEntry>,
    pub msrga: f64,
}

impl SrgaReport {
    /// Builds a report from scored datasets, rejecting the reference among
    /// the tests.
    pub fn assemble(
        model_id: &str,
        reference_id: &str,
        cfg: &ScoreConfig,
        scored: Vec<(String, FddResult)>,
    ) -> Result<SrgaReport> {
        let entries = scored
            .into_iter()
            .map(|(test_id, r)| {
                if test_id == reference_id {
                    return Err(SrgaError::Contract(format!(
                        "reference dataset '{reference_id}' cannot also be a test dataset"
                    )));
                }
                Ok(SrgaEntry {
                    srga: srga_index(r.fdd, cfg.delta)?,
                    test_id,
                    fdd: r.fdd,
                    ggd_ref: r.ggd_ref,
                    ggd_test: r.ggd_test,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let values: Vec<f64> = entries.iter().map(|e| e.srga).collect();
        Ok(SrgaReport {
            model_id: model_id.to_string(),
            reference_id: reference_id.to_string(),
            delta: cfg.delta,
            dim: cfg.dim,
            pca_mode: cfg.pca_mode,
            msrga: msrga(&values)?,
            entries,
        })
    }

    /// Checks the stored indices and mean against the stored FDDs.
    pub fn verify(&self) -> Result<()> {
        for e in &self.entries {
            if e.test_id == self.reference_id {
                return Err(SrgaError::Contract("reference listed among entries".into()));
            }
            if srga_index(e.fdd, self.delta)?.to_bits() != e.srga.to_bits() {
                return Err(SrgaError::Contract(format!("stale SRGA for '{}'", e.test_id)));
            }
        }
        let values: Vec<f64> = self.entries.iter().map(|e| e.srga).collect();
        if msrga(&values)?.to_bits() != self.msrga.to_bits() {
            return Err(SrgaError::Contract("stale mSRGA".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }
}
