//! Generalization assessment for super-resolution networks.
//!
//! Deep features of a network's outputs on two datasets are projected onto a
//! shared PCA basis, each projected set is summarized by a zero-mean
//! generalized Gaussian, and the closed-form KL divergence between the two
//! fits is mapped onto a bounded log index (SRGA). The same crate synthesizes
//! the controlled degradation datasets (PIES) and a fixed probe network that
//! stands in for a trained model.

pub mod degrade;
pub mod error;
pub mod featstore;
pub mod ggd;
pub mod harness;
pub mod image;
pub mod metric;
#[cfg(any(test, feature = "oracles"))]
pub mod oracle;
pub mod pca;
pub mod pies;
pub mod probe;
pub mod scene;
pub mod special;

pub use degrade::{degrade, DegradationKind, DegradationSpec};
pub use error::{Result, SrgaError};
pub use featstore::{read_feature_file, write_feature_file, FeatureMeta, FeatureSet};
pub use ggd::{fit_ggd, ggd_kld, GgdParams};
pub use harness::{run_content_split, run_jitter, run_sweep, CurvePoint, FeatureSource, FileSource, ProbeSource};
pub use image::{FloatImage, ImagePatch};
pub use metric::{compute_fdd, msrga, srga_index, FddResult, ScoreConfig, Scorer, SrgaReport};
pub use pca::{fit_pca, PcaMode, PcaProjection};
pub use pies::{synth_grid, synth_pies, Manifest};
pub use probe::ProbeNet;
