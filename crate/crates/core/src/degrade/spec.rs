//! Degradation recipes, their `kind:params` text form, and the preset grids
//! that make up the PIES subsets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SrgaError};

/// Default super-resolution factor.
pub const DEFAULT_SCALE: usize = 4;

/// Isotropic blur widths of the PIES-Blur subsets.
pub const BLUR_PRESETS: [f64; 16] = [
    0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0, 5.5, 6.0, 6.5, 7.0, 7.5, 8.0,
];
/// Noise levels of the PIES-Noise subsets (0–255 scale).
pub const NOISE_PRESETS: [f64; 10] = [5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0, 45.0, 50.0];
/// Blur widths crossed with [`BLURNOISE_LEVELS`] in PIES-BlurNoise.
pub const BLURNOISE_WIDTHS: [f64; 4] = [1.0, 2.0, 4.0, 6.0];
pub const BLURNOISE_LEVELS: [f64; 3] = [10.0, 20.0, 30.0];
/// Range of per-patch anisotropic kernel widths in PIES-AnisoBlur.
pub const ANISO_WIDTH_RANGE: (f64, f64) = (0.6, 5.0);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DegradationKind {
    Clean,
    IsoBlur,
    AnisoBlur,
    Noise,
    BlurNoise,
    LuminanceShift,
}

impl DegradationKind {
    pub fn has_blur(self) -> bool {
        matches!(
            self,
            DegradationKind::IsoBlur | DegradationKind::AnisoBlur | DegradationKind::BlurNoise
        )
    }

    pub fn has_noise(self) -> bool {
        matches!(self, DegradationKind::Noise | DegradationKind::BlurNoise)
    }
}

/// Widths (pixels) and rotation (radians) of an anisotropic Gaussian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnisoParams {
    pub sigma1: f64,
    pub sigma2: f64,
    pub theta: f64,
}

/// A degradation recipe. The pipeline is blur (HR) → bicubic ↓scale →
/// noise (LR) → luminance shift (LR).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    pub kind: DegradationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blur_width: Option<f64>,
    /// Fixed anisotropic kernel; `None` with `AnisoBlur` draws one per patch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aniso: Option<AnisoParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_level: Option<f64>,
    #[serde(default)]
    pub lum_delta: f64,
    pub scale: usize,
    pub seed: u64,
}

impl DegradationSpec {
    fn base(kind: DegradationKind) -> Self {
        DegradationSpec {
            kind,
            blur_width: None,
            aniso: None,
            noise_level: None,
            lum_delta: 0.0,
            scale: DEFAULT_SCALE,
            seed: 0,
        }
    }

    pub fn clean() -> Self {
        Self::base(DegradationKind::Clean)
    }

    pub fn iso_blur(width: f64) -> Self {
        DegradationSpec {
            blur_width: Some(width),
            ..Self::base(DegradationKind::IsoBlur)
        }
    }

    pub fn aniso_blur(sigma1: f64, sigma2: f64, theta: f64) -> Self {
        DegradationSpec {
            aniso: Some(AnisoParams {
                sigma1,
                sigma2,
                theta,
            }),
            ..Self::base(DegradationKind::AnisoBlur)
        }
    }

    /// PIES-AnisoBlur: a fresh random kernel per patch.
    pub fn aniso_random() -> Self {
        Self::base(DegradationKind::AnisoBlur)
    }

    pub fn noise(level: f64) -> Self {
        DegradationSpec {
            noise_level: Some(level),
            ..Self::base(DegradationKind::Noise)
        }
    }

    pub fn blur_noise(width: f64, level: f64) -> Self {
        DegradationSpec {
            blur_width: Some(width),
            noise_level: Some(level),
            ..Self::base(DegradationKind::BlurNoise)
        }
    }

    pub fn luminance(delta: f64) -> Self {
        DegradationSpec {
            lum_delta: delta,
            ..Self::base(DegradationKind::LuminanceShift)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Adds a global luminance offset on top of any other degradation.
    pub fn with_lum_delta(mut self, delta: f64) -> Self {
        self.lum_delta = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: Option<f64>| -> Result<()> {
            match v {
                Some(x) if x > 0.0 && x.is_finite() => Ok(()),
                Some(x) => Err(SrgaError::Parameter(format!("{name} must be positive, got {x}"))),
                None => Err(SrgaError::Parameter(format!("{name} missing for {:?}", self.kind))),
            }
        };
        match self.kind {
            DegradationKind::IsoBlur => positive("blur width", self.blur_width)?,
            DegradationKind::BlurNoise => positive("blur width", self.blur_width)?,
            DegradationKind::AnisoBlur => {
                if let Some(a) = self.aniso {
                    positive("anisotropic width", Some(a.sigma1))?;
                    positive("anisotropic width", Some(a.sigma2))?;
                    if !a.theta.is_finite() {
                        return Err(SrgaError::Parameter("rotation must be finite".into()));
                    }
                }
            }
            _ => {}
        }
        if self.kind.has_noise() {
            match self.noise_level {
                Some(l) if l >= 0.0 && l.is_finite() => {}
                Some(l) => {
                    return Err(SrgaError::Parameter(format!("noise level must be >= 0, got {l}")))
                }
                None => return Err(SrgaError::Parameter("noise level missing".into())),
            }
        }
        if !self.lum_delta.is_finite() {
            return Err(SrgaError::Parameter("luminance offset must be finite".into()));
        }
        if self.scale == 0 {
            return Err(SrgaError::Parameter("scale must be positive".into()));
        }
        Ok(())
    }

    /// Short identifier used for dataset ids and directory names, e.g.
    /// `clean`, `blur2`, `noise30`, `blurnoise4-20`, `blur2_lum+10`.
    pub fn label(&self) -> String {
        let base = match self.kind {
            DegradationKind::Clean => "clean".to_string(),
            DegradationKind::IsoBlur => format!("blur{}", self.blur_width.unwrap_or(0.0)),
            DegradationKind::AnisoBlur => match self.aniso {
                Some(a) => format!("aniso{}-{}-{}", a.sigma1, a.sigma2, a.theta),
                None => "aniso".to_string(),
            },
            DegradationKind::Noise => format!("noise{}", self.noise_level.unwrap_or(0.0)),
            DegradationKind::BlurNoise => format!(
                "blurnoise{}-{}",
                self.blur_width.unwrap_or(0.0),
                self.noise_level.unwrap_or(0.0)
            ),
            DegradationKind::LuminanceShift => return format!("lum{:+}", self.lum_delta),
        };
        if self.lum_delta != 0.0 {
            format!("{base}_lum{:+}", self.lum_delta)
        } else {
            base
        }
    }

    /// The scalar that orders a sweep: blur width, noise level, or offset.
    pub fn severity(&self) -> f64 {
        match self.kind {
            DegradationKind::Clean => 0.0,
            DegradationKind::IsoBlur | DegradationKind::BlurNoise => self.blur_width.unwrap_or(0.0),
            DegradationKind::AnisoBlur => self.aniso.map_or(0.0, |a| a.sigma1.max(a.sigma2)),
            DegradationKind::Noise => self.noise_level.unwrap_or(0.0),
            DegradationKind::LuminanceShift => self.lum_delta,
        }
    }

    /// Total order used to sort sweeps: preset family, then parameters.
    pub fn severity_key(&self) -> (DegradationKind, f64, f64, f64) {
        let secondary = match self.kind {
            DegradationKind::BlurNoise => self.noise_level.unwrap_or(0.0),
            DegradationKind::AnisoBlur => self.aniso.map_or(0.0, |a| a.sigma1.min(a.sigma2)),
            _ => 0.0,
        };
        (self.kind, self.severity(), secondary, self.lum_delta)
    }
}

impl fmt::Display for DegradationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            DegradationKind::Clean => write!(f, "clean")?,
            DegradationKind::IsoBlur => write!(f, "blur:{}", self.blur_width.unwrap_or(0.0))?,
            DegradationKind::AnisoBlur => match self.aniso {
                Some(a) => write!(f, "aniso:{},{},{}", a.sigma1, a.sigma2, a.theta)?,
                None => write!(f, "aniso")?,
            },
            DegradationKind::Noise => write!(f, "noise:{}", self.noise_level.unwrap_or(0.0))?,
            DegradationKind::BlurNoise => write!(
                f,
                "blurnoise:{},{}",
                self.blur_width.unwrap_or(0.0),
                self.noise_level.unwrap_or(0.0)
            )?,
            DegradationKind::LuminanceShift => return write!(f, "lum:{:+}", self.lum_delta),
        }
        if self.lum_delta != 0.0 {
            write!(f, "/lum:{:+}", self.lum_delta)?;
        }
        Ok(())
    }
}

const KIND_NAMES: [&str; 6] = ["clean", "blur", "aniso", "noise", "blurnoise", "lum"];

impl FromStr for DegradationSpec {
    type Err = SrgaError;

    /// Parses `clean`, `blur:W`, `aniso`, `aniso:S1,S2,THETA`, `noise:L`,
    /// `blurnoise:W,L`, `lum:±D`, optionally followed by `/lum:±D`.
    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let (main, lum) = match text.split_once('/') {
            Some((m, l)) => (m, Some(l)),
            None => (text, None),
        };
        let (name, args) = match main.split_once(':') {
            Some((n, a)) => (n.trim().to_ascii_lowercase(), Some(a)),
            None => (main.trim().to_ascii_lowercase(), None),
        };
        let nums = |expected: usize| -> Result<Vec<f64>> {
            let raw = args.ok_or_else(|| {
                SrgaError::Parameter(format!("'{name}' needs {expected} parameter(s): '{text}'"))
            })?;
            let vals = raw
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| SrgaError::Parameter(format!("non-numeric parameter in '{text}'")))?;
            if vals.len() != expected {
                return Err(SrgaError::Parameter(format!(
                    "'{name}' takes {expected} parameter(s), got {} in '{text}'",
                    vals.len()
                )));
            }
            Ok(vals)
        };
        let spec = match name.as_str() {
            "clean" if args.is_none() => DegradationSpec::clean(),
            "blur" => DegradationSpec::iso_blur(nums(1)?[0]),
            "aniso" if args.is_none() => DegradationSpec::aniso_random(),
            "aniso" => {
                let v = nums(3)?;
                DegradationSpec::aniso_blur(v[0], v[1], v[2])
            }
            "noise" => DegradationSpec::noise(nums(1)?[0]),
            "blurnoise" => {
                let v = nums(2)?;
                DegradationSpec::blur_noise(v[0], v[1])
            }
            "lum" => DegradationSpec::luminance(nums(1)?[0]),
            "clean" => {
                return Err(SrgaError::Parameter(format!("'clean' takes no parameters: '{text}'")))
            }
            other => {
                let hint = suggest(other)
                    .map(|s| format!("; did you mean '{s}'?"))
                    .unwrap_or_default();
                return Err(SrgaError::Parameter(format!(
                    "unknown degradation '{other}' (known: {}){hint}",
                    KIND_NAMES.join(", ")
                )));
            }
        };
        let spec = match lum {
            Some(l) => {
                let l = l.trim();
                let delta = l
                    .strip_prefix("lum:")
                    .and_then(|d| d.trim().parse::<f64>().ok())
                    .ok_or_else(|| SrgaError::Parameter(format!("bad luminance suffix '{l}'")))?;
                spec.with_lum_delta(delta)
            }
            None => spec,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Closest known kind name by edit distance, if reasonably close.
fn suggest(name: &str) -> Option<&'static str> {
    KIND_NAMES
        .iter()
        .map(|k| (levenshtein(name, k), *k))
        .min()
        .filter(|(d, _)| *d <= 3)
        .map(|(_, k)| k)
}

fn levenshtein(a: &str, b: &str) -> usize {
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.chars().enumerate() {
        let mut cur = vec![i + 1; b.len() + 1];
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        prev = cur;
    }
    prev[b.len()]
}

/// The 16 PIES-Blur subsets, mildest first.
pub fn blur_grid() -> Vec<DegradationSpec> {
    BLUR_PRESETS.iter().map(|&w| DegradationSpec::iso_blur(w)).collect()
}

/// The 10 PIES-Noise subsets.
pub fn noise_grid() -> Vec<DegradationSpec> {
    NOISE_PRESETS.iter().map(|&l| DegradationSpec::noise(l)).collect()
}

/// The 4×3 PIES-BlurNoise subsets.
pub fn blurnoise_grid() -> Vec<DegradationSpec> {
    BLURNOISE_WIDTHS
        .iter()
        .flat_map(|&w| BLURNOISE_LEVELS.iter().map(move |&l| DegradationSpec::blur_noise(w, l)))
        .collect()
}

/// Every synthetic preset: clean, blur, aniso, noise, blur+noise.
pub fn all_presets() -> Vec<DegradationSpec> {
    let mut out = vec![DegradationSpec::clean()];
    out.extend(blur_grid());
    out.push(DegradationSpec::aniso_random());
    out.extend(noise_grid());
    out.extend(blurnoise_grid());
    out
}

/// Whether `spec` (ignoring seed) is one of the PIES presets.
pub fn is_preset(spec: &DegradationSpec) -> bool {
    all_presets().contains(&DegradationSpec { seed: 0, ..*spec })
}

/// One line per preset family, for help text.
pub fn preset_help() -> String {
    let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
    format!(
        "PIES presets:\n  clean\n  blur:W        W in {{{}}}  (16 subsets)\n  aniso         per-patch widths in [{}, {}], rotation in [0, pi]\n  noise:L       L in {{{}}}  (10 subsets)\n  blurnoise:W,L W in {{{}}}, L in {{{}}}  (12 subsets)\nAlso accepted: aniso:S1,S2,THETA, lum:+D, and a '/lum:+D' suffix on any spec.",
        list(&BLUR_PRESETS),
        ANISO_WIDTH_RANGE.0,
        ANISO_WIDTH_RANGE.1,
        list(&NOISE_PRESETS),
        list(&BLURNOISE_WIDTHS),
        list(&BLURNOISE_LEVELS),
    )
}
