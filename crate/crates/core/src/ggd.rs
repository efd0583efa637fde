//! Zero-mean generalized Gaussian distribution: density, moment-matching
//! estimator and closed-form Kullback-Leibler divergence.
//!
//! The density with shape `alpha` and scale `sigma` is
//!
//! ```text
//! p(x) = alpha / (2 beta Γ(1/alpha)) · exp(-(|x| / beta)^alpha)
//! beta = sigma · sqrt(Γ(1/alpha) / Γ(3/alpha))
//! ```
//!
//! so that `sigma` is the standard deviation. `alpha = 1` is Laplace and
//! `alpha = 2` is Gaussian. Every gamma-function evaluation goes through
//! [`ln_gamma`], since Γ(1/alpha) overflows near the lower end of the shape
//! range.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SrgaError};
use crate::special::ln_gamma;

/// Lower end of the shape search interval.
pub const ALPHA_MIN: f64 = 0.05;
/// Upper end of the shape search interval.
pub const ALPHA_MAX: f64 = 20.0;
/// Bisection stopping width for the shape estimate.
pub const ALPHA_TOL: f64 = 1e-8;
/// Below this many samples the moment estimates become unreliable.
pub const MIN_RECOMMENDED_SAMPLES: usize = 1000;

/// Fitted parameters of a zero-mean GGD.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GgdParams {
    pub alpha: f64,
    pub sigma: f64,
}

impl GgdParams {
    /// Validated constructor: `alpha` within the estimator range, `sigma`
    /// positive and finite.
    pub fn new(alpha: f64, sigma: f64) -> Result<Self> {
        let p = GgdParams { alpha, sigma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(ALPHA_MIN..=ALPHA_MAX).contains(&self.alpha) {
            return Err(SrgaError::Parameter(format!(
                "GGD shape {} outside [{ALPHA_MIN}, {ALPHA_MAX}]",
                self.alpha
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(SrgaError::Parameter(format!(
                "GGD scale must be positive and finite, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    /// ln β = ln σ + ½(lnΓ(1/α) − lnΓ(3/α)).
    pub fn ln_beta(&self) -> f64 {
        let a = self.alpha;
        self.sigma.ln() + 0.5 * (ln_gamma(1.0 / a) - ln_gamma(3.0 / a))
    }

    pub fn beta(&self) -> f64 {
        self.ln_beta().exp()
    }

    /// Log-density at `x`.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        let a = self.alpha;
        let ln_beta = self.ln_beta();
        let ln_norm = a.ln() - std::f64::consts::LN_2 - ln_beta - ln_gamma(1.0 / a);
        if x == 0.0 {
            return ln_norm;
        }
        ln_norm - (a * (x.abs().ln() - ln_beta)).exp()
    }

    /// Density at `x`.
    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// Draws `n` samples using the gamma representation: if `g ~ Gamma(1/α, 1)`
    /// then `±β g^(1/α)` is GGD distributed.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        let inv_a = 1.0 / self.alpha;
        let beta = self.beta();
        let gamma = Gamma::new(inv_a, 1.0).expect("shape validated positive");
        (0..n)
            .map(|_| {
                let mag = beta * gamma.sample(rng).powf(inv_a);
                if rng.random::<bool>() {
                    mag
                } else {
                    -mag
                }
            })
            .collect()
    }
}

/// Generalized Gaussian ratio function
/// `r(α) = Γ(2/α)² / (Γ(1/α) Γ(3/α))`, the population value of
/// `(E|x|)² / E[x²]`. Strictly increasing, with range inside (0, 3/4).
pub fn ratio_fn(alpha: f64) -> f64 {
    let inv = 1.0 / alpha;
    (2.0 * ln_gamma(2.0 * inv) - ln_gamma(inv) - ln_gamma(3.0 * inv)).exp()
}

/// Moment-matching fit of a zero-mean GGD to pooled samples.
///
/// The scale is the root mean square. The shape solves
/// `ratio_fn(α) = mean(|x|)² / mean(x²)` by bisection over
/// [`ALPHA_MIN`, `ALPHA_MAX`]. The sample mean is not subtracted: callers
/// feed PCA coefficients, which are already centered.
pub fn fit_ggd(samples: &[f64]) -> Result<GgdParams> {
    if samples.is_empty() {
        return Err(SrgaError::Degenerate("no samples".into()));
    }
    if samples.len() < MIN_RECOMMENDED_SAMPLES {
        log::warn!(
            "fitting a GGD to only {} samples (>= {MIN_RECOMMENDED_SAMPLES} recommended)",
            samples.len()
        );
    }
    let n = samples.len() as f64;
    let (mut sum, mut sum_abs, mut sum_sq) = (0.0_f64, 0.0_f64, 0.0_f64);
    for &x in samples {
        if !x.is_finite() {
            return Err(SrgaError::Data(format!("non-finite sample {x}")));
        }
        sum += x;
        sum_abs += x.abs();
        sum_sq += x * x;
    }
    let mean = sum / n;
    let mean_abs = sum_abs / n;
    let mean_sq = sum_sq / n;
    let first = samples[0];
    if mean_sq == 0.0 || samples.iter().all(|&x| x == first) {
        return Err(SrgaError::Degenerate(
            "all samples are equal; scale would be zero or undefined".into(),
        ));
    }
    let sigma = mean_sq.sqrt();
    if mean.abs() > 1e-3 * sigma {
        log::warn!("samples are not centered: mean {mean:e} vs scale {sigma:e}");
    }
    let target = mean_abs * mean_abs / mean_sq;
    let alpha = invert_ratio(target);
    Ok(GgdParams { alpha, sigma })
}

/// Solves `ratio_fn(α) = target` on the search interval, clamping targets
/// outside the attainable range to the nearest bound.
pub fn invert_ratio(target: f64) -> f64 {
    let (mut lo, mut hi) = (ALPHA_MIN, ALPHA_MAX);
    let (r_lo, r_hi) = (ratio_fn(lo), ratio_fn(hi));
    if target <= r_lo {
        log::warn!("moment ratio {target} below r({ALPHA_MIN}); clamping shape");
        return lo;
    }
    if target >= r_hi {
        log::warn!("moment ratio {target} above r({ALPHA_MAX}); clamping shape");
        return hi;
    }
    while hi - lo > ALPHA_TOL {
        let mid = 0.5 * (lo + hi);
        if ratio_fn(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Residues down to this magnitude below zero are floating-point noise.
const KLD_NEGATIVE_SLACK: f64 = 1e-12;

/// Closed-form KL divergence `D(p || q)` between two zero-mean GGDs.
///
/// ```text
/// D = ln[α1 σ2 Γ(1/α2) √(Γ(1/α2)Γ(3/α1)) / (α2 σ1 Γ(1/α1) √(Γ(1/α1)Γ(3/α2)))]
///   + (σ1 √(Γ(1/α1)Γ(3/α2)) / (σ2 √(Γ(1/α2)Γ(3/α1))))^α2 · Γ((α2+1)/α1) / Γ(1/α1)
///   − 1/α1
/// ```
///
/// The bracketed ratio inside the power is β1/β2, so the result depends on
/// the scales only through σ1/σ2.
pub fn ggd_kld(p: &GgdParams, q: &GgdParams) -> Result<f64> {
    p.validate()?;
    q.validate()?;
    if p == q {
        // Exact zero instead of the rounding residue of the closed form.
        return Ok(0.0);
    }
    let (a1, a2) = (p.alpha, q.alpha);
    let (lg1_1, lg3_1) = (ln_gamma(1.0 / a1), ln_gamma(3.0 / a1));
    let (lg1_2, lg3_2) = (ln_gamma(1.0 / a2), ln_gamma(3.0 / a2));
    let ln_scale_ratio = p.sigma.ln() - q.sigma.ln();

    let log_term = a1.ln() - a2.ln() - ln_scale_ratio + lg1_2 - lg1_1
        + 0.5 * (lg1_2 + lg3_1 - lg1_1 - lg3_2);
    let ln_beta_ratio = ln_scale_ratio + 0.5 * (lg1_1 + lg3_2 - lg1_2 - lg3_1);
    let moment_term = (a2 * ln_beta_ratio + ln_gamma((a2 + 1.0) / a1) - lg1_1).exp();
    let d = log_term + moment_term - 1.0 / a1;

    if !d.is_finite() {
        return Err(SrgaError::Numeric(format!(
            "KL divergence overflowed for {p:?} vs {q:?}"
        )));
    }
    if d < -KLD_NEGATIVE_SLACK {
        return Err(SrgaError::Numeric(format!(
            "KL divergence {d:e} is negative for {p:?} vs {q:?}"
        )));
    }
    Ok(d.max(0.0))
}
