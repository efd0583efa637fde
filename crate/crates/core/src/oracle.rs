//! Independent reference computations used to check the production paths.
//!
//! Nothing here shares code with the implementations it checks: its own
//! log-gamma, adaptive quadrature, a cyclic Jacobi eigensolver, a direct 2-D
//! resampling sum, and a loop-nest convolution.

use crate::ggd::GgdParams;
use crate::image::{FloatImage, CHANNELS};
use crate::probe::{ProbeNet, PROBE_CHANNELS};

/// Stirling series after shifting the argument above 15.
pub fn ln_gamma_stirling(x: f64) -> f64 {
    assert!(x > 0.0);
    let mut shift = 0.0;
    let mut z = x;
    while z < 15.0 {
        shift += z.ln();
        z += 1.0;
    }
    let z2 = 1.0 / (z * z);
    let series = (1.0 / 12.0
        - z2 * (1.0 / 360.0 - z2 * (1.0 / 1260.0 - z2 * (1.0 / 1680.0 - z2 * (1.0 / 1188.0)))))
        / z;
    (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + series - shift
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Globally adaptive Gauss–Kronrod (7/15) integral of `f` over `[a, b]`.
///
/// Repeatedly bisects the interval with the largest error estimate until the
/// summed estimate drops below `tol` (absolute) or `tol·|I|`, whichever is
/// larger, or until 4000 subintervals exist.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let (v, e) = gk15(f, a, b);
    let mut parts = vec![(a, b, v, e)];
    loop {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if err <= tol.max(tol * total.abs()) || parts.len() >= 4000 {
            return total;
        }
        let worst = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.partial_cmp(&y.1 .3).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}

fn ggd_ln_pdf(g: &GgdParams, x: f64) -> f64 {
    let (a, s) = (g.alpha, g.sigma);
    let ln_beta = s.ln() + 0.5 * (ln_gamma_stirling(1.0 / a) - ln_gamma_stirling(3.0 / a));
    a.ln() - std::f64::consts::LN_2 - ln_beta - ln_gamma_stirling(1.0 / a) - (x.abs() / ln_beta.exp()).powf(a)
}

/// Integrates `g(x)·p(x)` over the real line for symmetric `g`, using the
/// substitution `x = β·e^t` so both the cusp and the tail are resolved.
fn symmetric_expectation(p: &GgdParams, g: &dyn Fn(f64) -> f64) -> f64 {
    let beta = p.sigma
        * ((ln_gamma_stirling(1.0 / p.alpha) - ln_gamma_stirling(3.0 / p.alpha)) / 2.0).exp();
    // exp(-e^(α t)) underflows once α t exceeds ln(745).
    let t_hi = 745f64.ln() / p.alpha + 1.0;
    let t_lo = -40.0 / p.alpha.min(1.0);
    let f = |t: f64| {
        let x = beta * t.exp();
        let lp = ggd_ln_pdf(p, x);
        if lp < -745.0 {
            0.0
        } else {
            lp.exp() * g(x) * x
        }
    };
    // Split at the mode of the integrand region to help the adaptive rule.
    let mut total = 0.0;
    let edges = [t_lo, -5.0, -1.0, 0.0, 1.0, t_hi.max(1.5)];
    for w in edges.windows(2) {
        if w[1] > w[0] {
            total += integrate(&f, w[0], w[1], 1e-13);
        }
    }
    2.0 * total
}

/// KL(p‖q) by numerical quadrature.
pub fn kld_quadrature(p: &GgdParams, q: &GgdParams) -> f64 {
    symmetric_expectation(p, &|x| ggd_ln_pdf(p, x) - ggd_ln_pdf(q, x))
}

/// ∫ p(x) dx by numerical quadrature.
pub fn pdf_mass(p: &GgdParams) -> f64 {
    symmetric_expectation(p, &|_| 1.0)
}

/// E[x²] under `p` by numerical quadrature.
pub fn second_moment(p: &GgdParams) -> f64 {
    symmetric_expectation(p, &|x| x * x)
}

/// Eigenpairs of a symmetric matrix (row-major `n×n`) by cyclic Jacobi
/// rotations, sorted by descending eigenvalue. Eigenvectors are returned as
/// rows.
pub fn jacobi_eigen(a: &[f64], n: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    assert_eq!(a.len(), n * n);
    let mut m = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum();
        let diag: f64 = (0..n).map(|i| m[i * n + i] * m[i * n + i]).sum();
        if off <= 1e-30 * diag.max(1e-300) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[j * n + j].partial_cmp(&m[i * n + i]).unwrap());
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k * n + i]).collect())
        .collect();
    (values, vectors)
}

/// Reference PCA through the explicit covariance matrix.
pub struct BrutePca {
    pub mean: Vec<f64>,
    /// One unit vector per component, largest variance first.
    pub axes: Vec<Vec<f64>>,
    pub variances: Vec<f64>,
}

pub fn brute_pca(rows: &[Vec<f64>], dim: usize) -> BrutePca {
    let n = rows.len();
    let m = rows[0].len();
    let mean: Vec<f64> = (0..m)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = vec![0.0; m * m];
    for r in rows {
        for i in 0..m {
            for j in 0..m {
                cov[i * m + j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    cov.iter_mut().for_each(|c| *c /= (n - 1) as f64);
    let (values, vectors) = jacobi_eigen(&cov, m);
    let axes = vectors
        .into_iter()
        .take(dim)
        .map(|mut v| {
            let lead = v
                .iter()
                .copied()
                .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
            if lead < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    BrutePca {
        mean,
        axes,
        variances: values.into_iter().take(dim).collect(),
    }
}

fn keys(x: f64) -> f64 {
    // Piecewise cubic with a = -1/2, written in Horner form.
    let t = x.abs();
    if t < 1.0 {
        (1.5 * t - 2.5) * t * t + 1.0
    } else if t < 2.0 {
        ((-0.5 * t + 2.5) * t - 4.0) * t + 2.0
    } else {
        0.0
    }
}

fn symmetric_index(j: i64, len: usize) -> usize {
    let n = len as i64;
    let mut k = j;
    loop {
        if k < 0 {
            k = -k - 1;
        } else if k >= n {
            k = 2 * n - 1 - k;
        } else {
            return k as usize;
        }
    }
}

fn axis_weights(o: usize, scale: usize, len: usize) -> Vec<(usize, f64)> {
    let s = scale as f64;
    // Pixel-centre alignment in 0-based coordinates.
    let centre = (o as f64 + 0.5) * s - 0.5;
    let lo = (centre - 2.0 * s).floor() as i64 - 1;
    let hi = (centre + 2.0 * s).ceil() as i64 + 1;
    let raw: Vec<(i64, f64)> = (lo..=hi)
        .map(|j| (j, keys((centre - j as f64) / s) / s))
        .filter(|&(_, w)| w != 0.0)
        .collect();
    let total: f64 = raw.iter().map(|p| p.1).sum();
    raw.into_iter()
        .map(|(j, w)| (symmetric_index(j, len), w / total))
        .collect()
}

/// Antialiased bicubic shrink as one 2-D weighted sum per output sample.
pub fn bicubic_direct(img: &FloatImage, scale: usize) -> FloatImage {
    let (ow, oh) = (img.width / scale, img.height / scale);
    let mut out = FloatImage::zeros(ow, oh);
    for oy in 0..oh {
        let wy = axis_weights(oy, scale, img.height);
        for ox in 0..ow {
            let wx = axis_weights(ox, scale, img.width);
            for c in 0..CHANNELS {
                let mut acc = 0.0;
                for &(y, ky) in &wy {
                    for &(x, kx) in &wx {
                        acc += ky * kx * img.data[(y * img.width + x) * CHANNELS + c];
                    }
                }
                out.data[(oy * ow + ox) * CHANNELS + c] = acc;
            }
        }
    }
    out
}

fn reflect101(i: i64, len: usize) -> usize {
    let n = len as i64;
    if i < 0 {
        (-i) as usize
    } else if i >= n {
        (2 * n - 2 - i) as usize
    } else {
        i as usize
    }
}

/// Probe network forward pass as a plain loop nest in f64.
pub fn probe_forward_direct(net: &ProbeNet, width: usize, height: usize, input: &[f32]) -> Vec<f64> {
    let mut act: Vec<f64> = input.iter().map(|&v| f64::from(v)).collect();
    let layers = PROBE_CHANNELS.len() - 1;
    for l in 0..layers {
        let (cin, cout) = (PROBE_CHANNELS[l], PROBE_CHANNELS[l + 1]);
        let w = net.layer_weights(l);
        let mut next = vec![0.0; width * height * cout];
        for y in 0..height {
            for x in 0..width {
                for o in 0..cout {
                    let mut acc = 0.0;
                    for ky in 0..3 {
                        let sy = reflect101(y as i64 + ky as i64 - 1, height);
                        for kx in 0..3 {
                            let sx = reflect101(x as i64 + kx as i64 - 1, width);
                            for ci in 0..cin {
                                acc += act[(sy * width + sx) * cin + ci]
                                    * f64::from(w[((ky * 3 + kx) * cin + ci, o)]);
                            }
                        }
                    }
                    next[(y * width + x) * cout + o] = if l + 1 < layers { acc.max(0.0) } else { acc };
                }
            }
        }
        act = next;
    }
    act
}
