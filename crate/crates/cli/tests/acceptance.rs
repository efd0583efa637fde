//! Acceptance suite: one PASS/FAIL line per criterion, followed by a
//! summary. Exits non-zero when any criterion fails.
//!
//! Run with `cargo test -p srga-cli --test acceptance`.

// 2.718 below is a fitted GGD scale, not Euler's number.
#![allow(clippy::approx_constant)]

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srga_core::degrade::kernel::BlurKernel;
use srga_core::degrade::spec::{blur_grid, blurnoise_grid, noise_grid};
use srga_core::degrade::{add_noise, bicubic_downsample};
use srga_core::harness::{score_split, sweep_against, ContentSplit, ProbeSource};
use srga_core::metric::{compute_fdd, srga_index, ScoreConfig};
use srga_core::oracle::{bicubic_direct, brute_pca, kld_quadrature};
use srga_core::pca::{fit_pca, PcaRoute};
use srga_core::pies::Manifest;
use srga_core::scene::{scene_patches, SceneParams};
use srga_core::{ggd_kld, DegradationSpec, FeatureSource, GgdParams, ImagePatch, PcaMode, ProbeNet};

const ALPHAS: [f64; 7] = [0.3, 0.5, 0.687, 1.0, 2.0, 3.0, 5.0];
const SIGMAS: [f64; 4] = [0.1, 1.0, 2.718, 10.0];

/// HR pool shared by the sweep and the content split.
const POOL_SEED: u64 = 2024;
const POOL_SIZE: usize = 800;
const PROBE_SEED: u64 = 0;
const SWEEP_DIM: usize = 300;

/// Largest pairwise index between disjoint 400-patch clean subsets over
/// resplit seeds 0..20, rounded up; any later run above it is a regression.
const CONTENT_SPLIT_TAU: f64 = 1.60;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn g(alpha: f64, sigma: f64) -> GgdParams {
    GgdParams::new(alpha, sigma).unwrap()
}

fn secs(d: Duration) -> String {
    format!("{:.1} s", d.as_secs_f64())
}

fn kld_vs_quadrature() -> Outcome {
    let start = Instant::now();
    let anchor = g(0.687, 2.718);
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    let mut pairs = Vec::new();
    for &a in &ALPHAS {
        for &s in &SIGMAS {
            pairs.push((g(a, s), anchor));
            pairs.push((anchor, g(a, s)));
        }
    }
    pairs.push((anchor, g(0.494, 2.083)));
    for (p, q) in &pairs {
        let closed = ggd_kld(p, q).unwrap();
        let quad = kld_quadrature(p, q);
        let err = (closed - quad).abs();
        let ok = err <= 1e-12 || err <= 1e-6 * quad.abs();
        if quad.abs() > 1e-12 {
            worst = worst.max(err / quad.abs());
        }
        if !ok {
            bad.push(format!("{p:?}|{q:?}"));
        }
    }
    let elapsed = start.elapsed();
    let fast = elapsed < Duration::from_secs(10);
    outcome(
        bad.is_empty() && fast,
        format!(
            "{} pairs, worst relative error {worst:.1e}, {} mismatches, {}",
            pairs.len(),
            bad.len(),
            secs(elapsed)
        ),
    )
}

fn kld_anchors() -> Outcome {
    let gauss = ggd_kld(&g(2.0, 1.0), &g(2.0, 2.0)).unwrap();
    let laplace = ggd_kld(&g(1.0, 1.0), &g(1.0, 2.0)).unwrap();
    let want_g = std::f64::consts::LN_2 + 0.125 - 0.5;
    let want_l = std::f64::consts::LN_2 + 0.5 - 1.0;
    let ok = (gauss - want_g).abs() <= 1e-9 && (laplace - want_l).abs() <= 1e-9;
    let rounded = (gauss - 0.31815).abs() < 5e-6 && (laplace - 0.19315).abs() < 5e-6;
    outcome(
        ok && rounded,
        format!("Gaussian {gauss:.12} (exact {want_g:.12}), Laplace {laplace:.12} (exact {want_l:.12})"),
    )
}

fn estimator_recovery() -> Outcome {
    let start = Instant::now();
    let n = 800 * 300;
    let mut worst = (21usize, String::new());
    let mut all_ok = true;
    let mut combo = 0u64;
    for &a in &[0.5, 0.687, 1.0, 2.0, 3.0] {
        for &s in &[1.0, 2.718] {
            let truth = g(a, s);
            let mut hits = 0;
            for trial in 0..20u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(trial);
                rng.set_stream(combo);
                let fit = srga_core::fit_ggd(&truth.sample(&mut rng, n)).unwrap();
                if (fit.alpha / a - 1.0).abs() <= 0.03 && (fit.sigma / s - 1.0).abs() <= 0.02 {
                    hits += 1;
                }
            }
            if hits < 19 {
                all_ok = false;
            }
            if hits < worst.0 {
                worst = (hits, format!("({a}, {s})"));
            }
            combo += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        all_ok && elapsed < Duration::from_secs(60),
        format!("worst cell {} with {}/20 trials in tolerance, {}", worst.1, worst.0, secs(elapsed)),
    )
}

fn index_arithmetic() -> Outcome {
    let zero = srga_index(0.0, 5.0).unwrap();
    let tiny = srga_index(1e-5, 5.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut violations = 0;
    for _ in 0..10_000 {
        let a = 10f64.powf(rng.random_range(-14.0..3.0));
        let b = if rng.random_bool(0.05) { 0.0 } else { 10f64.powf(rng.random_range(-14.0..3.0)) };
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        if lo == hi {
            continue;
        }
        if srga_index(lo, 5.0).unwrap() >= srga_index(hi, 5.0).unwrap() {
            violations += 1;
        }
    }
    // index(1e-5) = log10(2) exactly; 0.30103 is its five-decimal rounding.
    let exact = std::f64::consts::LOG10_2;
    outcome(
        zero == 0.0 && (tiny - exact).abs() <= 1e-9 && format!("{tiny:.5}") == "0.30103" && violations == 0,
        format!("index(0) = {zero}, index(1e-5) = {tiny:.12} (log10 2 = {exact:.12}), {violations} order violations in 10^4 pairs"),
    )
}

fn pca_oracle() -> Outcome {
    let mut worst = 0.0f64;
    let mut routes_ok = true;
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = Array2::from_shape_fn((50, 200), |_| rng.random::<f64>() * 2.0 - 1.0);
        let pca = fit_pca(y.view(), 30, "oracle").unwrap();
        routes_ok &= pca.route() == PcaRoute::Gram;
        let got = pca.project(y.view()).unwrap().coords;
        let rows: Vec<Vec<f64>> = y.rows().into_iter().map(|r| r.to_vec()).collect();
        let brute = brute_pca(&rows, 30);
        for (i, row) in rows.iter().enumerate() {
            for (k, axis) in brute.axes.iter().enumerate() {
                let want: f64 = row.iter().zip(&brute.mean).zip(axis).map(|((v, m), a)| (v - m) * a).sum();
                worst = worst.max((got[(i, k)] - want).abs());
            }
        }
    }
    outcome(
        routes_ok && worst <= 1e-8,
        format!("5 random 50x200 matrices, D=30, max coordinate difference {worst:.1e}"),
    )
}

/// Probe features of the clean shared pool, computed once.
struct Pool {
    source: ProbeSource,
    clean: srga_core::FeatureSet,
}

impl Pool {
    fn new() -> Pool {
        let hr = scene_patches(&SceneParams::default(), POOL_SEED, 128, POOL_SIZE).unwrap();
        let source = ProbeSource::new(ProbeNet::new(PROBE_SEED), hr);
        let clean = source.features(&DegradationSpec::clean()).unwrap();
        Pool { source, clean }
    }
}

fn blur_sweep(pool: &Pool) -> Outcome {
    let start = Instant::now();
    let cfg = ScoreConfig {
        dim: SWEEP_DIM,
        ..ScoreConfig::default()
    };
    let result = sweep_against(&pool.source, &pool.clean, &blur_grid(), &cfg).unwrap();
    let s: Vec<f64> = result.curve.iter().map(|p| p.srga).collect();
    let steps = s.windows(2).filter(|w| w[1] >= w[0]).count();
    let ends = s[s.len() - 1] > s[0];
    let elapsed = start.elapsed();
    outcome(
        s.len() == 16 && steps >= 14 && ends && elapsed < Duration::from_secs(300),
        format!(
            "{steps}/15 non-decreasing steps, blur0.5 {:.3} -> blur8 {:.3}, {}",
            s[0],
            s[s.len() - 1],
            secs(elapsed)
        ),
    )
}

fn content_split(pool: &Pool) -> Outcome {
    let start = Instant::now();
    let cfg = ScoreConfig {
        dim: SWEEP_DIM,
        pca_mode: PcaMode::PerDataset,
        ..ScoreConfig::default()
    };
    let blur2 = pool.source.features(&DegradationSpec::iso_blur(2.0)).unwrap();
    let baseline = compute_fdd(&pool.clean, &blur2, &cfg).unwrap();
    let base_index = srga_index(baseline.fdd, cfg.delta).unwrap();
    drop(blur2);
    let limit = 0.2 * base_index;
    let splits: Vec<f64> = (0..10)
        .map(|seed| {
            let split = ContentSplit::random(POOL_SIZE, 400, seed).unwrap();
            let r = score_split(&pool.clean, &split, &cfg).unwrap();
            srga_index(r.fdd, cfg.delta).unwrap()
        })
        .collect();
    let below = splits.iter().filter(|&&v| v < limit).count();
    let max = splits.iter().cloned().fold(f64::MIN, f64::max);
    let list: Vec<String> = splits.iter().map(|v| format!("{v:.2}")).collect();
    outcome(
        below == splits.len(),
        format!(
            "{below}/10 splits below 20% of clean-vs-blur2 ({limit:.3} of {base_index:.3}); split indices [{}]; \
             max {max:.3} vs regression bound {CONTENT_SPLIT_TAU} ({}), {}",
            list.join(", "),
            if max <= CONTENT_SPLIT_TAU { "held" } else { "exceeded" },
            secs(start.elapsed())
        ),
    )
}

fn scale_invariance() -> Outcome {
    let mut worst_joint = 0.0f64;
    for &a1 in &ALPHAS {
        for &s1 in &SIGMAS {
            for &a2 in &ALPHAS {
                for &s2 in &SIGMAS {
                    let d = ggd_kld(&g(a1, s1), &g(a2, s2)).unwrap();
                    for c in [1e-3, 0.5, 2.0, 1e3] {
                        let ds = ggd_kld(&g(a1, c * s1), &g(a2, c * s2)).unwrap();
                        worst_joint = worst_joint.max((d - ds).abs() / d.max(1.0));
                    }
                }
            }
        }
    }

    let hr = scene_patches(&SceneParams::default(), 7, 128, 64).unwrap();
    let src = ProbeSource::new(ProbeNet::new(PROBE_SEED), hr);
    let cfg = ScoreConfig {
        dim: 32,
        ..ScoreConfig::default()
    };
    let clean = DegradationSpec::clean();
    let blur = DegradationSpec::iso_blur(2.0);
    let index = |c: f64| {
        let r = compute_fdd(
            &src.features_scaled(&clean, c).unwrap(),
            &src.features_scaled(&blur, c).unwrap(),
            &cfg,
        )
        .unwrap();
        srga_index(r.fdd, cfg.delta).unwrap()
    };
    let base = index(1.0);
    let worst_probe = [0.5, 2.0].iter().map(|&c| (index(c) - base).abs()).fold(0.0, f64::max);
    outcome(
        worst_joint <= 1e-12 && worst_probe <= 1e-6,
        format!("joint sigma scaling max deviation {worst_joint:.1e}; probe input scaling max index change {worst_probe:.1e}"),
    )
}

fn srga_bin(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_srga")).args(args).output().expect("binary runs")
}

/// Relative path -> contents for every file under `root`, skipping the
/// provenance records (they embed the output path).
fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().unwrap() != "provenance.json" {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn pies_reproduction() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let scenes = tmp.path().join("scenes");
    let s = scenes.to_str().unwrap();
    let o = srga_bin(&["pies", "scenes", "--out", s, "--count", "50", "--seed", "2024"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let synth = |name: &str| {
        let out = tmp.path().join(name);
        let o = srga_bin(&[
            "pies", "synth", "--hr-dir", s, "--out", out.to_str().unwrap(), "--all-blur", "--all-noise",
            "--all-blurnoise", "--seed", "0",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        out
    };
    let a = synth("run_a");
    let b = synth("run_b");

    let mut manifests = Vec::new();
    for entry in fs::read_dir(&a).unwrap() {
        let m = entry.unwrap().path().join("manifest.json");
        if m.exists() {
            manifests.push(Manifest::load(&m).unwrap());
        }
    }
    let labels: BTreeSet<String> = manifests.iter().map(|m| m.spec.label()).collect();
    let mut want: BTreeSet<String> = blur_grid().iter().map(|s| s.label()).collect();
    want.extend(noise_grid().iter().map(|s| s.label()));
    want.extend(blurnoise_grid().iter().map(|s| s.label()));
    want.insert(DegradationSpec::clean().label());
    let sizes_ok = manifests.iter().all(|m| m.entries.len() == 800);

    let (ta, tb) = (tree(&a), tree(&b));
    let identical = ta == tb;
    outcome(
        manifests.len() == 39 && labels == want && sizes_ok && identical,
        format!(
            "{} manifests, grids {}, all 800 pairs: {sizes_ok}, {} files bit-identical across runs: {identical}, {}",
            manifests.len(),
            if labels == want { "match" } else { "differ" },
            ta.len(),
            secs(start.elapsed())
        ),
    )
}

fn degradation_oracles() -> Outcome {
    let hr = ImagePatch::from_fn(128, 128, |x, _, _| ((x as f64) * 255.0 / 127.0).round() as u8);
    let got = bicubic_downsample(&hr, 4).unwrap();
    let want = bicubic_direct(&hr.to_float(), 4);
    let mut ramp_err = 0.0f64;
    for y in 0..32 {
        for x in 0..32 {
            for c in 0..3 {
                ramp_err = ramp_err.max((f64::from(got.get(x, y, c)) - want.get(x, y, c)).abs());
            }
        }
    }

    let mut kernel_bad = Vec::new();
    let mut kernel_worst = 0.0f64;
    for i in 1..=16 {
        let sigma = 0.5 * f64::from(i);
        let (mx, my) = BlurKernel::isotropic(sigma).unwrap().second_moments();
        let err = (mx / (sigma * sigma) - 1.0).abs().max((my / (sigma * sigma) - 1.0).abs());
        kernel_worst = kernel_worst.max(err);
        if err > 0.02 {
            kernel_bad.push(format!("{sigma}:{:+.1}%", 100.0 * (mx / (sigma * sigma) - 1.0)));
        }
    }

    let mut noise_worst = 0.0f64;
    let lr = ImagePatch::filled(32, 32, 128);
    for level in [5.0, 20.0, 40.0] {
        let spec = DegradationSpec::noise(level).with_seed(3);
        let mut d = Vec::new();
        let mut index = 0;
        while d.len() < 100_000 {
            d.extend(add_noise(&lr, &spec, index).unwrap().data().iter().map(|&v| f64::from(v) - 128.0));
            index += 1;
        }
        let n = d.len() as f64;
        let mean = d.iter().sum::<f64>() / n;
        let std = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        noise_worst = noise_worst.max((std / level - 1.0).abs());
    }

    outcome(
        ramp_err <= 1.0 && kernel_bad.is_empty() && noise_worst <= 0.05,
        format!(
            "ramp max deviation {ramp_err:.3}; kernel variance worst {:.1}% (outside 2%: [{}]); noise std worst {:.2}%",
            100.0 * kernel_worst,
            kernel_bad.join(" "),
            100.0 * noise_worst
        ),
    )
}

fn main() -> ExitCode {
    let mut pool: Option<Pool> = None;
    let mut results = Vec::new();
    let mut run = |name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        println!(
            "{} {name:<24} {} [{}]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            secs(start.elapsed())
        );
        results.push(o.pass);
    };

    run("kld-vs-quadrature", &mut kld_vs_quadrature);
    run("kld-anchors", &mut kld_anchors);
    run("estimator-recovery", &mut estimator_recovery);
    run("index-arithmetic", &mut index_arithmetic);
    run("pca-oracle", &mut pca_oracle);
    run("blur-sweep", &mut || blur_sweep(pool.get_or_insert_with(Pool::new)));
    run("content-split", &mut || content_split(pool.get_or_insert_with(Pool::new)));
    drop(pool);
    run("scale-invariance", &mut scale_invariance);
    run("pies-reproduction", &mut pies_reproduction);
    run("degradation-oracles", &mut degradation_oracles);

    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
