//! `srga`: synthesize PIES subsets, extract probe features, fit GGDs and
//! score generalization.
//!
//! Exit codes: 0 on success, 2 for invalid input, 3 when the statistics
//! themselves break down (rank-deficient or degenerate features).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use srga_core::degrade::spec::{blur_grid, blurnoise_grid, noise_grid, preset_help};
use srga_core::harness::{
    run_content_split, run_jitter, run_sweep, write_curve_csv, write_jitter_csv, FeatureSource, FileSource,
    ProbeSource,
};
use srga_core::metric::{fit_projected, DEFAULT_DELTA, DEFAULT_DIM};
use srga_core::pies::{collect_hr_patches, load_lr, load_png_dir, synth_grid, MANIFEST_FILE, PATCHES_PER_SUBSET};
use srga_core::scene::{write_scenes, SceneParams};
use srga_core::{
    fit_pca, read_feature_file, write_feature_file, DegradationSpec, FeatureSet, PcaMode, ProbeNet, ScoreConfig,
    Scorer, SrgaError, SrgaReport,
};

#[derive(Parser, Debug)]
#[command(name = "srga", version, about = "Generalization assessment for super-resolution networks")]
#[command(after_help = preset_help())]
struct Cli {
    /// Worker threads (falls back to SRGA_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// PIES dataset synthesis.
    #[command(subcommand)]
    Pies(PiesCommand),
    /// Feature extraction.
    #[command(subcommand)]
    Features(FeaturesCommand),
    /// Fit a GGD to each feature file and print a (sigma, alpha) table.
    Fit(FitArgs),
    /// Score test feature files against a reference.
    Score(ScoreArgs),
    /// Probe-network sweep over degradations of one HR pool.
    Sweep(SweepArgs),
    /// Luminance-jitter curve for one degradation.
    Jitter(JitterArgs),
    /// Pairwise scores between disjoint content subsets.
    ContentSplit(ContentSplitArgs),
}

#[derive(Subcommand, Debug)]
enum PiesCommand {
    /// Degrade HR patches cut from a directory of PNGs.
    #[command(after_help = preset_help())]
    Synth(SynthArgs),
    /// Render procedural dead-leaves source images.
    Scenes(ScenesArgs),
}

#[derive(Subcommand, Debug)]
enum FeaturesCommand {
    /// Run the fixed-weight probe network over LR patches.
    Probe(ProbeArgs),
}

#[derive(Args, Debug, Clone)]
struct GridArgs {
    /// Degradation spec, e.g. blur:2, noise:30, blurnoise:4,20, aniso, lum:+20 (repeatable).
    #[arg(long = "spec")]
    specs: Vec<String>,
    /// All 16 PIES-Blur widths (adds clean).
    #[arg(long)]
    all_blur: bool,
    /// All 10 PIES-Noise levels (adds clean).
    #[arg(long)]
    all_noise: bool,
    /// The 4x3 PIES-BlurNoise grid (adds clean).
    #[arg(long)]
    all_blurnoise: bool,
    /// PIES-AnisoBlur with per-patch random kernels (adds clean).
    #[arg(long)]
    all_aniso: bool,
}

impl GridArgs {
    fn expand(&self, seed: u64, with_clean: bool) -> Result<Vec<DegradationSpec>> {
        let mut out = Vec::new();
        let any_grid = self.all_blur || self.all_noise || self.all_blurnoise || self.all_aniso;
        if any_grid && with_clean {
            out.push(DegradationSpec::clean());
        }
        if self.all_blur {
            out.extend(blur_grid());
        }
        if self.all_noise {
            out.extend(noise_grid());
        }
        if self.all_blurnoise {
            out.extend(blurnoise_grid());
        }
        if self.all_aniso {
            out.push(DegradationSpec::aniso_random());
        }
        for s in &self.specs {
            out.push(s.parse()?);
        }
        let mut seen = std::collections::HashSet::new();
        out.retain(|s| seen.insert(s.label()));
        Ok(out.into_iter().map(|s| s.with_seed(seed)).collect())
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    hr_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    /// Patches per subset.
    #[arg(long, default_value_t = PATCHES_PER_SUBSET)]
    count: usize,
    /// Seed of every random stream.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct ScenesArgs {
    #[arg(long)]
    out: PathBuf,
    /// Number of 512x512 scenes (16 HR patches each).
    #[arg(long, default_value_t = 50)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    /// Weight seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory of LR PNGs, or a PIES subset directory holding manifest.json.
    #[arg(long)]
    lr_dir: PathBuf,
    /// Output .npy path; metadata goes to <out>.meta.json.
    #[arg(long)]
    out: PathBuf,
    /// Dataset id recorded in the sidecar (default: subset directory name).
    #[arg(long)]
    dataset_id: Option<String>,
}

#[derive(Args, Debug, Clone)]
struct StatArgs {
    /// Principal components kept.
    #[arg(long, default_value_t = DEFAULT_DIM)]
    dim: usize,
    /// Log-shift constant of the index.
    #[arg(long, default_value_t = DEFAULT_DELTA, allow_hyphen_values = true)]
    delta: f64,
    /// Where the PCA basis is fitted: ref, joint or per-dataset.
    #[arg(long, default_value_t = PcaMode::Ref)]
    pca_mode: PcaMode,
}

impl StatArgs {
    fn config(&self) -> ScoreConfig {
        ScoreConfig {
            dim: self.dim,
            delta: self.delta,
            pca_mode: self.pca_mode,
        }
    }
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Feature files (.npy).
    #[arg(required = true)]
    features: Vec<PathBuf>,
    /// Project every file onto this file's basis instead of its own.
    #[arg(long = "ref")]
    reference: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_DIM)]
    dim: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ScoreArgs {
    #[arg(long = "ref")]
    reference: PathBuf,
    #[arg(long = "test", required = true)]
    tests: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    stats: StatArgs,
}

#[derive(Args, Debug, Clone)]
struct SourceArgs {
    /// HR source PNGs; features come from the probe network.
    #[arg(long, conflicts_with = "features_dir")]
    hr_dir: Option<PathBuf>,
    /// Pre-exported `<label>.npy` files instead of the probe network.
    #[arg(long)]
    features_dir: Option<PathBuf>,
    /// HR patches taken from --hr-dir.
    #[arg(long, default_value_t = PATCHES_PER_SUBSET)]
    count: usize,
    /// Probe-network weight seed.
    #[arg(long, default_value_t = 0)]
    probe_seed: u64,
    /// Seed of the degradation random streams.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SourceArgs {
    fn open(&self) -> Result<Box<dyn FeatureSource>> {
        match (&self.hr_dir, &self.features_dir) {
            (Some(hr), None) => {
                let hr = collect_hr_patches(hr, self.count)?
                    .into_iter()
                    .map(|p| p.patch)
                    .collect();
                Ok(Box::new(ProbeSource::new(ProbeNet::new(self.probe_seed), hr)))
            }
            (None, Some(dir)) => Ok(Box::new(FileSource::from_dir("exported", dir)?)),
            _ => bail!(SrgaError::Parameter("give exactly one of --hr-dir or --features-dir".into())),
        }
    }
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Reference degradation.
    #[arg(long = "ref", default_value = "clean")]
    reference: String,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    stats: StatArgs,
}

#[derive(Args, Debug)]
struct JitterArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long = "ref", default_value = "clean")]
    reference: String,
    /// Degradation whose luminance is shifted.
    #[arg(long = "test", default_value = "clean")]
    test: String,
    /// Comma-separated luminance offsets.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true,
          default_value = "-10,-5,0,5,10,15,20")]
    deltas: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    stats: StatArgs,
}

#[derive(Args, Debug)]
struct ContentSplitArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long = "spec", default_value = "clean")]
    spec: String,
    /// Comma-separated resplit seeds.
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5,6,7,8,9")]
    split_seeds: Vec<u64>,
    /// Patches per subset.
    #[arg(long, default_value_t = 400)]
    subset_size: usize,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    stats: StatArgs,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = configure_threads(cli.threads) {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let numeric = e
                .chain()
                .find_map(|c| c.downcast_ref::<SrgaError>())
                .is_some_and(SrgaError::is_numeric);
            ExitCode::from(if numeric { 3 } else { 2 })
        }
    }
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("SRGA_THREADS") {
            Ok(v) => Some(v.parse().with_context(|| format!("SRGA_THREADS={v:?} is not a count"))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            bail!("thread count must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Pies(PiesCommand::Synth(a)) => cmd_synth(a),
        Command::Pies(PiesCommand::Scenes(a)) => cmd_scenes(a),
        Command::Features(FeaturesCommand::Probe(a)) => cmd_probe(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Score(a) => cmd_score(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Jitter(a) => cmd_jitter(a),
        Command::ContentSplit(a) => cmd_content_split(a),
    }
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Records how an output directory was produced.
fn write_provenance(path: &Path, extra: serde_json::Value) -> Result<()> {
    let doc = json!({
        "tool": "srga",
        "version": env!("CARGO_PKG_VERSION"),
        "args": std::env::args().collect::<Vec<_>>(),
        "threads": rayon::current_num_threads(),
        "config": extra,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let specs = a.grid.expand(a.seed, true)?;
    if specs.is_empty() {
        bail!(SrgaError::Parameter("nothing to synthesize: give --spec or an --all-* flag".into()));
    }
    create_out(&a.out)?;
    let manifests = synth_grid(&a.hr_dir, &a.out, &specs, a.count)?;
    write_provenance(
        &a.out.join("provenance.json"),
        json!({
            "seed": a.seed,
            "count": a.count,
            "specs": specs.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        }),
    )?;
    for m in &manifests {
        println!("{}\t{} pairs", m.dataset_id, m.entries.len());
    }
    Ok(())
}

fn cmd_scenes(a: &ScenesArgs) -> Result<()> {
    let paths = write_scenes(&a.out, a.count, &SceneParams::default(), a.seed)?;
    write_provenance(&a.out.join("provenance.json"), json!({"seed": a.seed, "count": a.count}))?;
    println!("{} scenes in {}", paths.len(), a.out.display());
    Ok(())
}

fn cmd_probe(a: &ProbeArgs) -> Result<()> {
    let manifest = a.lr_dir.join(MANIFEST_FILE);
    let (patches, default_id) = if manifest.exists() {
        (load_lr(&manifest)?, dir_name(&a.lr_dir))
    } else {
        let id = if a.lr_dir.file_name().is_some_and(|n| n == "lr") {
            a.lr_dir.parent().map(dir_name).unwrap_or_default()
        } else {
            dir_name(&a.lr_dir)
        };
        (load_png_dir(&a.lr_dir)?, id)
    };
    if patches.is_empty() {
        bail!(SrgaError::Data(format!("no PNG patches in {}", a.lr_dir.display())));
    }
    let id = a.dataset_id.clone().unwrap_or(default_id);
    let net = ProbeNet::new(a.seed);
    let set = net.extract_features(&patches, &id)?;
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_out(parent)?;
    }
    write_feature_file(&set, &a.out)?;
    let mut prov = a.out.as_os_str().to_os_string();
    prov.push(".provenance.json");
    write_provenance(
        Path::new(&prov),
        json!({"probe_seed": a.seed, "dataset_id": id, "shape": set.shape()}),
    )?;
    println!("{} {:?} -> {}", id, set.shape(), a.out.display());
    Ok(())
}

fn dir_name(p: &Path) -> String {
    p.canonicalize()
        .ok()
        .and_then(|c| c.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "unknown".into())
}

/// Reads a feature file, naming the dataset after the file when the sidecar
/// does not.
fn load_features(path: &Path) -> Result<FeatureSet> {
    let mut set = read_feature_file(path)?;
    if set.meta.dataset_id == "unknown" {
        if let Some(stem) = path.file_stem() {
            set.meta.dataset_id = stem.to_string_lossy().into_owned();
        }
    }
    Ok(set)
}

#[derive(Serialize)]
struct FitRecord {
    dataset_id: String,
    model_id: String,
    alpha: f64,
    sigma: f64,
    #[serde(rename = "D")]
    dim: usize,
    n_samples: usize,
    pca_mode: PcaMode,
}

fn cmd_fit(a: &FitArgs) -> Result<()> {
    create_out(&a.out)?;
    let reference = a.reference.as_deref().map(load_features).transpose()?;
    let ref_proj = match &reference {
        Some(r) => Some(fit_pca(r.flatten().view(), a.dim, &r.meta.dataset_id)?),
        None => None,
    };
    let mut records = Vec::new();
    for path in &a.features {
        let set = load_features(path)?;
        let (g, mode) = match &ref_proj {
            Some(p) => (fit_projected(p, &set)?, PcaMode::Ref),
            None => {
                let p = fit_pca(set.flatten().view(), a.dim, &set.meta.dataset_id)?;
                (fit_projected(&p, &set)?, PcaMode::PerDataset)
            }
        };
        records.push(FitRecord {
            dataset_id: set.meta.dataset_id.clone(),
            model_id: set.meta.model_id.clone(),
            alpha: g.alpha,
            sigma: g.sigma,
            dim: a.dim,
            n_samples: set.len() * a.dim,
            pca_mode: mode,
        });
    }
    write_json(&a.out.join("fit.json"), &records)?;

    // One row per model, one (sigma, alpha) column pair per dataset.
    let mut datasets: Vec<&str> = Vec::new();
    let mut table: BTreeMap<&str, BTreeMap<&str, &FitRecord>> = BTreeMap::new();
    for r in &records {
        if !datasets.contains(&r.dataset_id.as_str()) {
            datasets.push(&r.dataset_id);
        }
        table.entry(&r.model_id).or_default().insert(&r.dataset_id, r);
    }
    let mut csv = String::from("method");
    for d in &datasets {
        csv.push_str(&format!(",{d}_sigma,{d}_alpha"));
    }
    csv.push('\n');
    for (model, row) in &table {
        csv.push_str(model);
        for d in &datasets {
            match row.get(d) {
                Some(r) => csv.push_str(&format!(",{:.3},{:.3}", r.sigma, r.alpha)),
                None => csv.push_str(",,"),
            }
        }
        csv.push('\n');
    }
    fs::write(a.out.join("fit_table.csv"), &csv)?;
    write_provenance(&a.out.join("provenance.json"), json!({"dim": a.dim, "ref": a.reference}))?;
    print!("{csv}");
    Ok(())
}

fn cmd_score(a: &ScoreArgs) -> Result<()> {
    let cfg = a.stats.config();
    let reference = load_features(&a.reference)?;
    let ref_path = a.reference.canonicalize().ok();
    for t in &a.tests {
        if t.canonicalize().ok() == ref_path {
            bail!(SrgaError::Contract(format!(
                "reference file {} is also listed as a test",
                t.display()
            )));
        }
    }
    create_out(&a.out)?;
    let scorer = Scorer::new(&reference, cfg)?;
    let scored = a
        .tests
        .par_iter()
        .map(|t| {
            let test = load_features(t)?;
            if test.meta.model_id != reference.meta.model_id {
                log::warn!(
                    "{}: model '{}' differs from reference model '{}'",
                    t.display(),
                    test.meta.model_id,
                    reference.meta.model_id
                );
            }
            Ok((test.meta.dataset_id.clone(), scorer.score(&test)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let report = SrgaReport::assemble(&reference.meta.model_id, &reference.meta.dataset_id, &cfg, scored)?;
    fs::write(a.out.join("report.json"), report.to_json() + "\n")?;
    write_report_csv(&a.out.join("report.csv"), &report)?;
    write_provenance(&a.out.join("provenance.json"), json!({"score": cfg}))?;
    print_ranked(&report);
    Ok(())
}

fn write_report_csv(path: &Path, report: &SrgaReport) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "test_id,srga,fdd,alpha,sigma")?;
    for e in &report.entries {
        writeln!(
            f,
            "{},{:.16e},{:.16e},{:.16e},{:.16e}",
            e.test_id, e.srga, e.fdd, e.ggd_test.alpha, e.ggd_test.sigma
        )?;
    }
    Ok(())
}

/// Entries from best (lowest index) to worst, with their rank.
fn print_ranked(report: &SrgaReport) {
    let mut order: Vec<_> = report.entries.iter().collect();
    order.sort_by(|a, b| a.srga.total_cmp(&b.srga));
    let width = order.iter().map(|e| e.test_id.len()).max().unwrap_or(4).max(4);
    println!(
        "model {}  reference {}  pca {}  D={}",
        report.model_id, report.reference_id, report.pca_mode, report.dim
    );
    println!("{:>4}  {:<width$}  {:>10}  {:>12}", "rank", "test", "SRGA", "FDD");
    for (i, e) in order.iter().enumerate() {
        println!("{:>4}  {:<width$}  {:>10.4}  {:>12.4e}", i + 1, e.test_id, e.srga, e.fdd);
    }
    println!("{:>4}  {:<width$}  {:>10.4}", "", "mSRGA", report.msrga);
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let cfg = a.stats.config();
    let reference: DegradationSpec = a.reference.parse::<DegradationSpec>()?.with_seed(a.source.seed);
    let tests: Vec<DegradationSpec> = a
        .grid
        .expand(a.source.seed, false)?
        .into_iter()
        .filter(|s| s.label() != reference.label())
        .collect();
    create_out(&a.out)?;
    let source = a.source.open()?;
    let result = run_sweep(source.as_ref(), &reference, &tests, &cfg)?;
    fs::write(a.out.join("report.json"), result.report.to_json() + "\n")?;
    write_curve_csv(fs::File::create(a.out.join("curve.csv"))?, &result.curve)?;
    write_provenance(
        &a.out.join("provenance.json"),
        json!({
            "score": cfg,
            "reference": reference.to_string(),
            "tests": tests.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            "seed": a.source.seed,
            "probe_seed": a.source.probe_seed,
            "count": a.source.count,
        }),
    )?;
    print_ranked(&result.report);
    Ok(())
}

fn cmd_jitter(a: &JitterArgs) -> Result<()> {
    let cfg = a.stats.config();
    let reference: DegradationSpec = a.reference.parse::<DegradationSpec>()?.with_seed(a.source.seed);
    let test: DegradationSpec = a.test.parse::<DegradationSpec>()?.with_seed(a.source.seed);
    create_out(&a.out)?;
    let source = a.source.open()?;
    let ref_features = source.features(&reference)?;
    let points = run_jitter(source.as_ref(), &ref_features, &test, &a.deltas, &cfg)?;
    write_jitter_csv(fs::File::create(a.out.join("jitter.csv"))?, &points)?;
    write_provenance(
        &a.out.join("provenance.json"),
        json!({
            "score": cfg,
            "reference": reference.to_string(),
            "test": test.to_string(),
            "deltas": a.deltas,
            "seed": a.source.seed,
            "probe_seed": a.source.probe_seed,
        }),
    )?;
    for p in &points {
        println!("{:+6}  {:.4}", p.delta, p.srga);
    }
    Ok(())
}

fn cmd_content_split(a: &ContentSplitArgs) -> Result<()> {
    let cfg = a.stats.config();
    let spec: DegradationSpec = a.spec.parse::<DegradationSpec>()?.with_seed(a.source.seed);
    create_out(&a.out)?;
    let source = a.source.open()?;
    let report = run_content_split(source.as_ref(), &spec, &a.split_seeds, a.subset_size, &cfg)?;
    write_json(&a.out.join("content_split.json"), &report)?;
    let mut conv = fs::File::create(a.out.join("convergence.csv"))?;
    writeln!(conv, "seed,size,alpha,sigma")?;
    for t in &report.convergence {
        for r in &t.rows {
            writeln!(conv, "{},{},{:.16e},{:.16e}", t.seed, r.size, r.alpha, r.sigma)?;
        }
    }
    write_provenance(
        &a.out.join("provenance.json"),
        json!({
            "score": cfg,
            "spec": spec.to_string(),
            "split_seeds": a.split_seeds,
            "subset_size": a.subset_size,
            "probe_seed": a.source.probe_seed,
        }),
    )?;
    for p in &report.pairs {
        println!("seed {:>3}  SRGA {:.4}  FDD {:.4e}", p.seed.unwrap_or(0), p.srga, p.fdd);
    }
    Ok(())
}
