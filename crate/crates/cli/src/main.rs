use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use cellot::experiment::{generate, run, run_experiment, Dataset, DatasetConfig, RunConfig};
use cellot::fgw::{build_instance, fgw_solve};
use cellot::gp::loss_csv;
use cellot::kernels::{
    default_sigma, distance_with_plan, gram, min_eigenvalue, pairwise_distance, sigma_psd_search,
    truncate_and_features, PsdSearch,
};
use cellot::{io, Bandwidth, CwComplex, DistanceCache, DistanceKind, DistanceSpec, ExponentConvention, FitConfig};

#[derive(Parser)]
#[command(name = "cellot", version, about = "Optimal transport, FGW and OT kernels between CW complexes")]
struct Cli {
    /// Directory of the persistent distance cache.
    #[arg(long, global = true, env = "CELLOT_CACHE_DIR")]
    cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random dataset of complex pairs with a train/test manifest.
    Gen(GenArgs),
    /// Distance between two complex files.
    Dist(DistArgs),
    /// Fused Gromov-Wasserstein between two complex files, with solver diagnostics.
    Fgw(FgwArgs),
    /// Distance and Gram matrices with Wasserstein features for a set of complexes.
    Gram(GramArgs),
    /// Train the Gaussian process on a dataset's training split.
    Fit(FitArgs),
    /// Train and evaluate one or both kernels on a dataset.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    W,
    Fgw,
}

impl From<Kind> for DistanceKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::W => DistanceKind::Wasserstein,
            Kind::Fgw => DistanceKind::Fgw,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Convention {
    Squared,
    Linear,
}

impl From<Convention> for ExponentConvention {
    fn from(c: Convention) -> Self {
        match c {
            Convention::Squared => ExponentConvention::Squared,
            Convention::Linear => ExponentConvention::Linear,
        }
    }
}

#[derive(Args, Clone)]
struct DistanceArgs {
    #[arg(long, value_enum, default_value = "w")]
    kind: Kind,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    /// Structure/feature trade-off for FGW.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Cell degree k of the Hodge Laplacian.
    #[arg(long, default_value_t = 0)]
    degree: usize,
    /// Zero-pad the smaller Laplacian to a common size.
    #[arg(long)]
    pad: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl DistanceArgs {
    fn spec(&self) -> DistanceSpec {
        let mut spec = match self.kind {
            Kind::W => DistanceSpec::wasserstein(self.p, self.degree),
            Kind::Fgw => DistanceSpec::fgw(self.alpha, self.p, self.degree),
        };
        spec.pad = self.pad;
        spec.seed = self.seed;
        spec
    }
}

#[derive(Args, Clone)]
struct BandwidthArgs {
    /// Fixed bandwidth.
    #[arg(long, conflicts_with = "auto_sigma")]
    sigma: Option<f64>,
    /// Shrink the bandwidth from the median until the Gram matrix is PSD.
    #[arg(long)]
    auto_sigma: bool,
    #[arg(long, value_enum, default_value = "squared")]
    convention: Convention,
}

impl BandwidthArgs {
    fn bandwidth(&self) -> Bandwidth {
        match (self.sigma, self.auto_sigma) {
            (Some(s), _) => Bandwidth::Fixed(s),
            (None, true) => Bandwidth::PsdSearch,
            (None, false) => Bandwidth::Median,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 8)]
    vertices: usize,
    #[arg(long, default_value_t = 0.7)]
    split: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

impl GenArgs {
    fn config(&self) -> DatasetConfig {
        DatasetConfig { n: self.n, n_vertices: self.vertices, split: self.split, seed: self.seed, ..Default::default() }
    }
}

#[derive(Args)]
struct DistArgs {
    a: PathBuf,
    b: PathBuf,
    #[command(flatten)]
    distance: DistanceArgs,
    /// Write the coupling as CSV (cells for FGW, signal samples for W).
    #[arg(long)]
    plan: Option<PathBuf>,
}

#[derive(Args)]
struct FgwArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    degree: usize,
    #[arg(long)]
    plan: Option<PathBuf>,
}

#[derive(Args)]
struct GramArgs {
    /// Complex files.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[command(flatten)]
    distance: DistanceArgs,
    #[command(flatten)]
    bandwidth: BandwidthArgs,
    /// Output directory for distances.csv, gram.csv and features.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct TrainArgs {
    #[arg(long, value_enum, default_value = "w")]
    kind: Kind,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    degree: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 15)]
    epochs: usize,
    /// Samples drawn per pair and epoch.
    #[arg(long, default_value_t = 8)]
    batch: usize,
    #[arg(long, default_value_t = 1e-2)]
    lr: f64,
    #[command(flatten)]
    bandwidth: BandwidthArgs,
}

impl TrainArgs {
    fn run_config(&self) -> RunConfig {
        RunConfig {
            kind: self.kind.into(),
            p: self.p,
            alpha: self.alpha,
            degree: self.degree,
            convention: self.bandwidth.convention.into(),
            fit: FitConfig {
                epochs: self.epochs,
                batch: self.batch,
                learning_rate: self.lr,
                seed: self.seed,
                bandwidth: self.bandwidth.bandwidth(),
                ..Default::default()
            },
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Dataset directory written by `gen`.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Dataset directory written by `gen`; otherwise generated from --n, --split and --seed.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 0.7)]
    split: f64,
    /// Run both kernels on the same dataset and report the ordering.
    #[arg(long)]
    both: bool,
    #[command(flatten)]
    train: TrainArgs,
    #[arg(long)]
    out: PathBuf,
}

fn read_complex(path: &Path) -> anyhow::Result<CwComplex> {
    Ok(CwComplex::read(path)?)
}

fn open_cache(dir: &Option<PathBuf>) -> anyhow::Result<Option<DistanceCache>> {
    Ok(match dir {
        Some(d) => Some(DistanceCache::open(d)?),
        None => None,
    })
}

fn save_cache(cache: &Option<DistanceCache>) -> anyhow::Result<()> {
    if let Some(c) = cache {
        c.save()?;
    }
    Ok(())
}

fn write_plan(path: &Path, coupling: &cellot::Matrix) -> anyhow::Result<()> {
    let rows = io::indexed_ids("a", coupling.nrows());
    let cols = io::indexed_ids("b", coupling.ncols());
    io::write_atomic(path, io::matrix_csv(&rows, &cols, coupling).as_bytes())?;
    Ok(())
}

fn write_file(dir: &Path, name: &str, text: &str) -> anyhow::Result<()> {
    io::write_atomic(&dir.join(name), text.as_bytes())?;
    Ok(())
}

fn load_dataset(data: &Option<PathBuf>, n: usize, split: f64, seed: u64) -> anyhow::Result<Dataset> {
    Ok(match data {
        Some(dir) => Dataset::read(dir)?,
        None => generate(&DatasetConfig { n, split, seed, ..Default::default() })?,
    })
}

fn cmd_gen(args: &GenArgs) -> anyhow::Result<()> {
    let dataset = generate(&args.config())?;
    dataset.write(&args.out)?;
    println!("wrote {} pairs ({} train, {} test) to {}", dataset.items.len(), dataset.train.len(), dataset.test.len(), args.out.display());
    Ok(())
}

fn cmd_dist(args: &DistArgs) -> anyhow::Result<()> {
    let a = read_complex(&args.a)?;
    let b = read_complex(&args.b)?;
    let spec = args.distance.spec();
    let d = match &args.plan {
        Some(path) => {
            let (d, plan) = distance_with_plan(&a, &b, &spec)?;
            write_plan(path, &plan.coupling)?;
            d
        }
        None => cellot::kernels::distance(&a, &b, &spec)?,
    };
    println!("{d:.6}");
    Ok(())
}

fn cmd_fgw(args: &FgwArgs) -> anyhow::Result<()> {
    let a = read_complex(&args.a)?;
    let b = read_complex(&args.b)?;
    let inst = build_instance(&a, &b, args.degree, args.alpha, args.p)?;
    let r = fgw_solve(&inst, &Default::default())?;
    println!("{:.6}", r.objective);
    eprintln!("iterations {} converged {}", r.iterations, r.converged);
    if let Some(path) = &args.plan {
        write_plan(path, &r.plan.coupling)?;
    }
    Ok(())
}

fn cmd_gram(args: &GramArgs, cache: &Option<PathBuf>) -> anyhow::Result<()> {
    let items = args.files.iter().map(|p| read_complex(p)).collect::<anyhow::Result<Vec<_>>>()?;
    let cache = open_cache(cache)?;
    let d = pairwise_distance(&items, &args.distance.spec(), cache.as_ref())?;
    save_cache(&cache)?;
    let convention = args.bandwidth.convention.into();
    let sigma = match args.bandwidth.bandwidth() {
        Bandwidth::Fixed(s) => s,
        Bandwidth::Median => default_sigma(&d, convention),
        Bandwidth::PsdSearch => sigma_psd_search(&d, &PsdSearch { convention, ..Default::default() })?,
    };
    let k = gram(&d, sigma, convention)?;
    let model = truncate_and_features(&k, None)?;
    let ids: Vec<String> = args
        .files
        .iter()
        .map(|p| p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned()))
        .collect();
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_file(&args.out, "distances.csv", &io::matrix_csv(&ids, &ids, &d))?;
    write_file(&args.out, "gram.csv", &model.gram_csv(&ids))?;
    write_file(&args.out, "features.csv", &model.features_csv(&ids))?;
    println!("sigma {sigma:.6} rank {} min_eigenvalue {:.3e}", model.rank(), min_eigenvalue(&k)?);
    Ok(())
}

fn cmd_fit(args: &FitArgs, cache: &Option<PathBuf>) -> anyhow::Result<()> {
    let dataset = Dataset::read(&args.data)?;
    let cache = open_cache(cache)?;
    let out = run(&dataset, &args.train.run_config(), cache.as_ref())?;
    save_cache(&cache)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_file(&args.out, "model.json", &out.model.to_json())?;
    write_file(&args.out, "loss.csv", &loss_csv(&out.summary.history))?;
    write_file(&args.out, "gram.csv", &io::matrix_csv(&out.train_ids, &out.train_ids, &out.gram))?;
    println!(
        "sigma {:.6} rank {} train_loss {:.6} test_loss {:.6}",
        out.summary.sigma, out.summary.rank, out.summary.final_train_loss, out.summary.final_test_loss
    );
    Ok(())
}

fn cmd_experiment(args: &ExperimentArgs, cache: &Option<PathBuf>) -> anyhow::Result<()> {
    let dataset = load_dataset(&args.data, args.n, args.split, args.train.seed)?;
    let kinds = if args.both { vec![DistanceKind::Wasserstein, DistanceKind::Fgw] } else { vec![args.train.kind.into()] };
    let cache = open_cache(cache)?;
    let summary = run_experiment(&dataset, &args.train.run_config(), &kinds, Some(&args.out), cache.as_ref())?;
    save_cache(&cache)?;
    for r in &summary.runs {
        let name = match r.kind {
            DistanceKind::Wasserstein => "w",
            DistanceKind::Fgw => "fgw",
        };
        println!("{name} test_loss {:.6} train_loss {:.6}", r.final_test_loss, r.final_train_loss);
    }
    if let Some(better) = summary.fgw_better {
        println!("fgw_better {better}");
    }
    Ok(())
}

fn run_cli(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Dist(a) => cmd_dist(a),
        Command::Fgw(a) => cmd_fgw(a),
        Command::Gram(a) => cmd_gram(a, &cli.cache_dir),
        Command::Fit(a) => cmd_fit(a, &cli.cache_dir),
        Command::Experiment(a) => cmd_experiment(a, &cli.cache_dir),
    }
}

/// 2 for invalid input, 3 for numerical failures, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<cellot::Error>() {
        Some(e) if e.is_validation() => 2,
        Some(cellot::Error::Io { .. }) | None => 1,
        Some(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_cli(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // library errors already carry their cause in the message
            match e.downcast_ref::<cellot::Error>() {
                Some(inner) => eprintln!("error: {inner}"),
                None => eprintln!("error: {e:#}"),
            }
            ExitCode::from(exit_code(&e))
        }
    }
}
