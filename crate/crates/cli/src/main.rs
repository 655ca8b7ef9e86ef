//! `kmahal` command-line tool.
//!
//! Exit codes: 0 on success, 1 on configuration errors (bad arguments,
//! unreadable or invalid inputs), 2 when a computation or output write fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kmahal::cluster::fit_from;
use kmahal::data::{Algorithm, Dataset, EngineConfig};
use kmahal::datagen::{
    generate_mixture, inject_missing, DatasetMetadata, MissingnessPlan, MixtureSpec,
};
use kmahal::harness::{
    demo_figure1, read_records, run_experiment, summarize, summary_to_string, threads_from_env,
    with_threads, write_summary, ExperimentConfig,
};
use kmahal::impute::{impute, ImputationConfig, ImputationMethod};

#[derive(Parser)]
#[command(
    name = "kmahal",
    version,
    about = "K-means for incomplete data with Mahalanobis distances"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled Gaussian mixture with a target maximum overlap.
    Gen(GenArgs),
    /// Mask cells of a complete dataset completely at random.
    Inject(InjectArgs),
    /// Fit one engine to a dataset and print the result document.
    Fit(FitArgs),
    /// Run an experiment described by a TOML configuration file.
    Run(RunArgs),
    /// Summarize a records CSV into medians and IQRs.
    Summarize(SummarizeArgs),
    /// Write the per-point CSV bundle of the two-cluster illustration.
    #[command(name = "demo-fig1")]
    DemoFig1(DemoArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Mixture spec as TOML (fields of MixtureSpec); overrides the flags.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long = "K", default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 5)]
    p: usize,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0.01)]
    omega: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20_000)]
    mc_samples: usize,
    /// Output CSV; metadata goes to the same path with `.meta.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InjectArgs {
    #[arg(long)]
    input: PathBuf,
    /// One-based coordinates, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    coords: Vec<usize>,
    /// Percentage of rows masked per coordinate.
    #[arg(long)]
    d: f64,
    /// Mask all listed coordinates in one shared set of rows.
    #[arg(long)]
    joint: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    /// Engine configuration as TOML (fields of EngineConfig); overrides the
    /// engine flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "kmahal")]
    algorithm: Algorithm,
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Imputation supplying the starting values of missing cells.
    #[arg(long, default_value = "mean")]
    imputation: ImputationMethod,
    #[arg(long, default_value_t = 5)]
    k_neighbors: usize,
    /// Output JSON file (standard output if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Output directory; overrides `output_dir` of the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write one row per engine run.
    #[arg(long)]
    log_restarts: bool,
}

#[derive(Args)]
struct SummarizeArgs {
    records: PathBuf,
    /// Output CSV (standard output if absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

enum Failure {
    Config(String),
    Runtime(String),
}

type CliResult<T> = Result<T, Failure>;

fn classify(e: kmahal::Error) -> Failure {
    if e.is_config() {
        Failure::Config(e.to_string())
    } else {
        Failure::Runtime(e.to_string())
    }
}

/// Errors while reading user-supplied inputs are configuration errors.
fn input<T>(what: &Path, r: kmahal::Result<T>) -> CliResult<T> {
    r.map_err(|e| match e {
        kmahal::Error::Io(io) => Failure::Config(format!("{}: {io}", what.display())),
        other => classify(other),
    })
}

fn runtime<T>(r: kmahal::Result<T>) -> CliResult<T> {
    r.map_err(classify)
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

fn write_metadata(path: &Path, meta: &DatasetMetadata) -> CliResult<()> {
    let json = serde_json::to_string_pretty(meta).expect("metadata serializes");
    write_file(&sidecar(path), &json)
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn gen(args: GenArgs) -> CliResult<()> {
    let spec = match &args.spec {
        Some(path) => read_toml::<MixtureSpec>(path)?,
        None => MixtureSpec {
            mc_samples: args.mc_samples,
            ..MixtureSpec::new(args.k, args.p, args.n, args.omega).with_seed(args.seed)
        },
    };
    runtime(spec.validate())?;
    let mixture = runtime(generate_mixture(&spec))?;
    runtime(mixture.data.save(&args.out))?;
    log::info!(
        "achieved maximum overlap {} at scale {}",
        mixture.achieved_max_overlap,
        mixture.scale
    );
    write_metadata(
        &args.out,
        &DatasetMetadata {
            n: spec.n,
            p: spec.p,
            seed: spec.seed,
            mixture: Some(mixture.metadata(&spec)),
            missingness: None,
            missing_per_column: vec![0; spec.p],
        },
    )
}

fn inject(args: InjectArgs) -> CliResult<()> {
    let ds = input(&args.input, Dataset::load(&args.input))?;
    let plan = MissingnessPlan {
        per_coordinate: !args.joint,
        ..MissingnessPlan::new(args.coords, args.d)
    };
    let out = runtime(inject_missing(&ds, &plan, args.seed))?;
    runtime(out.save(&args.out))?;
    write_metadata(
        &args.out,
        &DatasetMetadata {
            n: out.n(),
            p: out.p(),
            seed: args.seed,
            mixture: None,
            missing_per_column: out.missing_per_column(),
            missingness: Some(plan),
        },
    )
}

fn fit(args: FitArgs) -> CliResult<()> {
    let ds = input(&args.input, Dataset::load(&args.input))?;
    let cfg = match &args.config {
        Some(path) => read_toml::<EngineConfig>(path)?,
        None => {
            let k = match (args.k, ds.labels()) {
                (Some(k), _) => k,
                (None, Some(labels)) => {
                    let mut l = labels.to_vec();
                    l.sort_unstable();
                    l.dedup();
                    l.len()
                }
                (None, None) => {
                    return Err(Failure::Config(
                        "--K is required for datasets without a label column".into(),
                    ))
                }
            };
            EngineConfig::new(args.algorithm, k)
                .with_restarts(args.restarts)
                .with_seed(args.seed)
        }
    };
    runtime(cfg.validate())?;
    let icfg = ImputationConfig {
        method: args.imputation,
        k_neighbors: args.k_neighbors,
        standardize: false,
    };
    let start = runtime(impute(&ds, &icfg))?.data;
    let result = runtime(fit_from(&ds, &start, &cfg))?;
    let doc = result.to_document();
    match &args.out {
        Some(path) => write_file(path, &doc),
        None => {
            println!("{doc}");
            Ok(())
        }
    }
}

fn run(args: RunArgs) -> CliResult<()> {
    let mut cfg = input(&args.config, ExperimentConfig::load(&args.config))?;
    if let Some(out) = args.out {
        cfg.output_dir = Some(out);
    }
    if args.log_restarts {
        cfg.log_restarts = true;
    }
    if cfg.output_dir.is_none() {
        return Err(Failure::Config(
            "no output directory: set output_dir or pass --out".into(),
        ));
    }
    let threads = runtime(threads_from_env())?;
    let output = runtime(runtime(with_threads(threads, || run_experiment(&cfg)))?)?;
    let failed = output.records.iter().filter(|r| !r.is_ok()).count();
    if failed > 0 {
        log::warn!("{failed} of {} cells failed", output.records.len());
    }
    Ok(())
}

fn summarize_cmd(args: SummarizeArgs) -> CliResult<()> {
    let records = input(&args.records, read_records(&args.records))?;
    let rows = summarize(&records);
    match &args.out {
        Some(path) => runtime(write_summary(path, &rows)),
        None => {
            print!("{}", summary_to_string(&rows));
            Ok(())
        }
    }
}

fn demo(args: DemoArgs) -> CliResult<()> {
    let bundle = runtime(demo_figure1(args.seed))?;
    runtime(bundle.write(&args.out))?;
    for (alg, _) in &bundle.engines {
        println!(
            "{alg}: {} misclassified",
            bundle.misclassified(*alg).unwrap_or(0)
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Inject(a) => inject(a),
        Command::Fit(a) => fit(a),
        Command::Run(a) => run(a),
        Command::Summarize(a) => summarize_cmd(a),
        Command::DemoFig1(a) => demo(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
