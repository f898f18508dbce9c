//! Command-line front end.
//!
//! Exit codes: 0 success, 2 usage error, otherwise
//! [`Error::exit_code`](crate::error::Error::exit_code) of the failure.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{self, BenchParams, BenchResult, Kernel};
use crate::error::{Error, Result};
use crate::io::{self, SyntheticSpec};
use crate::par;
use crate::pipeline;
use crate::types::{FinalBudget, InterVariant, PruneConfig};

pub const EXIT_BAD_FLAGS: i32 = 2;
pub const SEED_ENV: &str = "TOKENTRIM_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "tokentrim",
    version,
    about = "Multi-image visual token pruning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Prune a TTB1 bundle and write the selection as JSON.
    Prune(PruneArgs),
    /// Compute redundancy signals and budgets only.
    Analyze(AnalyzeArgs),
    /// Write a synthetic TTB1 bundle.
    Gen(GenArgs),
    /// Time naive and fast kernels against each other.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InterArg {
    Global,
    Positionwise,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// JSON config file; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    no_fast_path: bool,
    #[arg(long, value_enum)]
    inter_variant: Option<InterArg>,
}

#[derive(Debug, Args)]
struct PruneArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Retention ratio in (0, 1).
    #[arg(long, conflicts_with = "final_count")]
    ratio: Option<f64>,
    /// Absolute final token count.
    #[arg(long = "final", id = "final_count")]
    final_count: Option<usize>,
    /// Also write the pruned bundle as TTB1.
    #[arg(long)]
    emit_pruned: Option<PathBuf>,
    /// Worker threads for the per-image stage.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Defaults to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    images: usize,
    #[arg(long)]
    tokens: usize,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 4)]
    clusters: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 0.2)]
    drift: f64,
    #[arg(long, default_value_t = 16)]
    text: usize,
    #[arg(long)]
    output: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KernelArg {
    Diversity,
    Alignment,
    Pareto,
    All,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "all")]
    kernel: KernelArg,
    /// Problem sizes; each kernel's default when omitted.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    text_tokens: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    /// Write rows as JSON here as well as the table on stdout.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::BadConfig(format!("{SEED_ENV}={v:?} is not a u64"))),
        Err(_) => Ok(0),
    }
}

/// Defaults, then the config file, then flags.
fn build_config(args: &ConfigArgs) -> Result<PruneConfig> {
    let mut cfg = match &args.config {
        Some(path) => io::read_config(path)?,
        None => PruneConfig::default(),
    };
    if args.no_fast_path {
        cfg.fast_path = false;
    }
    match args.inter_variant {
        Some(InterArg::Global) => cfg.inter_variant = InterVariant::GlobalMean,
        Some(InterArg::Positionwise) => cfg.inter_variant = InterVariant::PositionWise,
        None => {}
    }
    Ok(cfg)
}

fn staged<T>(stage: &'static str, r: Result<T>) -> std::result::Result<T, (&'static str, Error)> {
    r.map_err(|e| (stage, e))
}

type Outcome = std::result::Result<(), (&'static str, Error)>;

fn cmd_prune(args: PruneArgs) -> Outcome {
    let mut cfg = staged("config", build_config(&args.config))?;
    if let Some(r) = args.ratio {
        cfg.final_budget = FinalBudget::Ratio(r);
    }
    if let Some(n) = args.final_count {
        cfg.final_budget = FinalBudget::Absolute(n);
    }
    staged("config", cfg.validate())?;
    let bundle = staged("load", io::read_bundle(&args.input))?;
    let (report, sel) = staged(
        "prune",
        par::with_threads(args.threads, || pipeline::prune(&bundle, &cfg)),
    )?;
    staged("write", io::write_result(&cfg, &report, &sel, &args.output))?;
    if let Some(path) = &args.emit_pruned {
        let pruned = staged("write", pipeline::apply_selection(&bundle, &sel))?;
        staged("write", io::write_bundle(&pruned, path))?;
    }
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Outcome {
    let cfg = staged("config", build_config(&args.config))?;
    staged("config", cfg.validate())?;
    let bundle = staged("load", io::read_bundle(&args.input))?;
    let report = staged("analyze", pipeline::analyze(&bundle, &cfg))?;
    match &args.output {
        Some(path) => staged("write", io::write_report(&cfg, &report, path))?,
        None => {
            let doc = io::report_document(&cfg, &report);
            let text = staged(
                "write",
                serde_json::to_string_pretty(&doc).map_err(Error::from),
            )?;
            println!("{text}");
        }
    }
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Outcome {
    let spec = SyntheticSpec {
        n_images: args.images,
        tokens_per_image: args.tokens,
        dim: args.dim,
        seed: staged("gen", resolve_seed(args.seed))?,
        clusters: args.clusters,
        noise: args.noise,
        drift: args.drift,
        text_tokens: args.text,
    };
    let bundle = staged("gen", io::generate_synthetic(&spec))?;
    staged("write", io::write_bundle(&bundle, &args.output))
}

fn cmd_bench(args: BenchArgs) -> Outcome {
    let kernels: &[Kernel] = match args.kernel {
        KernelArg::Diversity => &[Kernel::Diversity],
        KernelArg::Alignment => &[Kernel::Alignment],
        KernelArg::Pareto => &[Kernel::Pareto],
        KernelArg::All => &[Kernel::Diversity, Kernel::Alignment, Kernel::Pareto],
    };
    let seed = staged("bench", resolve_seed(args.seed))?;
    let mut rows: Vec<BenchResult> = Vec::new();
    for &kernel in kernels {
        let base = BenchParams::defaults(kernel);
        let sizes = if args.n.is_empty() {
            vec![base.n]
        } else {
            args.n.clone()
        };
        for n in sizes {
            let p = BenchParams {
                n,
                dim: args.dim.unwrap_or(base.dim),
                text_tokens: args.text_tokens.unwrap_or(base.text_tokens),
                budget: args.budget.unwrap_or(base.budget),
                repeats: args.repeats,
                seed,
            };
            rows.push(staged("bench", bench::run(kernel, &p))?);
        }
    }
    print!("{}", bench::format_table(&rows));
    if let Some(path) = &args.json {
        let text = staged(
            "write",
            serde_json::to_string_pretty(&rows).map_err(Error::from),
        )?;
        staged(
            "write",
            std::fs::write(path, text + "\n").map_err(Error::from),
        )?;
    }
    Ok(())
}

/// Parse `args` (including the program name) and run. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_BAD_FLAGS } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Prune(a) => cmd_prune(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match outcome {
        Ok(()) => 0,
        Err((stage, e)) => {
            eprintln!("tokentrim: {stage}: {e}");
            e.exit_code()
        }
    }
}
