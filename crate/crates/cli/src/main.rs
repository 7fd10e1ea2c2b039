mod commands;
mod failure;
mod formats;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cnnm::select::{DEFAULT_ALPHA, DEFAULT_IMAGE_KERNEL};

use failure::Failure;

#[derive(Parser, Debug)]
#[command(name = "cnnm", version, about = "Tensor completion and forecasting by convolution nuclear norm minimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Predict the next samples of a series (CSV) or tensor series (CNT1, time last)
    Forecast(ForecastArgs),
    /// Fill in the missing entries of an image (PGM) or tensor (CNT1)
    Complete(CompleteArgs),
    /// Fourier magnitudes and their Gini index
    Spectrum(SpectrumArgs),
    /// Leading convolution eigenvectors and all convolution eigenvalues
    Eigs(EigsArgs),
    /// Score square kernels by averaged coding length
    KernelSelect(KernelSelectArgs),
    /// Sine-mixture forecasting success grid
    Bench(BenchArgs),
}

/// `auto` or explicit extents like `13,13,31`.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelArg {
    Auto,
    Explicit(Vec<usize>),
}

fn parse_kernel(s: &str) -> Result<KernelArg, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(KernelArg::Auto);
    }
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| format!("bad kernel extent {t:?}; expected e.g. 13,13")))
        .collect::<Result<Vec<_>, _>>()
        .map(KernelArg::Explicit)
}

/// Comma-separated extents; a newtype so clap takes it as one value.
#[derive(Clone, Debug, PartialEq)]
pub struct Dims(pub Vec<usize>);

fn parse_dims(s: &str) -> Result<Dims, String> {
    match parse_kernel(s)? {
        KernelArg::Explicit(d) => Ok(Dims(d)),
        KernelArg::Auto => Err("expected comma-separated extents".into()),
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Cnnm,
    Dftl1,
    /// Matrix nuclear norm baseline (completion of order-2 data only)
    Nnm,
}

#[derive(Args, Debug)]
pub struct SolverArgs {
    /// Fidelity weight
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// JSON file with a full solver configuration; flags above override it
    #[arg(long)]
    pub solver_config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ForecastArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub horizon: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Cnnm)]
    pub method: MethodArg,
    #[arg(long, value_parser = parse_kernel, default_value = "auto")]
    pub kernel: KernelArg,
    /// Fraction of the time extent covered by an automatic kernel
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Automatic kernel extent on non-time axes
    #[arg(long, default_value_t = DEFAULT_IMAGE_KERNEL)]
    pub image_default: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args, Debug)]
pub struct CompleteArgs {
    /// Data file (PGM or CNT1); with --missing-rate it also serves as ground truth
    #[arg(long)]
    pub input: PathBuf,
    /// Observation mask (CNT1 of zeros and ones)
    #[arg(long, conflicts_with = "missing_rate", required_unless_present = "missing_rate")]
    pub mask: Option<PathBuf>,
    /// Hide this fraction of entries uniformly at random
    #[arg(long)]
    pub missing_rate: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Ground truth for PSNR on the missing entries
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MethodArg::Cnnm)]
    pub method: MethodArg,
    #[arg(long, value_parser = parse_kernel, default_value = "auto")]
    pub kernel: KernelArg,
    #[arg(long, default_value_t = DEFAULT_IMAGE_KERNEL)]
    pub image_default: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    /// CSV series, PGM image or CNT1 tensor
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EigsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = parse_dims)]
    pub kernel: Dims,
    /// Number of leading eigenvectors to write
    #[arg(long, default_value_t = 4)]
    pub count: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct KernelSelectArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Candidate square sizes, e.g. 3,5,7; defaults to odd sizes 3..=31
    #[arg(long, value_parser = parse_dims)]
    pub sizes: Option<Dims>,
    /// Distortion level; defaults to a tenth of the RMS value
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// JSON phase-transition spec; omitted fields take their defaults
    #[arg(long)]
    pub spec: PathBuf,
    /// Overrides the spec's seed
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("CNNM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::config(format!("CNNM_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::config(format!("cannot size the thread pool: {e}")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    configure_threads()?;
    match cli.command {
        Command::Forecast(a) => commands::forecast(&a),
        Command::Complete(a) => commands::complete(&a),
        Command::Spectrum(a) => commands::spectrum(&a),
        Command::Eigs(a) => commands::eigs(&a),
        Command::KernelSelect(a) => commands::kernel_select(&a),
        Command::Bench(a) => commands::bench(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { failure::CONFIG } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
