use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use repsel::selection::OutlierMode;
use repsel::SketchConfig;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "repsel", version, about = "Outlier-aware representative selection")]
pub struct Cli {
    /// Flat `key = value` file; keys are long flag names. Flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build (or validate and repair) a kernel matrix.
    #[command(args_override_self = true)]
    Gram(GramArgs),
    /// Select representatives.
    #[command(args_override_self = true)]
    Select(SelectArgs),
    /// Score and flag outliers.
    #[command(args_override_self = true)]
    Outliers(OutliersArgs),
    /// Generate a synthetic dataset.
    #[command(args_override_self = true)]
    Synth(SynthArgs),
    /// Time full against sketched solves.
    #[command(args_override_self = true)]
    Bench(BenchArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelChoice {
    Linear,
    Cosine,
    Rbf,
    /// The input CSV already is a square kernel matrix.
    Precomputed,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct KernelArgs {
    #[arg(long, value_enum, default_value_t = KernelChoice::Rbf)]
    pub kernel: KernelChoice,
    /// RBF bandwidth; defaults to `gamma-scale / median squared distance`.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Multiplier of the median heuristic [default: 1; outliers: 5].
    #[arg(long)]
    pub gamma_scale: Option<f64>,
    /// Clip negative eigenvalues (default for precomputed kernels).
    #[arg(long, conflicts_with = "no_psd_repair")]
    pub psd_repair: bool,
    #[arg(long)]
    pub no_psd_repair: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct InputArgs {
    /// Data CSV: one sample per row.
    #[arg(long, short = 'i', required_unless_present = "gram", conflicts_with = "gram")]
    pub input: Option<PathBuf>,
    /// Square precomputed kernel CSV.
    #[arg(long)]
    pub gram: Option<PathBuf>,
    /// The last input column holds integer labels (negative = outlier).
    #[arg(long)]
    pub labeled: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
}

fn parse_sketch(s: &str) -> Result<SketchSpec, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected r,rhat,I, got `{s}`"));
    }
    let num = |p: &str| p.parse::<usize>().map_err(|_| format!("`{p}` is not a count"));
    Ok(SketchSpec {
        r: num(parts[0])?,
        r_hat: num(parts[1])?,
        iterations: num(parts[2])?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SketchSpec {
    pub r: usize,
    pub r_hat: usize,
    pub iterations: usize,
}

impl SketchSpec {
    pub fn config(&self, seed: u64) -> SketchConfig {
        SketchConfig {
            r: self.r,
            r_hat: self.r_hat,
            iterations: self.iterations,
            seed,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SolveArgs {
    /// lambda as a multiple of the critical value below which R = 0
    /// [default: 5; outliers: 20].
    #[arg(long)]
    pub lambda_alpha: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_abs: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tol_rel: f64,
    #[arg(long, default_value_t = 10_000)]
    pub max_iter: usize,
    /// Solve on a random sketch: `r,rhat,I`.
    #[arg(long, value_parser = parse_sketch)]
    pub sketch: Option<SketchSpec>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Treat non-convergence as an error.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GramArgs {
    #[arg(long, short = 'i')]
    pub input: PathBuf,
    #[arg(long)]
    pub labeled: bool,
    #[command(flatten)]
    #[serde(flatten)]
    pub kernel: KernelArgs,
    /// Kernel CSV output.
    #[arg(long, short = 'o')]
    pub output: PathBuf,
    /// JSON report path (stdout when absent).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SelectArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub solve: SolveArgs,
    #[arg(long, default_value_t = 0.95)]
    pub tau: f64,
    /// Outlier rejection threshold; above 1 disables rejection.
    #[arg(long, default_value_t = 0.9)]
    pub theta: f64,
    #[arg(long)]
    pub max_k: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub row_tol: f64,
    /// JSON report path (stdout when absent).
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<OutlierMode, String> {
    s.parse().map_err(|e: repsel::Error| e.to_string())
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct OutliersArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub solve: SolveArgs,
    /// `threshold:<theta>` or `topk:<k>` [default: threshold:0.995].
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<OutlierMode>,
    /// JSON report path (stdout when absent).
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}

/// Defaults shared by `select` and `gram`.
pub const GAMMA_SCALE: f64 = 1.0;
pub const LAMBDA_ALPHA: f64 = 5.0;
/// Detection defaults: a narrower kernel and a larger lambda give isolated
/// samples nonzero rows, and a strict threshold keeps inliers out.
pub const OUTLIER_GAMMA_SCALE: f64 = 5.0;
pub const OUTLIER_LAMBDA_ALPHA: f64 = 20.0;
pub const OUTLIER_THETA: f64 = 0.995;

impl Command {
    /// Replaces unset command-dependent options by their defaults so the
    /// echoed configuration shows the values actually used.
    pub fn resolve_defaults(&mut self) {
        match self {
            Command::Gram(a) => {
                a.kernel.gamma_scale.get_or_insert(GAMMA_SCALE);
            }
            Command::Select(a) => {
                a.input.kernel.gamma_scale.get_or_insert(GAMMA_SCALE);
                a.solve.lambda_alpha.get_or_insert(LAMBDA_ALPHA);
            }
            Command::Outliers(a) => {
                a.input.kernel.gamma_scale.get_or_insert(OUTLIER_GAMMA_SCALE);
                a.solve.lambda_alpha.get_or_insert(OUTLIER_LAMBDA_ALPHA);
                a.mode.get_or_insert(OutlierMode::Threshold(OUTLIER_THETA));
            }
            Command::Synth(_) | Command::Bench(_) => {}
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetChoice {
    Swissroll,
    Sphere,
    Trefoil,
    Clusters,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutlierChoice {
    Uniform,
    Repetitive,
    Structured,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value_t = DatasetChoice::Swissroll)]
    pub dataset: DatasetChoice,
    #[arg(long, default_value_t = 400)]
    pub n1: usize,
    #[arg(long, default_value_t = 0)]
    pub n2: usize,
    #[arg(long, value_enum, default_value_t = OutlierChoice::Uniform)]
    pub outliers: OutlierChoice,
    #[arg(long, default_value_t = 0.1)]
    pub repeat_fraction: f64,
    /// Dimension of the structured-outlier subspace.
    #[arg(long, default_value_t = 10)]
    pub rank: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// Number of blobs for `clusters`; `n1` must be a multiple of it.
    #[arg(long, default_value_t = 3)]
    pub clusters: usize,
    #[arg(long, default_value_t = 10.0)]
    pub separation: f64,
    /// Ambient dimension of the random isometric embedding.
    #[arg(long, default_value_t = 50)]
    pub ambient: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Data CSV output (label in the last column).
    #[arg(long, short = 'o')]
    pub output: PathBuf,
    /// JSON report path (stdout when absent).
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct SizeList(pub Vec<usize>);

fn parse_sizes(s: &str) -> Result<SizeList, String> {
    let sizes = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| format!("`{p}` is not a size")))
        .collect::<Result<Vec<_>, _>>()?;
    if sizes.iter().any(|&n| n < 4) {
        return Err("sizes must be at least 4".into());
    }
    Ok(SizeList(sizes))
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BenchArgs {
    /// Comma-separated sample counts; half inliers, half uniform outliers.
    #[arg(long, value_parser = parse_sizes, default_value = "500,1000,2000")]
    pub sizes: SizeList,
    /// `r,rhat,I`; `r` is capped at the size.
    #[arg(long, value_parser = parse_sketch, default_value = "200,20,3")]
    pub sketch: SketchSpec,
    #[arg(long, default_value_t = 5.0)]
    pub lambda_alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma_scale: f64,
    #[arg(long, default_value_t = 50)]
    pub ambient: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// JSON report path (stdout when absent).
    #[arg(long, short = 'o')]
    pub output: Option<PathBuf>,
}
