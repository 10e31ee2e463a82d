use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use skloc_core::amp::DEFAULT_K_AMP;
use skloc_core::sampler::{DEFAULT_BIG_L, DEFAULT_DELTA};
use skloc_core::state_evolution::DEFAULT_QUADRATURE_ORDER;
use skloc_core::tap::{DEFAULT_ETA, DEFAULT_K_NGD};

#[derive(Parser, Debug)]
#[command(name = "skloc", version, about = "Stochastic-localization sampling for the SK model")]
pub struct Cli {
    /// Worker threads (0 = all logical cores)
    #[arg(long, env = "SKLOC_THREADS", global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Draw samples with the localization sampler
    #[command(allow_negative_numbers = true)]
    Sample(SampleArgs),
    /// Print the state-evolution schedule q*(β, ℓδ) as JSON
    #[command(name = "se-table", allow_negative_numbers = true)]
    SeTable(SeTableArgs),
    /// Run the oracle self-checks and print a JSON report
    #[command(allow_negative_numbers = true)]
    Verify(VerifyArgs),
    /// Disorder-chaos study by exact enumeration
    #[command(allow_negative_numbers = true)]
    Chaos(ChaosArgs),
    /// Disorder and temperature stability of the sampler
    #[command(allow_negative_numbers = true)]
    Stability(StabilityArgs),
    /// Sampling quality against exact Gibbs draws
    #[command(allow_negative_numbers = true)]
    Quality(QualityArgs),
    /// Time one localization run per system size
    #[command(allow_negative_numbers = true)]
    Bench(BenchArgs),
}

/// Paths shared by every subcommand; never part of the echoed config.
#[derive(Args, Debug, Clone, Default)]
pub struct IoArgs {
    /// TOML or JSON config; flags given on the command line take precedence
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output path
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Sampler parameters common to all sampling subcommands.
#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct StepArgs {
    /// Euler step size δ
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    /// Number of Euler steps (horizon T = L·δ)
    #[arg(long = "L", id = "L", default_value_t = DEFAULT_BIG_L)]
    #[serde(rename = "L")]
    pub big_l: usize,
    /// AMP iterations per mean estimate
    #[arg(long = "kamp", id = "k_amp", default_value_t = DEFAULT_K_AMP)]
    pub k_amp: usize,
    /// Natural-gradient steps per mean estimate
    #[arg(long = "kngd", id = "k_ngd", default_value_t = DEFAULT_K_NGD)]
    pub k_ngd: usize,
    /// Natural-gradient step size η
    #[arg(long, default_value_t = DEFAULT_ETA)]
    pub eta: f64,
    /// Top-level seed; all randomness derives from it
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Gauss–Hermite order for state evolution
    #[arg(long = "quadrature-order", id = "quadrature_order", default_value_t = DEFAULT_QUADRATURE_ORDER)]
    pub quadrature_order: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SampleArgs {
    /// Inverse temperature β
    #[arg(long, default_value_t = 0.3)]
    pub beta: f64,
    /// Number of spins
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub step: StepArgs,
    /// Independent samples to draw
    #[arg(long, default_value_t = 1)]
    pub replicas: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
    /// Write ŷ-path norms of replica 0 as CSV
    #[arg(long = "emit-trajectory")]
    #[serde(skip)]
    pub emit_trajectory: Option<PathBuf>,
    /// Coupling matrix in binary format (default: GOE drawn from the seed)
    #[arg(long)]
    #[serde(skip)]
    pub matrix: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SeTableArgs {
    /// Inverse temperature β
    #[arg(long, default_value_t = 0.3)]
    pub beta: f64,
    /// Step size δ
    #[arg(long, default_value_t = DEFAULT_DELTA)]
    pub delta: f64,
    /// Number of steps
    #[arg(long = "L", id = "L", default_value_t = DEFAULT_BIG_L)]
    #[serde(rename = "L")]
    pub big_l: usize,
    /// Gauss–Hermite order
    #[arg(long = "quadrature-order", id = "quadrature_order", default_value_t = DEFAULT_QUADRATURE_ORDER)]
    pub quadrature_order: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct VerifyArgs {
    /// System size for the enumeration checks
    #[arg(long, default_value_t = 12)]
    pub n: usize,
    /// Seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ChaosArgs {
    /// Inverse temperature β
    #[arg(long, default_value_t = 1.5)]
    pub beta: f64,
    /// Number of spins (at most 16)
    #[arg(long, default_value_t = 14)]
    pub n: usize,
    /// Interpolation parameters s
    #[arg(long = "s-grid", id = "s_grid", value_delimiter = ',', default_values_t = vec![0.0, 0.1, 0.3, 0.6])]
    pub s_grid: Vec<f64>,
    /// Disorder draws
    #[arg(long = "disorder-samples", id = "disorder_samples", default_value_t = 100)]
    pub disorder_samples: usize,
    /// Exact-sample batch size for W₂ (0 disables)
    #[arg(long = "w2-batch", id = "w2_batch", default_value_t = 200)]
    pub w2_batch: usize,
    /// Seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct StabilityArgs {
    /// Inverse temperature β
    #[arg(long, default_value_t = 0.3)]
    pub beta: f64,
    /// Number of spins
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub step: StepArgs,
    /// Disorder perturbations s
    #[arg(long = "s-grid", id = "s_grid", value_delimiter = ',', default_values_t = vec![0.0, 0.01, 0.05, 0.2])]
    pub s_grid: Vec<f64>,
    /// Perturbed inverse temperatures β'
    #[arg(long = "beta-grid", id = "beta_grid", value_delimiter = ',', default_values_t = vec![0.3, 0.31, 0.35])]
    pub beta_grid: Vec<f64>,
    /// Coupled replicas
    #[arg(long, default_value_t = 20)]
    pub replicas: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct QualityArgs {
    /// Inverse temperatures
    #[arg(long = "beta-grid", id = "beta_grid", value_delimiter = ',', default_values_t = vec![0.0, 0.3, 0.45])]
    pub beta_grid: Vec<f64>,
    /// Number of spins (at most 14)
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Samples per method
    #[arg(long, default_value_t = 2000)]
    pub replicas: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub step: StepArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct BenchArgs {
    /// System sizes, ascending
    #[arg(long = "n-grid", id = "n_grid", value_delimiter = ',', default_values_t = vec![500usize, 1000, 2000])]
    pub n_grid: Vec<usize>,
    /// Inverse temperature β
    #[arg(long, default_value_t = 0.3)]
    pub beta: f64,
    /// Timed runs per size (fastest is kept)
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub step: StepArgs,
    #[command(flatten)]
    #[serde(skip)]
    pub io: IoArgs,
}
