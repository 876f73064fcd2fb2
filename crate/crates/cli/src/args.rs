use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qcgla::kernels::KernelTag;
use qcgla::quant::DType;

#[derive(Debug, Parser)]
#[command(name = "qcgla", version, about = "Quantized dot-product kernels on a linear-array accelerator model")]
pub struct Cli {
    /// Seed for every generator.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Accelerator clock in Hz.
    #[arg(long, global = true)]
    pub freq: Option<f64>,
    /// Active lanes (upper bound for sweep-lanes).
    #[arg(long, global = true, value_parser = clap::value_parser!(u8).range(1..=8))]
    pub lanes: Option<u8>,
    #[arg(long, global = true)]
    pub host_cores: Option<usize>,
    /// Machine config file (key = value lines).
    #[arg(long, global = true, env = "QCGLA_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output file; records go to stdout otherwise.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Quantize an F32 QCGT or raw little-endian binary32 file.
    Quantize(QuantizeArgs),
    /// Expand a quantized QCGT file back to F32.
    Dequantize(DequantizeArgs),
    /// Run the kernel/reference equivalence suites.
    Check(CheckArgs),
    /// Time a matrix-vector product and report the modelled phases.
    Bench(BenchArgs),
    /// Simulate a trace and report per-call phase times.
    Simulate(TraceArgs),
    /// Simulate a trace at 1..=lanes lanes.
    SweepLanes(SweepArgs),
    /// Rank devices by power-delay product.
    ComparePdp(CompareArgs),
    /// Write a synthetic JSON-lines trace.
    GenTrace(GenTraceArgs),
}

#[derive(Debug, Args)]
pub struct QuantizeArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub dtype: DType,
    /// Row length of a raw binary32 input.
    #[arg(long)]
    pub cols: Option<usize>,
    /// Expected row count of a raw input.
    #[arg(long)]
    pub rows: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DequantizeArgs {
    pub input: PathBuf,
    /// Write bare little-endian binary32 values instead of a QCGT file.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Randomized cases per suite.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Gaussian trials behind the repack accuracy figure.
    #[arg(long, default_value_t = crate::check::ACCURACY_TRIALS)]
    pub accuracy_trials: usize,
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, default_value = "q8_0")]
    pub kernel: KernelTag,
    #[arg(long, default_value_t = 256)]
    pub m: usize,
    #[arg(long, default_value_t = 4096)]
    pub k: usize,
    #[arg(long, default_value_t = 3)]
    pub iters: usize,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    pub trace: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub trace: PathBuf,
    /// Also write a speedup chart.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// `ref-q3_k`, `ref-q8_0` or a scenario file.
    pub scenario: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    UnetLike,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelChoice {
    #[value(name = "q8_0")]
    Q8_0,
    #[value(name = "q3_k")]
    Q3K,
    Mixed,
}

#[derive(Debug, Args)]
pub struct GenTraceArgs {
    #[arg(long, value_enum, default_value_t = Preset::UnetLike)]
    pub preset: Preset,
    #[arg(long, value_enum, default_value_t = KernelChoice::Q3K)]
    pub kernel: KernelChoice,
    /// Output rows (uniform preset).
    #[arg(long, default_value_t = 64)]
    pub m: usize,
    /// Reduction length (uniform preset).
    #[arg(long, default_value_t = 2048)]
    pub k: usize,
    #[arg(long, default_value_t = 16)]
    pub count: usize,
}
