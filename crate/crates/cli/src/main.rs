//! `sme`: quantize, map, squeeze, simulate and account weight matrices on
//! bit-sliced crossbars.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "sme", version, about = "Bit-sparse crossbar mapping pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Quantize a weight tensor (SMET or CSV) into windowed codewords.
    Quantize(QuantizeArgs),
    /// Bit-slice a quantized tensor onto crossbars.
    Map(MapArgs),
    /// Squeeze out leading bit planes of a mapped layer.
    Squeeze(SqueezeArgs),
    /// Run a layout on an activation vector, bit-serially.
    Simulate(SimulateArgs),
    /// Per-bit-position densities of a quantized tensor.
    Stats(StatsArgs),
    /// Quantization error and bit sparsity across window sizes.
    Sweep(SweepArgs),
    /// Index overhead and energy/area estimate for a layout.
    Cost(CostArgs),
    /// Crossbars used by bit-sliced versus conventional mapping.
    Compare(CompareArgs),
    /// Write a seeded synthetic tensor or activation vector.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct QuantArgs {
    /// Codeword width N_q.
    #[arg(long = "nq", default_value_t = 8)]
    nq: u8,
    /// Window size S.
    #[arg(long, default_value_t = 3)]
    s: u8,
    #[arg(long, default_value = "half-away")]
    rounding: String,
}

#[derive(Debug, Args)]
struct QuantizeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    quant: QuantArgs,
    /// Per-weight bit widths (SMET or CSV, same shape) for mixed precision.
    #[arg(long)]
    widths: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MapArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Crossbar size as ROWSxCOLS.
    #[arg(long, default_value = "128x128")]
    xb: String,
    #[arg(long, default_value_t = 1)]
    cell_bits: u8,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SqueezeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    degree: u8,
    /// Stop a group at the first step whose flagged-row fraction exceeds this.
    #[arg(long, default_value_t = 1.0)]
    threshold: f64,
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    layout: PathBuf,
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    act: PathBuf,
    #[arg(long = "na", default_value_t = 8)]
    na: u8,
    /// `ideal` or `bits:B`.
    #[arg(long, default_value = "ideal")]
    adc: String,
    /// Drive crossbars the empty index marks as all-zero.
    #[arg(long)]
    no_skip_empty: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "nq", default_value_t = 8)]
    nq: u8,
    /// Window sizes as LO..HI (inclusive) or a single value.
    #[arg(long, default_value = "1..6")]
    s: String,
    #[arg(long, default_value = "half-away")]
    rounding: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CostArgs {
    #[arg(long)]
    layout: PathBuf,
    #[arg(long)]
    plan: Option<PathBuf>,
    #[arg(long)]
    config: PathBuf,
    /// Input bit width used for op and conversion counts.
    #[arg(long = "na", default_value_t = 8)]
    na: u8,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    quant: QuantArgs,
    #[arg(long, default_value = "128x128")]
    xb: String,
    #[arg(long, default_value_t = 1)]
    cell_bits: u8,
    /// Also report counts after squeezing by this degree.
    #[arg(long)]
    degree: Option<u8>,
    #[arg(long)]
    widths: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SynthKind {
    Normal,
    Uniform,
    Act,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: SynthKind,
    #[arg(long, default_value_t = 256)]
    rows: usize,
    /// Columns (ignored for activations).
    #[arg(long, default_value_t = 256)]
    cols: usize,
    /// Standard deviation (normal) or maximum magnitude (uniform, act).
    #[arg(long, default_value_t = 0.05)]
    scale: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or_default();
            eprintln!("sme: {}", first.trim_start_matches("error: "));
            return ExitCode::from(1);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            eprintln!("sme: {}", chain.join(": "));
            ExitCode::from(2)
        }
    }
}
