use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Anosov C-systems on the N-torus: operator matrices, spectra, correlation
/// decay, time scales and the matrix-recurrence generator.
#[derive(Debug, Parser, Serialize)]
#[command(name = "anosov", version, propagate_version = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Write the result to this file instead of stdout. Relative paths are
    /// resolved against $ANOSOV_OUT_DIR when it is set.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,

    /// Worker threads for parallel kernels (default: all cores). Recorded
    /// in the output header; results do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case", tag = "subcommand")]
pub enum Command {
    /// Print the operator matrix of dimension N, or an exact power of it.
    Matrix(MatrixArgs),
    /// Eigenvalues, C-condition and entropy; CSV rows are the eigenvalue
    /// distribution in the complex plane.
    Spectrum(SpectrumArgs),
    /// Correlation series D_n(f, g) over a range of n.
    Correlate(CorrelateArgs),
    /// Monte Carlo scan of the one-step polynomial correlators D_1(r), K_1(r) on N=2.
    #[command(name = "scan-d1")]
    ScanD1(ScanArgs),
    /// Exponential fit of a correlation series against the entropy bound.
    #[command(name = "fit-decay")]
    FitDecay(FitArgs),
    /// Decorrelation, interaction and stationary time scales.
    Timescales(TimescaleArgs),
    /// Emit a stream of the matrix-recurrence generator modulo 2^61-1.
    Rng(RngArgs),
    /// Statistical self-test of the generator.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args, Serialize)]
pub struct MatrixArgs {
    /// Dimension of the torus.
    #[arg(long = "N", visible_alias = "dim", default_value_t = 2)]
    pub dim: usize,
    /// Exponent applied to the matrix.
    #[arg(long, default_value_t = 1)]
    pub power: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args, Serialize)]
pub struct SpectrumArgs {
    #[arg(long = "N", visible_alias = "dim", default_value_t = 2)]
    pub dim: usize,
    /// Also emit the spectrum of the inverse operator (second table, or
    /// `<stem>_inverse.csv` next to --output).
    #[arg(long)]
    pub inverse: bool,
    /// Distance from the unit circle treated as "on" the circle.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    /// Exact frequency matching.
    Exact,
    /// Monte Carlo over lattice samples.
    Mc,
}

#[derive(Debug, Args, Serialize)]
pub struct SeriesArgs {
    #[arg(long = "N", visible_alias = "dim", default_value_t = 2)]
    pub dim: usize,
    /// First observable: `smooth:P:CUTOFF`, `sawtooth:COORD:CUTOFF`,
    /// `mode:cos|sin:K1,K2,..` or `@file.json`.
    #[arg(long, default_value = "smooth:1:4")]
    pub f: String,
    /// Second observable, same syntax as --f.
    #[arg(long, default_value = "smooth:1:4")]
    pub g: String,
    /// Inclusive range of iteration counts, `A:B`.
    #[arg(long, default_value = "0:10")]
    pub n_range: String,
    #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
    pub method: MethodArg,
    /// Monte Carlo sample count.
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct CorrelateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub series: SeriesArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub series: SeriesArgs,
    /// Absolute noise floor; defaults to 5 stderr (Monte Carlo) or 1e-14 (exact).
    #[arg(long)]
    pub noise_floor: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct ScanArgs {
    /// Largest polynomial order r.
    #[arg(long, default_value_t = 30)]
    pub r_max: u32,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetArg {
    /// N=240 generator: h=8679, log2(1/dv0)=61*240.
    Mixmax240,
    /// N=256 generator: h=194, log2(1/dv0)=61*256.
    Mixmax256,
}

#[derive(Debug, Args, Serialize)]
pub struct TimescaleArgs {
    /// Published generator inputs; overrides --N, --h and --log2-inv-dv0.
    #[arg(long, value_enum)]
    pub preset: Option<PresetArg>,
    #[arg(long = "N", visible_alias = "dim", default_value_t = 2)]
    pub dim: usize,
    /// Entropy in nats per iteration; computed from the spectrum when omitted.
    #[arg(long)]
    pub h: Option<f64>,
    /// log2 of the inverse initial phase-space volume, in bits.
    #[arg(long, default_value_t = 64.0)]
    pub log2_inv_dv0: f64,
    /// Smoothness order of the observables.
    #[arg(long, default_value_t = 1)]
    pub p: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamFormat {
    /// Little-endian 64-bit words holding raw state values in [0, 2^61-1).
    Raw,
    /// Doubles in [0, 1), one per line.
    Decimal,
}

#[derive(Debug, Args, Serialize)]
pub struct RngArgs {
    #[arg(long = "N", visible_alias = "dim", default_value_t = 256)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of outputs.
    #[arg(long, default_value_t = 1000)]
    pub count: u64,
    /// Stream index; stream i starts 2^64 * i steps after the seeded state.
    #[arg(long, default_value_t = 0)]
    pub stream: u64,
    #[arg(long, value_enum, default_value_t = StreamFormat::Decimal)]
    pub format: StreamFormat,
}

#[derive(Debug, Args, Serialize)]
pub struct SelftestArgs {
    #[arg(long = "N", visible_alias = "dim", default_value_t = 256)]
    pub dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
}
