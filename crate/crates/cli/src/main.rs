//! `caw`: ingest streams, train and evaluate link predictors, dump walks,
//! tabulate walk shapes and benchmark the sampler.

mod commands;
mod presets;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use caw_core::encoder::{Aggregation, IdentityEncoding};
use caw_core::evaluation::{Mode, Restore, ShapeMode};
use caw_core::nn::CellKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::presets::Preset;

#[derive(Parser, Debug)]
#[command(name = "caw", version, about = "Temporal link prediction with causal anonymous walks")]
struct Cli {
    /// Log training progress and loader warnings.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load a dataset, report its statistics and write the normalized stream and split.
    Ingest(IngestArgs),
    /// Train on the chronological split and report test metrics.
    Train(TrainArgs),
    /// Dump raw walks, anonymized walks and shape coordinates for a query.
    Sample(SampleArgs),
    /// Per-shape walk scores of a trained mean-pooling model.
    Motifs(MotifArgs),
    /// Acceptance-loop iterations and sampling runtime on a Poisson stream.
    Bench(BenchArgs),
    /// Print the shipped sampling presets.
    Presets,
}

#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// File path, or synthetic:pairwise:<pairs>:<rounds>, synthetic:triadic:<nodes>:<rounds>,
    /// synthetic:poisson:<nodes>:<tau>:<T>.
    #[arg(long)]
    pub dataset: String,
    /// jodie-csv, edge-list or synthetic; sniffed from the file header when omitted.
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct SamplerArgs {
    /// Walks per endpoint.
    #[arg(long = "M")]
    pub walks: Option<usize>,
    /// Steps per walk.
    #[arg(long = "m")]
    pub length: Option<usize>,
    /// Time decay; defaults to the preset value or the stream intensity.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Tree-structured sampling fan-outs k1,k2,..; their product is M.
    #[arg(long, value_delimiter = ',')]
    pub tree: Option<Vec<usize>>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
}

#[derive(Args, Debug, Clone)]
pub struct SplitArgs {
    #[arg(long, default_value_t = 0.7)]
    pub r_train: f64,
    #[arg(long, default_value_t = 0.85)]
    pub r_val: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Trans)]
    pub mode: ModeArg,
    /// Share of nodes hidden from training in inductive mode.
    #[arg(long, default_value_t = 0.1)]
    pub mask_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Trans,
    Ind,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Trans => Mode::Transductive,
            ModeArg::Ind => Mode::Inductive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AggArg {
    Mean,
    Attn,
}

impl From<AggArg> for Aggregation {
    fn from(a: AggArg) -> Self {
        match a {
            AggArg::Mean => Aggregation::Mean,
            AggArg::Attn => Aggregation::Attention,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IdentityArg {
    Caw,
    Aw,
    Off,
}

impl From<IdentityArg> for IdentityEncoding {
    fn from(a: IdentityArg) -> Self {
        match a {
            IdentityArg::Caw => IdentityEncoding::Caw,
            IdentityArg::Aw => IdentityEncoding::Aw,
            IdentityArg::Off => IdentityEncoding::Off,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CellArg {
    Gru,
    Tanh,
}

impl From<CellArg> for CellKind {
    fn from(c: CellArg) -> Self {
        match c {
            CellArg::Gru => CellKind::Gru,
            CellArg::Tanh => CellKind::Tanh,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RestoreArg {
    Best,
    PatienceBack,
}

impl From<RestoreArg> for Restore {
    fn from(r: RestoreArg) -> Self {
        match r {
            RestoreArg::Best => Restore::Best,
            RestoreArg::PatienceBack => Restore::PatienceBack,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapeArg {
    Caw,
    Aw,
}

impl From<ShapeArg> for ShapeMode {
    fn from(s: ShapeArg) -> Self {
        match s {
            ShapeArg::Caw => ShapeMode::Caw,
            ShapeArg::Aw => ShapeMode::Aw,
        }
    }
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for events.txt, stats.tsv and split.manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    #[arg(long, value_enum, default_value_t = AggArg::Mean)]
    pub agg: AggArg,
    #[arg(long, value_enum, default_value_t = IdentityArg::Caw)]
    pub identity: IdentityArg,
    #[arg(long, value_enum, default_value_t = CellArg::Gru)]
    pub cell: CellArg,
    /// Hidden size of every encoder module.
    #[arg(long, default_value_t = 32)]
    pub dims: usize,
    #[arg(long, default_value_t = 0.1)]
    pub dropout: f64,
    /// Maximum number of epochs.
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 32)]
    pub batch: usize,
    #[arg(long, default_value_t = 3)]
    pub patience: usize,
    #[arg(long, value_enum, default_value_t = RestoreArg::Best)]
    pub restore: RestoreArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run every batch on one thread.
    #[arg(long)]
    pub sequential: bool,
    /// Output directory for history.tsv, metrics.tsv, model.ckpt and split.manifest.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Root node label.
    #[arg(long)]
    pub node: String,
    /// Second endpoint; walks are anonymized relative to both roots.
    #[arg(long)]
    pub with: Option<String>,
    /// Query time in the file's units; defaults to just after the last event.
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MotifArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Split manifest; recomputed from the checkpoint's run config when omitted.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ShapeArg::Caw)]
    pub shape: ShapeArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 100)]
    pub nodes: usize,
    /// Per-node link intensity of the generated stream.
    #[arg(long, default_value_t = 0.1)]
    pub tau: f64,
    #[arg(long, default_value_t = 4000.0)]
    pub horizon: f64,
    /// Time decay; defaults to tau / 5.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long = "M", default_value_t = 8)]
    pub walks: usize,
    #[arg(long = "m", default_value_t = 2)]
    pub length: usize,
    #[arg(long, value_delimiter = ',')]
    pub tree: Option<Vec<usize>>,
    /// Single-step samples for the iteration count.
    #[arg(long, default_value_t = 100_000)]
    pub calls: usize,
    /// Points on the runtime curve.
    #[arg(long, default_value_t = 20)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Failure with the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, unreadable or malformed inputs: exit code 2.
    Input(String),
    /// Anything else: exit code 1.
    Internal(String),
}

impl Failure {
    pub fn input(stage: &str, e: impl std::fmt::Display) -> Self {
        Failure::Input(format!("{stage}: {e}"))
    }

    pub fn internal(stage: &str, e: impl std::fmt::Display) -> Self {
        Failure::Internal(format!("{stage}: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Train(a) => commands::train(a),
        Command::Sample(a) => commands::sample(a),
        Command::Motifs(a) => commands::motifs(a),
        Command::Bench(a) => commands::bench(a),
        Command::Presets => {
            print!("{}", presets::table());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
