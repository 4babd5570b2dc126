use std::path::PathBuf;

use clap::builder::TypedValueParser as _;
use clap::{Args, Parser, Subcommand};
use ssvep_cstl::decoder::Method;

#[derive(Debug, Parser)]
#[command(
    name = "ssvep",
    version,
    about = "Cross-stimulus SSVEP decoding toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML file with this command's settings; flags take precedence
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic SSVEP dataset
    Generate(GenerateArgs),
    /// Band-pass, notch and trim every trial of a dataset
    Preprocess(PreprocessArgs),
    /// Decompose one epoch file into IMFs
    Emd(EmdArgs),
    /// Rebuild target-class trials from source-class trials
    Reconstruct(ReconstructArgs),
    /// Train a fuzzy decoder and save a checkpoint
    Train(TrainArgs),
    /// Run repeated source/target experiments
    Evaluate(EvaluateArgs),
    /// Run repeated experiments with a CCA-family decoder
    Baseline(EvaluateArgs),
    /// Send dataset trials to a decode service
    Stream(StreamArgs),
    /// Decode streamed trials with a trained model
    Serve(ServeArgs),
    /// Collect feedback datagrams and score them
    Listen(ListenArgs),
    /// Paired t-test on two matched samples
    Ttest(TtestArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stimulus frequencies in Hz, comma separated
    #[arg(long, value_delimiter = ',')]
    pub freqs: Option<Vec<f64>>,
    /// Phase increment between consecutive classes, radians
    #[arg(long)]
    pub phase_step: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub duration_s: Option<f64>,
    #[arg(long)]
    pub fs: Option<f64>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Per-channel gains; their count sets the channel count
    #[arg(long, value_delimiter = ',')]
    pub gains: Option<Vec<f64>>,
    /// Harmonic amplitudes, fundamental first
    #[arg(long, value_delimiter = ',')]
    pub harmonics: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Passband "lo,hi" in Hz
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pub band: Option<Vec<f64>>,
    #[arg(long, conflicts_with = "band")]
    pub no_band: bool,
    #[arg(long)]
    pub notch_q: Option<f64>,
    #[arg(long, conflicts_with = "notch_q")]
    pub no_notch: bool,
    #[arg(long)]
    pub discard_s: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EmdArgs {
    #[command(flatten)]
    pub common: Common,
    /// Epoch file (.epoch)
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub max_imfs: Option<usize>,
    #[arg(long)]
    pub sd_stop: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Source class indices, comma separated
    #[arg(long, value_delimiter = ',')]
    pub source_classes: Option<Vec<usize>>,
    #[arg(long)]
    pub n_harmonics: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub rules: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub window_s: Option<f64>,
    /// Classes with recorded data; the rest are rebuilt. Default: all
    #[arg(long, value_delimiter = ',')]
    pub source_classes: Option<Vec<usize>>,
    /// Checkpoint path (default: <out>/model.fuzz)
    #[arg(long)]
    pub out_model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_parser = method_parser())]
    pub method: Option<Method>,
    #[arg(long)]
    pub n_source: Option<usize>,
    #[arg(long)]
    pub window_s: Option<f64>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub rules: Option<usize>,
    /// Compare several rule counts on identical splits, e.g. 3,5,10
    #[arg(long, value_delimiter = ',')]
    pub ablate_rules: Option<Vec<usize>>,
}

fn method_parser() -> impl clap::builder::TypedValueParser<Value = Method> {
    clap::builder::PossibleValuesParser::new(Method::ALL.map(Method::name))
        .map(|s| s.parse::<Method>().expect("restricted to known names"))
}

#[derive(Debug, Args)]
pub struct StreamArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Decode service address, host:port
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub chunk_ms: Option<u32>,
    /// Expected sampling rate of the trials
    #[arg(long)]
    pub fs: Option<f64>,
    /// Pace frames to the wall clock
    #[arg(long)]
    pub realtime: bool,
    /// Send trials chunk by chunk in round-robin order
    #[arg(long)]
    pub interleave: bool,
    /// Pause between trials, milliseconds
    #[arg(long)]
    pub gap_ms: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Address to listen on, host:port
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Where feedback datagrams go, host:port
    #[arg(long)]
    pub feedback: Option<String>,
    /// Override the model's window length
    #[arg(long)]
    pub window_s: Option<f64>,
    /// Dataset manifest whose frequency table must match the model
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ListenArgs {
    #[command(flatten)]
    pub common: Common,
    /// Address to receive datagrams on, host:port
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Dataset manifest listing the expected trials and their classes
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Give up after this long without a datagram
    #[arg(long)]
    pub timeout_s: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TtestArgs {
    #[command(flatten)]
    pub common: Common,
    /// First sample: comma-separated values or a file with one per line
    #[arg(long)]
    pub a: Option<String>,
    /// Second sample, matched to the first
    #[arg(long)]
    pub b: Option<String>,
}
