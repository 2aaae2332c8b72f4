//! `latent-decode`: command-line pipeline for linear latent-space decoding.
//!
//! Exit codes: 0 on success, 1 on validation or numerical failure, 2 on I/O
//! failure. Results go to stdout; warnings and diagnostics to stderr.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use latent_decode::synth::SynthConfig;
use latent_decode::MatrixFormat;

/// A failed command together with its exit code.
#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    pub fn invalid(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<latent_decode::Error> for Failure {
    fn from(e: latent_decode::Error) -> Self {
        Self {
            code: if e.is_io() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

pub type CmdResult = Result<(), Failure>;

#[derive(Debug, Parser)]
#[command(name = "latent-decode", version, about = "Fit, invert and evaluate linear latent-space decoders")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the latent -> voxel map on training data.
    Fit(FitArgs),
    /// Predict latent vectors from test responses with a fitted map.
    Decode(DecodeArgs),
    /// Score predictions.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Eigen-image (PCA) codec.
    #[command(subcommand)]
    Pca(PcaCommand),
    /// Region-of-interest voxel selection.
    #[command(subcommand)]
    Roi(RoiCommand),
    /// Synthetic datasets and noise sweeps.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Collect per-region pairwise reports into one CSV.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    latents: PathBuf,
    #[arg(long)]
    responses: PathBuf,
    /// Output prefix for PREFIX.w.ldm, PREFIX.meta.txt, PREFIX.mean.ldm, PREFIX.std.ldm.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    /// Input matrix format; inferred from the file extension when omitted.
    #[arg(long)]
    format: Option<MatrixFormat>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    /// Map prefix written by `fit`.
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    responses: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    no_center: bool,
    #[arg(long)]
    no_rescale: bool,
    #[arg(long)]
    keep_bias: bool,
    #[arg(long)]
    format: Option<MatrixFormat>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum EvalCommand {
    /// Pairwise decoding accuracy between row-aligned matrices.
    Pairwise(PairwiseArgs),
    /// Mean correlation distance between row-aligned feature matrices.
    FeatureDist(FeatureDistArgs),
    /// Pairwise decoding accuracy in pixel space between two image directories.
    Pixcomp(PixcompArgs),
}

#[derive(Debug, Args)]
struct PairwiseArgs {
    #[arg(long)]
    original: PathBuf,
    #[arg(long)]
    predicted: PathBuf,
    /// Also write the report as a CSV row.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Also write the key=value report to a file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FeatureDistArgs {
    #[arg(long)]
    orig: PathBuf,
    #[arg(long)]
    recon: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PixcompArgs {
    #[arg(long)]
    orig_dir: PathBuf,
    #[arg(long)]
    recon_dir: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum PcaCommand {
    /// Fit principal components on an image directory.
    Fit(PcaFitArgs),
    /// Project images onto a fitted model.
    Transform(PcaTransformArgs),
    /// Reconstruct images from coefficients.
    Reconstruct(PcaReconstructArgs),
}

#[derive(Debug, Args)]
struct PcaFitArgs {
    #[arg(long)]
    images: PathBuf,
    #[arg(long, default_value_t = latent_decode::eigenimage::DEFAULT_COMPONENTS)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PcaTransformArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PcaReconstructArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    coeffs: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum RoiCommand {
    /// Keep only the voxels listed in a mask.
    Select(RoiSelectArgs),
    /// Merge masks into one.
    Union(RoiUnionArgs),
}

#[derive(Debug, Args)]
struct RoiSelectArgs {
    #[arg(long)]
    responses: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RoiUnionArgs {
    /// Comma-separated mask files.
    #[arg(long, value_delimiter = ',', required = true)]
    masks: Vec<PathBuf>,
    #[arg(long)]
    name: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum SynthCommand {
    /// Write a synthetic dataset as LDM files plus a manifest.
    Generate(SynthGenerateArgs),
    /// Accuracy as a function of noise level.
    Sweep(SynthSweepArgs),
}

#[derive(Debug, Clone, Args)]
struct SynthParams {
    #[arg(long, default_value_t = SynthConfig::default().n_train)]
    n_train: usize,
    #[arg(long, default_value_t = SynthConfig::default().n_test)]
    n_test: usize,
    #[arg(long, default_value_t = SynthConfig::default().latent_dim)]
    latent_dim: usize,
    #[arg(long, default_value_t = SynthConfig::default().n_voxels)]
    n_voxels: usize,
    #[arg(long, default_value_t = SynthConfig::default().noise_sigma)]
    noise_sigma: f64,
    #[arg(long, default_value_t = SynthConfig::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = SynthConfig::default().n_groups)]
    n_groups: usize,
}

impl From<&SynthParams> for SynthConfig {
    fn from(p: &SynthParams) -> Self {
        SynthConfig {
            n_train: p.n_train,
            n_test: p.n_test,
            latent_dim: p.latent_dim,
            n_voxels: p.n_voxels,
            noise_sigma: p.noise_sigma,
            seed: p.seed,
            n_groups: p.n_groups,
        }
    }
}

#[derive(Debug, Args)]
struct SynthGenerateArgs {
    #[command(flatten)]
    params: SynthParams,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthSweepArgs {
    #[command(flatten)]
    params: SynthParams,
    /// Comma-separated noise levels.
    #[arg(long, value_delimiter = ',', default_value = "0,0.5,1,2,8")]
    sigmas: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    ridge: f64,
    /// Center test responses before decoding.
    #[arg(long)]
    center: bool,
    /// Score rescaled predictions instead of raw ones.
    #[arg(long)]
    rescale: bool,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Comma-separated NAME=REPORTFILE entries.
    #[arg(long)]
    pairs: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

fn configure_threads() -> CmdResult {
    let Ok(raw) = std::env::var("LATENT_DECODE_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::invalid(format!("LATENT_DECODE_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::invalid(format!("cannot configure thread pool: {e}")))
}

fn run() -> CmdResult {
    configure_threads()?;
    let root = Cli::command();
    let args = config::merge(&root, std::env::args_os().collect())?;
    let matches = match root.try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return if code == 0 { Ok(()) } else { Err(Failure { code: 1, message: String::new() }) };
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| Failure::invalid(e.to_string()))?;
    match cli.command {
        Command::Fit(a) => commands::fit(&a),
        Command::Decode(a) => commands::decode(&a),
        Command::Eval(EvalCommand::Pairwise(a)) => commands::eval_pairwise(&a),
        Command::Eval(EvalCommand::FeatureDist(a)) => commands::eval_feature_dist(&a),
        Command::Eval(EvalCommand::Pixcomp(a)) => commands::eval_pixcomp(&a),
        Command::Pca(PcaCommand::Fit(a)) => commands::pca_fit(&a),
        Command::Pca(PcaCommand::Transform(a)) => commands::pca_transform(&a),
        Command::Pca(PcaCommand::Reconstruct(a)) => commands::pca_reconstruct(&a),
        Command::Roi(RoiCommand::Select(a)) => commands::roi_select(&a),
        Command::Roi(RoiCommand::Union(a)) => commands::roi_union(&a),
        Command::Synth(SynthCommand::Generate(a)) => commands::synth_generate(&a),
        Command::Synth(SynthCommand::Sweep(a)) => commands::synth_sweep(&a),
        Command::Report(a) => commands::report(&a),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}
