//! `rlp`: the roadside LiDAR placement pipeline, one subcommand per stage.
//!
//! Stages write into content-addressed run directories under `--out` (see
//! `commands`); errors come out as one machine-parsable line on stderr,
//! `error: <kind>: <message>`, with a nonzero exit. `RLP_THREADS` caps the
//! worker pool; results are identical at any thread count.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rlp_core::error::{Error, Result};

#[derive(Parser)]
#[command(name = "rlp", version, about = "Roadside LiDAR placement pipeline")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic cross-intersection scenario.
    GenScene(GenSceneArgs),
    /// Cast per-mount point clouds for selected traffic frames.
    Simulate(SimulateArgs),
    /// Train the perception ability predictor on sampled placements.
    Train(TrainArgs),
    /// Select a placement with a named strategy.
    Optimize(OptimizeArgs),
    /// Run several strategies and score each by proxy average precision.
    Eval(EvalArgs),
    /// Sample a scorer for diminishing-returns violations.
    Audit(AuditArgs),
    /// Aggregate evaluation rows into Markdown and CSV tables.
    Report(ReportArgs),
}

/// Sensor model knobs shared by every casting stage.
#[derive(Args)]
pub struct SpecArgs {
    /// Vertical channels of the sensor model.
    #[arg(long, default_value_t = 32)]
    pub channels: u32,
    /// Azimuth step in degrees.
    #[arg(long, default_value_t = 0.45)]
    pub azimuth_step: f64,
}

/// Predictor training knobs, used wherever a model may be trained inline.
#[derive(Args)]
pub struct TrainKnobs {
    /// Smoothness weight of the training loss.
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    /// Supervision mask threshold on the confidence map.
    #[arg(long, default_value_t = 0.2)]
    pub threshold: f64,
    /// Gradient-descent epochs.
    #[arg(long, default_value_t = 150)]
    pub epochs: u32,
    /// Gradient-descent step size.
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    /// Training samples drawn from the scenario.
    #[arg(long, default_value_t = 8)]
    pub samples: usize,
}

#[derive(Args)]
pub struct GenSceneArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Base directory the run directory is created under.
    #[arg(long)]
    pub out: PathBuf,
    /// Candidate sensor mounts on the scene periphery.
    #[arg(long, default_value_t = 8)]
    pub mounts: usize,
    #[arg(long, default_value_t = 10)]
    pub vehicles: usize,
    /// Traffic frames to simulate (a count here, not an index list).
    #[arg(long, default_value_t = 10)]
    pub frames: usize,
    #[arg(long, default_value_t = 4)]
    pub occluders: usize,
    /// Scene half side length in meters.
    #[arg(long, default_value_t = 80.0)]
    pub half_extent: f64,
    /// Grid cell size in meters.
    #[arg(long, default_value_t = 2.0)]
    pub cell_size: f64,
    /// Sensor mast height in meters.
    #[arg(long, default_value_t = 5.0)]
    pub mast_height: f64,
    /// Seconds between consecutive frames.
    #[arg(long, default_value_t = 0.5)]
    pub frame_dt: f64,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Scenario JSON produced by gen-scene.
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated frame indices; all frames when omitted.
    #[arg(long)]
    pub frames: Option<String>,
    /// Skip the standard range crop.
    #[arg(long)]
    pub raw: bool,
    /// Also write each cloud as CSV text.
    #[arg(long)]
    pub csv: bool,
    #[command(flatten)]
    pub spec: SpecArgs,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub knobs: TrainKnobs,
    #[command(flatten)]
    pub spec: SpecArgs,
}

#[derive(Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Placement size to select.
    #[arg(long)]
    pub m: usize,
    /// Selection strategy: greedy, brute, random, or covdens.
    #[arg(long, default_value = "greedy")]
    pub method: String,
    /// Scorer mode: fused or noisyor.
    #[arg(long, default_value = "fused")]
    pub scorer: String,
    /// Comma-separated scorer frame indices; evenly spaced default.
    #[arg(long)]
    pub frames: Option<String>,
    /// Reuse a trained model instead of training inline.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub knobs: TrainKnobs,
    #[command(flatten)]
    pub spec: SpecArgs,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Placement sizes to sweep, e.g. `--m 2,3`.
    #[arg(long, required = true, value_delimiter = ',')]
    pub m: Vec<usize>,
    /// Comma-separated strategies to run.
    #[arg(long, default_value = "greedy,brute,random,covdens")]
    pub methods: String,
    /// Scorer mode backing the selection strategies.
    #[arg(long, default_value = "fused")]
    pub scorer: String,
    /// Comma-separated evaluation frame indices; all frames when omitted.
    #[arg(long)]
    pub frames: Option<String>,
    /// Seeds per random baseline (seed, seed+1, ...).
    #[arg(long, default_value_t = 3)]
    pub random_runs: u64,
    /// Evaluate with per-mount detection and cross-mount suppression
    /// instead of detection on the fused cloud.
    #[arg(long)]
    pub late: bool,
    /// Reuse a trained model instead of training inline.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub knobs: TrainKnobs,
    #[command(flatten)]
    pub spec: SpecArgs,
}

#[derive(Args)]
pub struct AuditArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Scorer mode to audit.
    #[arg(long, default_value = "fused")]
    pub scorer: String,
    /// Comma-separated scorer frame indices; evenly spaced default.
    #[arg(long)]
    pub frames: Option<String>,
    /// Nested-set triples to sample.
    #[arg(long, default_value_t = 200)]
    pub checks: u64,
    /// Reuse a trained model instead of training inline.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[command(flatten)]
    pub knobs: TrainKnobs,
    #[command(flatten)]
    pub spec: SpecArgs,
}

#[derive(Args)]
pub struct ReportArgs {
    /// evaluation.csv produced by an eval run.
    #[arg(long)]
    pub results: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn init_thread_pool() -> Result<()> {
    let Ok(raw) = std::env::var("RLP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| {
            Error::Param(format!("RLP_THREADS must be a positive integer, got '{raw}'"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Param(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<()> {
    init_thread_pool()?;
    match &cli.cmd {
        Cmd::GenScene(a) => commands::gen_scene(a),
        Cmd::Simulate(a) => commands::simulate(a),
        Cmd::Train(a) => commands::train(a),
        Cmd::Optimize(a) => commands::optimize(a),
        Cmd::Eval(a) => commands::eval(a),
        Cmd::Audit(a) => commands::audit(a),
        Cmd::Report(a) => commands::emit_report(a),
    }
}

fn main() -> ExitCode {
    // Stages chain through pipes that may close early (`rlp ... | head -1`);
    // die the way line tools do instead of panicking on the broken pipe.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
