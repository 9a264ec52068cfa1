mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use evdet::events::EventFormat;

use crate::config::FileConfig;
use crate::error::{invalid, CliResult};

/// Event-camera pipeline: simulate events from video, build event count
/// maps, reconstruct grayscale frames and evaluate detections.
#[derive(Debug, Parser)]
#[command(name = "evdet", version)]
pub struct Cli {
    /// Worker threads (0 = all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// TOML config file; flags override its values.
    #[arg(long, global = true, env = "EVDET_CONFIG")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a directory of PGM/PPM frames into an event file.
    Simulate(SimulateArgs),
    /// Build event count maps and write one PGM per bin.
    Ecm(EcmArgs),
    /// Reconstruct grayscale frames with a leaky integrator.
    Reconstruct(ReconstructArgs),
    /// Evaluate detections against VisDrone-style ground truth.
    Eval(EvalArgs),
    /// Print a summary of an event file.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Directory of numbered PGM/PPM frames.
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long)]
    pub fps: Option<f64>,
    #[arg(long)]
    pub theta_pos: Option<f64>,
    #[arg(long)]
    pub theta_neg: Option<f64>,
    /// Lin-log knee on the 0..255 intensity scale.
    #[arg(long)]
    pub knee: Option<f64>,
    /// Cap on events per pixel per frame interval.
    #[arg(long)]
    pub max_events: Option<u32>,
    /// Output event file (.evt text, .evb binary).
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long)]
    pub format: Option<EventFormat>,
}

#[derive(Debug, Args)]
pub struct EcmArgs {
    pub events: PathBuf,
    /// Bin width in microseconds.
    #[arg(long)]
    pub window_us: Option<u64>,
    /// Derive the window as round(1e6 / fps) when --window-us is absent.
    #[arg(long)]
    pub fps: Option<f64>,
    /// signed, count or two-channel.
    #[arg(long)]
    pub mode: Option<String>,
    /// per-sequence or per-bin.
    #[arg(long)]
    pub norm: Option<String>,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Also write ECMR raw dumps next to the PGM frames.
    #[arg(long)]
    pub dump_raw: bool,
    #[arg(long)]
    pub format: Option<EventFormat>,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    pub events: PathBuf,
    /// Decay rate in 1/s.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Log-intensity step per event.
    #[arg(long)]
    pub contrast: Option<f64>,
    #[arg(long)]
    pub sample_period_us: Option<u64>,
    /// percentile or fixed.
    #[arg(long)]
    pub tone_map: Option<String>,
    /// Lower percentile (fraction) or fixed minimum state.
    #[arg(long, allow_negative_numbers = true)]
    pub tone_lo: Option<f64>,
    /// Upper percentile (fraction) or fixed maximum state.
    #[arg(long, allow_negative_numbers = true)]
    pub tone_hi: Option<f64>,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Also write RECS state dumps.
    #[arg(long)]
    pub dump_state: bool,
    #[arg(long)]
    pub format: Option<EventFormat>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground truth CSV (VisDrone-VID layout).
    #[arg(long)]
    pub gt: PathBuf,
    /// Detections CSV: frame,left,top,width,height,score,category.
    #[arg(long)]
    pub det: PathBuf,
    #[arg(long)]
    pub fps: Option<f64>,
    /// Bin width; defaults to one frame period.
    #[arg(long)]
    pub window_us: Option<u64>,
    /// Event file whose header fixes the time window and geometry.
    #[arg(long)]
    pub events: Option<PathBuf>,
    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long)]
    pub height: Option<u32>,
    /// JSON report path.
    #[arg(long)]
    pub report: PathBuf,
    /// Also write the text table here.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    pub events: PathBuf,
    #[arg(long)]
    pub format: Option<EventFormat>,
}

fn run(cli: Cli) -> CliResult<()> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let threads = cli.threads.or(file.threads).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Simulate(a) => commands::simulate(a, &file),
        Command::Ecm(a) => commands::ecm(a, &file),
        Command::Reconstruct(a) => commands::reconstruct(a, &file),
        Command::Eval(a) => commands::eval(a, &file),
        Command::Stats(a) => commands::stats(a),
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("evdet: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
