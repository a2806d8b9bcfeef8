//! `fcxl`: evaluation, mask simulation, dataset subsets and the session
//! service from the command line.

mod commands;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use fcxl_core::pipeline::BackendSpec;

#[derive(Parser, Debug)]
#[command(name = "fcxl", version, about = "Interactive segmentation toolkit")]
struct Cli {
    /// Base seed; per-sample seeds are derived from it and the sample id.
    #[arg(long, global = true, default_value_t = 0, env = "FCXL_SEED")]
    seed: u64,

    /// Worker threads for dataset-parallel work (default: all cores).
    #[arg(long, global = true, env = "FCXL_THREADS")]
    threads: Option<usize>,

    /// Log level (error, warn, info, debug, trace). `json` or `json:<level>`
    /// switches stderr logs to structured JSON.
    #[arg(long, global = true, default_value = "info", env = "FCXL_LOG")]
    log_level: String,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an evaluation protocol and write a report.
    Eval(EvalArgs),
    /// Synthesize defective initial masks for every sample.
    SimulateDefects(DefectArgs),
    /// Synthesize coarse masks at a fixed perturbation level.
    Perturb(PerturbArgs),
    /// Rasterize scribbles for every sample.
    GenScribbles(ScribbleArgs),
    /// Select evenly spaced frames per video, dropping small masks.
    BuildSubset(SubsetArgs),
    /// Start the HTTP session service.
    Serve(ServeArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Clicks,
    Scribbles,
    Boxes,
    Coarse,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Start {
    Scratch,
    Initial,
}

fn parse_backend(s: &str) -> std::result::Result<BackendSpec, String> {
    s.parse().map_err(|e: fcxl_core::Error| e.to_string())
}

fn parse_level(s: &str) -> std::result::Result<u8, String> {
    match s.parse::<u8>() {
        Ok(l @ 1..=5) => Ok(l),
        _ => Err(format!("level must be 1..=5, got {s:?}")),
    }
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Evaluation protocol.
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Dataset directory containing index.json.
    #[arg(long)]
    pub dataset: PathBuf,
    /// oracle:{perfect|delay:<k>|never|identity}, classical or remote:<url>.
    #[arg(long, default_value = "classical", value_parser = parse_backend)]
    pub backend: BackendSpec,
    /// Target IoUs in percent.
    #[arg(long, value_delimiter = ',', default_value = "85,90,95")]
    pub targets: Vec<u32>,
    /// Interaction cap per sample.
    #[arg(long, default_value_t = 20)]
    pub cap: usize,
    /// Begin from an empty mask or from the dataset's initial masks.
    #[arg(long, value_enum, default_value = "scratch")]
    pub start: Start,
    /// Rounds at which the mean IoU is reported.
    #[arg(long, value_delimiter = ',', default_value = "1,5")]
    pub k: Vec<usize>,
    /// Perturbation levels for `--mode coarse`.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5", value_parser = parse_level)]
    pub levels: Vec<u8>,
    /// Per-side box jitter as a fraction of the extent, for `--mode boxes`.
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,
    /// Remote backend request timeout in seconds.
    #[arg(long, default_value_t = 30.0)]
    pub remote_timeout: f64,
    /// Report path; `.csv` writes the aggregate table, anything else JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DefectArgs {
    /// Source dataset directory.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output dataset; the defective masks become its initial masks.
    #[arg(long)]
    pub out: PathBuf,
    /// Lower bound of the accepted IoU window.
    #[arg(long, default_value_t = 0.75)]
    pub min_iou: f64,
    /// Upper bound of the accepted IoU window.
    #[arg(long, default_value_t = 0.85)]
    pub max_iou: f64,
}

#[derive(Args, Debug)]
pub struct PerturbArgs {
    /// Source dataset directory.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output dataset; the perturbed masks become its initial masks.
    #[arg(long)]
    pub out: PathBuf,
    /// Perturbation level, 1 (mild) to 5 (severe).
    #[arg(long, value_parser = parse_level)]
    pub level: u8,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Style {
    Bezier,
    Axial,
    Boundary,
    Composed,
    /// Deterministic correction scribble against the initial mask (or an
    /// empty prediction when the sample has none).
    Eval,
}

#[derive(Args, Debug)]
pub struct ScribbleArgs {
    /// Source dataset directory.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output directory; rasters go to `scribbles/`.
    #[arg(long)]
    pub out: PathBuf,
    /// Stroke style.
    #[arg(long, value_enum)]
    pub style: Style,
}

#[derive(Args, Debug)]
pub struct SubsetArgs {
    /// Source dataset directory.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Frames kept per video, evenly spaced.
    #[arg(long, default_value_t = 10)]
    pub per_video: usize,
    /// Masks with fewer foreground pixels are dropped.
    #[arg(long, default_value_t = 300)]
    pub min_pixels: usize,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// Listen address.
    #[arg(long, default_value = "127.0.0.1:8080", env = "FCXL_BIND")]
    pub bind: String,
    /// Default backend for new sessions.
    #[arg(long, default_value = "classical", env = "FCXL_BACKEND", value_parser = parse_backend)]
    pub backend: BackendSpec,
    /// Static UI bundle served under `/`.
    #[arg(long, env = "FCXL_UI_DIR")]
    pub ui_dir: Option<PathBuf>,
    /// Idle seconds before a session is evicted.
    #[arg(long, default_value_t = 1800, env = "FCXL_SESSION_TTL")]
    pub session_ttl: u64,
    /// Largest accepted image in pixels.
    #[arg(long, default_value_t = 32_000_000, env = "FCXL_MAX_PIXELS")]
    pub max_pixels: u64,
    /// Allowed CORS origin (default: any).
    #[arg(long, env = "FCXL_CORS_ORIGIN")]
    pub cors_origin: Option<String>,
    /// Remote backend request timeout in seconds.
    #[arg(long, default_value_t = 30.0)]
    pub remote_timeout: f64,
}

fn init_logging(spec: &str) -> Result<()> {
    let (json, level) = match spec.strip_prefix("json") {
        Some(rest) => (true, rest.trim_start_matches(':')),
        None => (false, spec),
    };
    let level: tracing::Level = if level.is_empty() {
        tracing::Level::INFO
    } else {
        level
            .parse()
            .map_err(|_| exit::coded(exit::CONFIG, anyhow::anyhow!("unknown log level {spec:?}")))?
    };
    let builder = tracing_subscriber::fmt()
        .with_max_level(level)
        .with_writer(std::io::stderr);
    if json {
        builder.json().init();
    } else {
        builder.init();
    }
    Ok(())
}

/// Applies a seconds value to a remote backend's timeout.
pub fn with_timeout(spec: BackendSpec, secs: f64) -> Result<BackendSpec> {
    if !(secs > 0.0 && secs.is_finite()) {
        return Err(exit::coded(
            exit::CONFIG,
            anyhow::anyhow!("remote timeout must be positive, got {secs}"),
        ));
    }
    Ok(match spec {
        BackendSpec::Remote { url, refine, .. } => BackendSpec::Remote {
            url,
            timeout: Duration::from_secs_f64(secs),
            refine,
        },
        other => other,
    })
}

fn run(cli: Cli) -> Result<()> {
    init_logging(&cli.log_level)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(exit::coded(exit::CONFIG, anyhow::anyhow!("--threads must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| exit::coded(exit::CONFIG, e))?;
    }
    let seed = cli.seed;
    match cli.command {
        Command::Eval(a) => commands::eval::run(a, seed),
        Command::SimulateDefects(a) => commands::simulate::defects(a, seed),
        Command::Perturb(a) => commands::simulate::perturb(a, seed),
        Command::GenScribbles(a) => commands::simulate::scribbles(a, seed),
        Command::BuildSubset(a) => commands::simulate::subset(a, seed),
        Command::Serve(a) => commands::serve::run(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit::code_of(&e);
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
