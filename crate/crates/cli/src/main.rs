//! `novelty`: novelty detection and interest points for exploration imagery.

mod run;
mod settings;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use novelty_core::corpus::{natural_scene, uniform_terrain_sequence, TerrainParams};
use novelty_core::io::OutputError;
use novelty_core::pipeline::ConfigError;
use novelty_core::Mode;
use novelty_service::{ServeError, ServiceConfig, DEFAULT_MAX_UPLOAD_BYTES};

use run::{RunOptions, Source};
use settings::FileConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("no output directory: pass --out, set NOVELTY_OUT, or set `out` in the config file")]
    MissingOut,
    #[error("no images found in {0}")]
    NoImages(PathBuf),
    #[error("i/o failure at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad config file {path}: {message}")]
    ConfigFile { path: PathBuf, message: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error(transparent)]
    Serve(#[from] ServeError),
    #[error("cannot write {path}: {message}")]
    Image { path: PathBuf, message: String },
    #[error("{0} acceptance criteria failed")]
    Verify(usize),
}

#[derive(Debug, Parser)]
#[command(name = "novelty", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Process a directory of images, or watch a folder for new ones.
    Run(RunArgs),
    /// Write a synthetic image sequence.
    GenCorpus(GenArgs),
    /// Run the acceptance property suite.
    Verify(VerifyArgs),
    /// Start the HTTP session service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["input", "watch"])))]
struct RunArgs {
    /// Directory of images processed once, in name order.
    #[arg(long, value_name = "DIR")]
    input: Option<PathBuf>,
    /// Folder watched for new images until ctrl-c.
    #[arg(long, value_name = "DIR")]
    watch: Option<PathBuf>,
    /// Output root; the session directory is created inside it.
    #[arg(long, value_name = "DIR", env = "NOVELTY_OUT")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Spectral matching angle, degrees.
    #[arg(long, value_name = "F")]
    theta_deg: Option<f64>,
    /// Blur sigma as a fraction of image width.
    #[arg(long, value_name = "F")]
    blur_sigma_frac: Option<f64>,
    /// Segments smaller than this fraction of the image are merged.
    #[arg(long, value_name = "F")]
    min_segment_frac: Option<f64>,
    /// Interest points per image.
    #[arg(long, value_name = "N")]
    k_points: Option<usize>,
    /// Zero the color memory before the first image.
    #[arg(long)]
    reset_memory: bool,
    /// Continue an existing session in the output root.
    #[arg(long, value_name = "SESSION", conflicts_with = "session_id")]
    resume: Option<String>,
    /// Id for a new session (default: random).
    #[arg(long, value_name = "ID")]
    session_id: Option<String>,
    /// TOML file with defaults for any of these options.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Watch-folder poll interval.
    #[arg(long, value_name = "MS")]
    poll_ms: Option<u64>,
    /// Stop after this many processed images.
    #[arg(long, value_name = "N")]
    limit: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Novelty,
    Interest,
    Both,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Novelty => Mode::Novelty,
            ModeArg::Interest => Mode::Interest,
            ModeArg::Both => Mode::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CorpusKind {
    /// One terrain color with small per-image jitter.
    Terrain,
    /// Banded scenes with scattered inclusions.
    Natural,
    /// The same scene twice.
    Pair,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "terrain")]
    kind: CorpusKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 640)]
    width: u32,
    #[arg(long, default_value_t = 480)]
    height: u32,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Run only these criteria (repeatable).
    #[arg(long = "criterion", value_name = "N")]
    criteria: Vec<u8>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "NOVELTY_ADDR", default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Persist sessions here and restore them on start. Without it, outputs
    /// live in a scratch directory.
    #[arg(long, value_name = "DIR", env = "NOVELTY_OUT")]
    out: Option<PathBuf>,
    /// Demo deployment: idle sessions expire after an hour.
    #[arg(long)]
    demo: bool,
    /// Idle time after which a session is dropped.
    #[arg(long, value_name = "SECS")]
    idle_ttl_secs: Option<u64>,
    #[arg(long, value_name = "BYTES", default_value_t = DEFAULT_MAX_UPLOAD_BYTES)]
    max_upload_bytes: usize,
}

fn run_cmd(a: RunArgs) -> Result<(), CliError> {
    let file = match &a.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let flags = FileConfig {
        out: a.out,
        poll_ms: a.poll_ms,
        theta_deg: a.theta_deg,
        blur_sigma_frac: a.blur_sigma_frac,
        min_segment_frac: a.min_segment_frac,
        mode: a.mode.map(Mode::from),
        k_points: a.k_points,
        retain_patterns: None,
    };
    let source = match (a.input, a.watch) {
        (Some(d), _) => Source::Directory(d),
        (None, Some(d)) => Source::Watch(d),
        (None, None) => unreachable!("clap requires one source"),
    };
    run::run(RunOptions {
        source,
        settings: file.overlay(flags),
        session_id: a.session_id,
        resume: a.resume,
        reset_memory: a.reset_memory,
        limit: a.limit,
    })
}

fn gen_corpus(a: GenArgs) -> Result<(), CliError> {
    std::fs::create_dir_all(&a.out).map_err(|source| CliError::Io {
        path: a.out.clone(),
        source,
    })?;
    let images = match a.kind {
        CorpusKind::Terrain => {
            let params = TerrainParams {
                images: a.count,
                width: a.width,
                height: a.height,
                ..TerrainParams::default()
            };
            uniform_terrain_sequence(a.seed, &params).0
        }
        CorpusKind::Natural => (0..a.count as u64)
            .map(|k| natural_scene(a.seed + k, a.width, a.height))
            .collect(),
        CorpusKind::Pair => {
            let img = natural_scene(a.seed, a.width, a.height);
            vec![img.clone(), img]
        }
    };
    let prefix = format!("{:?}", a.kind).to_lowercase();
    for (k, img) in images.iter().enumerate() {
        let path = a.out.join(format!("{prefix}_{:03}.png", k + 1));
        img.save(&path).map_err(|e| CliError::Image {
            path: path.clone(),
            message: e.to_string(),
        })?;
    }
    println!("wrote {} images to {}", images.len(), a.out.display());
    Ok(())
}

fn verify(a: VerifyArgs) -> Result<(), CliError> {
    use novelty_core::verify;
    let outcomes: Vec<_> = if a.criteria.is_empty() {
        verify::run_all()
    } else {
        a.criteria
            .iter()
            .filter_map(|&id| verify::run_criterion(id))
            .collect()
    };
    for o in &outcomes {
        println!("{o}");
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    if failed > 0 {
        return Err(CliError::Verify(failed));
    }
    Ok(())
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    let mut config = if a.demo {
        ServiceConfig::demo()
    } else {
        ServiceConfig::default()
    };
    config.out_root = a.out;
    config.max_upload_bytes = a.max_upload_bytes;
    if let Some(secs) = a.idle_ttl_secs {
        config.idle_ttl = Some(Duration::from_secs(secs));
    }
    novelty_service::serve_blocking(config, a.addr)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run_cmd(a),
        Command::GenCorpus(a) => gen_corpus(a),
        Command::Verify(a) => verify(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
