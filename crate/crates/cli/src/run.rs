//! The `run` command: batch directory or watch-folder processing into a
//! session directory.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use novelty_core::io::{
    decode_image, is_image_path, load_session, watch_folder, write_outputs, InputSource,
    ManifestEntry, RunManifest, SessionDir, WatchOptions,
};
use novelty_core::{Session, SessionConfig};

use crate::settings::FileConfig;
use crate::CliError;

pub const DEFAULT_POLL_MS: u64 = 250;

#[derive(Debug, Clone)]
pub enum Source {
    Directory(PathBuf),
    Watch(PathBuf),
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub source: Source,
    pub settings: FileConfig,
    pub session_id: Option<String>,
    pub resume: Option<String>,
    pub reset_memory: bool,
    /// Stop after this many successfully processed images.
    pub limit: Option<usize>,
}

/// Why one input file was skipped. Output failures are not in here: they
/// abort the run.
#[derive(Debug, thiserror::Error)]
enum Skip {
    #[error(transparent)]
    Decode(#[from] novelty_core::io::DecodeError),
    #[error(transparent)]
    Pipeline(#[from] novelty_core::PipelineError),
}

struct Runner {
    session: Session,
    manifest: RunManifest,
    dir: SessionDir,
    processed: usize,
}

impl Runner {
    fn handle(&mut self, path: &Path) -> Result<Result<(), Skip>, CliError> {
        let img = match decode_image(path) {
            Ok(img) => img,
            Err(e) => return Ok(Err(e.into())),
        };
        let result = match self.session.process_image(&img) {
            Ok(_) => self.session.results.pop().expect("just processed"),
            Err(e) => return Ok(Err(e.into())),
        };
        write_outputs(
            &self.dir,
            &self.session.id,
            &self.session.config,
            &result,
            &img,
        )?;
        self.manifest.images.push(ManifestEntry {
            image_index: result.image_index,
            source: path.display().to_string(),
        });
        self.persist()?;
        self.processed += 1;

        let mut line = format!(
            "{:06} {}: {} segments",
            result.image_index,
            path.file_name().unwrap_or_default().to_string_lossy(),
            result.label_map.non_null_count()
        );
        if self.session.config.mode.includes_novelty() {
            line += &format!(", {} novel", result.novel_count());
        }
        if let Some(i) = &result.interest {
            let pts: Vec<String> = i
                .points
                .iter()
                .map(|p| format!("({},{})", p.x, p.y))
                .collect();
            line += &format!(", interest {}", pts.join(" "));
            if i.degenerate {
                line += " [flat map]";
            }
        }
        line += &format!(" [{:.0} ms]", result.timings.total_ms);
        println!("{line}");
        Ok(Ok(()))
    }

    fn persist(&mut self) -> Result<(), CliError> {
        self.manifest.next_index = self.session.next_index();
        self.manifest.config = self.session.config.clone();
        self.dir.write_manifest(&self.manifest)?;
        self.dir.write_memory(&self.session.memory.snapshot())?;
        Ok(())
    }
}

fn input_source(source: &Source) -> InputSource {
    match source {
        Source::Directory(d) => InputSource::Directory(d.clone()),
        Source::Watch(d) => InputSource::WatchFolder(d.clone()),
    }
}

fn open_runner(opts: &RunOptions, out_root: &Path) -> Result<Runner, CliError> {
    if let Some(id) = &opts.resume {
        let dir = SessionDir::open(out_root.join(id));
        let (mut session, mut manifest) = load_session(&dir)?;
        if opts.settings.touches_session() {
            let config = opts.settings.apply(&session.config);
            config.validate()?;
            log::warn!("resumed session {id} continues with changed parameters {config:?}");
            session.config = config;
        }
        manifest.input = input_source(&opts.source);
        log::info!("resuming session {id} at image {}", session.next_index());
        return Ok(Runner {
            session,
            manifest,
            dir,
            processed: 0,
        });
    }
    let config = opts.settings.apply(&SessionConfig::default());
    let id = opts
        .session_id
        .clone()
        .unwrap_or_else(|| uuid::Uuid::new_v4().simple().to_string());
    let session = Session::new(id.clone(), config)?;
    let dir = SessionDir::create(out_root, &id)?;
    let manifest = RunManifest::new(&session, input_source(&opts.source), out_root.to_path_buf());
    log::info!("new session {id} in {}", dir.root().display());
    Ok(Runner {
        session,
        manifest,
        dir,
        processed: 0,
    })
}

/// Image files directly inside `dir`, sorted by name. Other files are
/// reported and left out.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let io = |source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        let path = entry.map_err(io)?.path();
        if !path.is_file() {
            continue;
        }
        if is_image_path(&path) {
            out.push(path);
        } else {
            log::warn!("skipping non-image file {}", path.display());
        }
    }
    out.sort();
    Ok(out)
}

pub fn run(opts: RunOptions) -> Result<(), CliError> {
    let out_root = opts.settings.out.clone().ok_or(CliError::MissingOut)?;
    let mut runner = open_runner(&opts, &out_root)?;
    if opts.reset_memory {
        runner.session.reset_memory();
        log::info!("memory zeroed; next image starts a fresh epoch");
    }
    runner.persist()?;

    let limit = opts.limit.unwrap_or(usize::MAX);
    match &opts.source {
        Source::Directory(dir) => {
            let files = list_images(dir)?;
            if files.is_empty() {
                return Err(CliError::NoImages(dir.clone()));
            }
            for path in files {
                if runner.processed >= limit {
                    break;
                }
                if let Err(e) = runner.handle(&path)? {
                    log::warn!("skipping {}: {e}", path.display());
                }
            }
        }
        Source::Watch(dir) => {
            let stop = Arc::new(AtomicBool::new(false));
            let flag = stop.clone();
            if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::Release)) {
                log::warn!("cannot install ctrl-c handler: {e}");
            }
            let poll =
                Duration::from_millis(opts.settings.poll_ms.unwrap_or(DEFAULT_POLL_MS).max(1));
            log::info!("watching {} every {poll:?}; ctrl-c to stop", dir.display());
            let mut fatal = None;
            watch_folder(
                dir,
                &WatchOptions {
                    poll_interval: poll,
                },
                &stop,
                |path| {
                    if fatal.is_some() {
                        return Ok(());
                    }
                    let outcome = match runner.handle(path) {
                        Ok(r) => r,
                        Err(e) => {
                            fatal = Some(e);
                            stop.store(true, Ordering::Release);
                            return Ok(());
                        }
                    };
                    if runner.processed >= limit {
                        stop.store(true, Ordering::Release);
                    }
                    outcome
                },
            )
            .map_err(|source| CliError::Io {
                path: dir.clone(),
                source,
            })?;
            if let Some(e) = fatal {
                return Err(e);
            }
        }
    }

    let s = runner.session.memory.stored_count();
    println!(
        "session {}: {} images this run, next index {}, memory holds {s} patterns; outputs in {}",
        runner.session.id,
        runner.processed,
        runner.session.next_index(),
        runner.dir.root().display()
    );
    Ok(())
}
