//! Polling folder watcher.
//!
//! A scanner thread polls the directory and hands stable files, in name
//! order, to the caller's thread through a channel; the caller processes them
//! strictly one at a time. A file is stable once its size is non-zero and
//! unchanged across one poll interval.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

#[derive(Debug, Clone)]
pub struct WatchOptions {
    pub poll_interval: Duration,
}

impl Default for WatchOptions {
    fn default() -> Self {
        WatchOptions {
            poll_interval: Duration::from_millis(250),
        }
    }
}

pub fn is_image_path(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        .unwrap_or(false)
}

/// Tracks which files in a directory have been seen and which are settling.
#[derive(Debug)]
pub struct FolderScanner {
    dir: PathBuf,
    seen: HashSet<PathBuf>,
    pending: BTreeMap<PathBuf, u64>,
}

impl FolderScanner {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        FolderScanner {
            dir: dir.into(),
            seen: HashSet::new(),
            pending: BTreeMap::new(),
        }
    }

    /// Marks files already present as seen, so only later arrivals count.
    pub fn skip_existing(&mut self) -> std::io::Result<()> {
        for entry in fs::read_dir(&self.dir)? {
            self.seen.insert(entry?.path());
        }
        Ok(())
    }

    /// One poll. Returns files that became stable since the previous poll,
    /// sorted by name. Non-image files are logged once and never returned.
    pub fn poll(&mut self) -> std::io::Result<Vec<PathBuf>> {
        let mut sizes = BTreeMap::new();
        for entry in fs::read_dir(&self.dir)? {
            let entry = entry?;
            let path = entry.path();
            if self.seen.contains(&path) {
                continue;
            }
            let meta = match entry.metadata() {
                Ok(m) if m.is_file() => m,
                _ => continue,
            };
            if !is_image_path(&path) {
                log::warn!("skipping non-image file {}", path.display());
                self.seen.insert(path);
                continue;
            }
            sizes.insert(path, meta.len());
        }

        let mut ready = Vec::new();
        let mut next_pending = BTreeMap::new();
        for (path, size) in sizes {
            match self.pending.get(&path) {
                Some(&prev) if prev == size && size > 0 => {
                    self.seen.insert(path.clone());
                    ready.push(path);
                }
                _ => {
                    next_pending.insert(path, size);
                }
            }
        }
        self.pending = next_pending;
        Ok(ready)
    }
}

/// Watches `dir` until `stop` is set, calling `handle` for each new image in
/// arrival order. Handler errors are logged and the watch continues.
/// Returns the number of files handled successfully.
pub fn watch_folder<E, F>(
    dir: &Path,
    options: &WatchOptions,
    stop: &AtomicBool,
    mut handle: F,
) -> std::io::Result<usize>
where
    E: Display,
    F: FnMut(&Path) -> Result<(), E>,
{
    let mut scanner = FolderScanner::new(dir);
    scanner.poll()?;
    let (tx, rx) = mpsc::channel::<PathBuf>();
    let interval = options.poll_interval;

    thread::scope(|scope| {
        let scanner_thread = scope.spawn(move || -> std::io::Result<()> {
            while !stop.load(Ordering::Acquire) {
                thread::sleep(interval);
                for path in scanner.poll()? {
                    if tx.send(path).is_err() {
                        return Ok(());
                    }
                }
            }
            Ok(())
        });

        let mut handled = 0usize;
        loop {
            match rx.recv_timeout(interval) {
                Ok(path) => match handle(&path) {
                    Ok(()) => handled += 1,
                    Err(e) => log::warn!("skipping {}: {e}", path.display()),
                },
                Err(mpsc::RecvTimeoutError::Timeout) => {
                    if scanner_thread.is_finished() {
                        // Drain anything sent just before the scanner exited.
                        while let Ok(path) = rx.try_recv() {
                            match handle(&path) {
                                Ok(()) => handled += 1,
                                Err(e) => log::warn!("skipping {}: {e}", path.display()),
                            }
                        }
                        break;
                    }
                }
                Err(mpsc::RecvTimeoutError::Disconnected) => break,
            }
        }
        scanner_thread.join().expect("scanner thread panicked")?;
        Ok(handled)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_becomes_ready_after_stable_poll() {
        let tmp = tempfile::tempdir().unwrap();
        let mut sc = FolderScanner::new(tmp.path());
        fs::write(tmp.path().join("b.png"), b"xx").unwrap();
        fs::write(tmp.path().join("a.jpg"), b"yy").unwrap();
        assert!(sc.poll().unwrap().is_empty());
        let ready = sc.poll().unwrap();
        let names: Vec<_> = ready
            .iter()
            .map(|p| p.file_name().unwrap().to_owned())
            .collect();
        assert_eq!(names, vec!["a.jpg", "b.png"]);
        assert!(sc.poll().unwrap().is_empty());
    }

    #[test]
    fn growing_file_waits() {
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("img.png");
        let mut sc = FolderScanner::new(tmp.path());
        fs::write(&p, b"a").unwrap();
        sc.poll().unwrap();
        fs::write(&p, b"abc").unwrap();
        assert!(sc.poll().unwrap().is_empty());
        assert_eq!(sc.poll().unwrap(), vec![p]);
    }

    #[test]
    fn empty_and_non_image_files_ignored() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("notes.txt"), b"hello").unwrap();
        fs::write(tmp.path().join("empty.png"), b"").unwrap();
        let mut sc = FolderScanner::new(tmp.path());
        sc.poll().unwrap();
        assert!(sc.poll().unwrap().is_empty());
        assert!(sc.poll().unwrap().is_empty());
    }

    #[test]
    fn existing_files_can_be_skipped() {
        let tmp = tempfile::tempdir().unwrap();
        fs::write(tmp.path().join("old.png"), b"x").unwrap();
        let mut sc = FolderScanner::new(tmp.path());
        sc.skip_existing().unwrap();
        sc.poll().unwrap();
        assert!(sc.poll().unwrap().is_empty());
    }
}
