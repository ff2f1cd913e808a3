use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

use novelty_core::corpus::natural_scene;
use novelty_core::io::{decode_image, watch_folder, WatchOptions};
use novelty_core::{Session, SessionConfig};

fn drop_image(dir: &Path, name: &str, seed: u64) -> PathBuf {
    // Write under a non-image name, then rename, so the watcher never sees a
    // half-written PNG.
    let tmp = dir.join(format!(".{name}.part"));
    natural_scene(seed, 48, 32)
        .save_with_format(&tmp, image::ImageFormat::Png)
        .unwrap();
    let path = dir.join(name);
    fs::rename(&tmp, &path).unwrap();
    path
}

#[test]
fn processes_arrivals_in_order_and_queues_late_drops() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    drop_image(dir, "a.png", 1);
    drop_image(dir, "b.png", 2);
    drop_image(dir, "c.png", 3);
    fs::write(dir.join("readme.txt"), b"not an image").unwrap();

    let stop = AtomicBool::new(false);
    let mut session = Session::new("watch", SessionConfig::default()).unwrap();
    let mut order = Vec::new();
    let opts = WatchOptions {
        poll_interval: Duration::from_millis(20),
    };

    let handled = watch_folder(dir, &opts, &stop, |path| {
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name == "c.png" {
            // Arrives while c is being processed.
            drop_image(dir, "d.png", 4);
            std::thread::sleep(Duration::from_millis(100));
        }
        let img = decode_image(path)?;
        let r = session
            .process_image(&img)
            .map_err(|e| e.to_string())
            .unwrap();
        order.push((name, r.image_index));
        if order.len() == 4 {
            stop.store(true, Ordering::Release);
        }
        Ok::<_, novelty_core::io::DecodeError>(())
    })
    .unwrap();

    assert_eq!(handled, 4);
    let names: Vec<&str> = order.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["a.png", "b.png", "c.png", "d.png"]);
    let indices: Vec<usize> = order.iter().map(|(_, i)| *i).collect();
    assert_eq!(indices, [1, 2, 3, 4]);
}

#[test]
fn undecodable_image_is_skipped() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("a.png"), b"definitely not a png").unwrap();
    drop_image(dir, "b.png", 9);

    let stop = AtomicBool::new(false);
    let mut ok = Vec::new();
    let opts = WatchOptions {
        poll_interval: Duration::from_millis(20),
    };
    let mut attempts = 0;
    let handled = watch_folder(dir, &opts, &stop, |path| {
        attempts += 1;
        if attempts == 2 {
            stop.store(true, Ordering::Release);
        }
        decode_image(path)?;
        ok.push(path.to_path_buf());
        Ok::<_, novelty_core::io::DecodeError>(())
    })
    .unwrap();
    assert_eq!(handled, 1);
    assert_eq!(ok, vec![dir.join("b.png")]);
}
