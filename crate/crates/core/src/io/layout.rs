//! Session directory: `<out>/<session-id>/{images/,maps/,sidecars/,memory.json,manifest.json}`.

use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::sidecar::{Sidecar, SidecarError, SIDECAR_VERSION};
use crate::novelty::{HopfieldMemory, MemorySnapshot, NoveltyError, SNAPSHOT_VERSION};
use crate::pipeline::{ConfigError, ImageResult, Session, SessionConfig};
use crate::render::{cross_arm, render_overlay, render_scalar_map, render_segmentation};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("i/o failure at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot encode {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("bad json in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Sidecar(#[from] SidecarError),
    #[error(transparent)]
    Memory(#[from] NoveltyError),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OutputError + '_ {
    move |source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Rendered map files written per image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    Segmentation,
    Novelty,
    UncommonH,
    UncommonS,
    UncommonI,
    Interest,
    Overlay,
}

impl MapKind {
    pub const ALL: [MapKind; 7] = [
        MapKind::Segmentation,
        MapKind::Novelty,
        MapKind::UncommonH,
        MapKind::UncommonS,
        MapKind::UncommonI,
        MapKind::Interest,
        MapKind::Overlay,
    ];

    pub fn suffix(&self) -> &'static str {
        match self {
            MapKind::Segmentation => "segmentation",
            MapKind::Novelty => "novelty",
            MapKind::UncommonH => "uncommon_h",
            MapKind::UncommonS => "uncommon_s",
            MapKind::UncommonI => "uncommon_i",
            MapKind::Interest => "interest",
            MapKind::Overlay => "overlay",
        }
    }

    pub fn file_name(&self, index: usize) -> String {
        format!("{index:06}_{}.png", self.suffix())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "path", rename_all = "kebab-case")]
pub enum InputSource {
    Directory(PathBuf),
    WatchFolder(PathBuf),
    FileList(Vec<PathBuf>),
    /// Images arriving over the session service.
    Upload,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_index: usize,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatVersions {
    pub manifest: u32,
    pub sidecar: u32,
    pub memory: u32,
}

impl Default for FormatVersions {
    fn default() -> Self {
        FormatVersions {
            manifest: MANIFEST_VERSION,
            sidecar: SIDECAR_VERSION,
            memory: SNAPSHOT_VERSION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub session_id: String,
    pub input: InputSource,
    pub output_dir: PathBuf,
    pub config: SessionConfig,
    pub format_versions: FormatVersions,
    /// Index the next image will receive.
    pub next_index: usize,
    pub images: Vec<ManifestEntry>,
}

impl RunManifest {
    pub fn new(session: &Session, input: InputSource, output_dir: PathBuf) -> Self {
        RunManifest {
            session_id: session.id.clone(),
            input,
            output_dir,
            config: session.config.clone(),
            format_versions: FormatVersions::default(),
            next_index: session.next_index(),
            images: Vec::new(),
        }
    }
}

/// Paths of the files written for one image.
#[derive(Debug, Clone, PartialEq)]
pub struct WrittenOutputs {
    pub original: PathBuf,
    pub sidecar: PathBuf,
    pub maps: Vec<(MapKind, PathBuf)>,
}

/// One session's output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionDir {
    root: PathBuf,
}

impl SessionDir {
    /// Creates (or reuses) `<out_root>/<session_id>` and its subdirectories.
    pub fn create(out_root: &Path, session_id: &str) -> Result<Self, OutputError> {
        let dir = SessionDir {
            root: out_root.join(session_id),
        };
        for sub in [dir.images_dir(), dir.maps_dir(), dir.sidecars_dir()] {
            fs::create_dir_all(&sub).map_err(io_err(&sub))?;
        }
        Ok(dir)
    }

    /// Opens an existing session directory without creating anything.
    pub fn open(root: impl Into<PathBuf>) -> Self {
        SessionDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn images_dir(&self) -> PathBuf {
        self.root.join("images")
    }

    pub fn maps_dir(&self) -> PathBuf {
        self.root.join("maps")
    }

    pub fn sidecars_dir(&self) -> PathBuf {
        self.root.join("sidecars")
    }

    pub fn memory_path(&self) -> PathBuf {
        self.root.join("memory.json")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn image_path(&self, index: usize) -> PathBuf {
        self.images_dir().join(format!("{index:06}.png"))
    }

    pub fn sidecar_path(&self, index: usize) -> PathBuf {
        self.sidecars_dir().join(format!("{index:06}.json"))
    }

    pub fn map_path(&self, index: usize, kind: MapKind) -> PathBuf {
        self.maps_dir().join(kind.file_name(index))
    }

    pub fn read_sidecar(&self, index: usize) -> Result<Sidecar, OutputError> {
        let path = self.sidecar_path(index);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        Ok(Sidecar::from_json(&text)?)
    }

    pub fn write_memory(&self, snapshot: &MemorySnapshot) -> Result<(), OutputError> {
        write_json_atomic(&self.memory_path(), snapshot)
    }

    pub fn read_memory(&self) -> Result<MemorySnapshot, OutputError> {
        read_json(&self.memory_path())
    }

    pub fn write_manifest(&self, manifest: &RunManifest) -> Result<(), OutputError> {
        write_json_atomic(&self.manifest_path(), manifest)
    }

    pub fn read_manifest(&self) -> Result<RunManifest, OutputError> {
        read_json(&self.manifest_path())
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, OutputError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| OutputError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes through a temporary file and renames, so readers never see a
/// half-written document.
fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), OutputError> {
    let text = serde_json::to_string_pretty(value).map_err(|source| OutputError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, text).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn save_png<P, C>(img: &image::ImageBuffer<P, C>, path: &Path) -> Result<(), OutputError>
where
    P: image::Pixel + image::PixelWithColorType,
    [P::Subpixel]: image::EncodableLayout,
    C: std::ops::Deref<Target = [P::Subpixel]>,
{
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| OutputError::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// Writes the original, every rendered map the result carries, and the
/// sidecar for one image.
pub fn write_outputs(
    dir: &SessionDir,
    session_id: &str,
    config: &SessionConfig,
    result: &ImageResult,
    original: &RgbImage,
) -> Result<WrittenOutputs, OutputError> {
    let idx = result.image_index;
    let original_path = dir.image_path(idx);
    save_png(original, &original_path)?;

    let mut maps = Vec::new();
    let mut put = |kind: MapKind, write: &dyn Fn(&Path) -> Result<(), OutputError>| {
        let path = dir.map_path(idx, kind);
        write(&path)?;
        maps.push((kind, path));
        Ok::<_, OutputError>(())
    };

    put(MapKind::Segmentation, &|p| {
        save_png(&render_segmentation(&result.label_map), p)
    })?;
    if let Some(novelty) = &result.novelty_map {
        put(MapKind::Novelty, &|p| save_png(novelty, p))?;
    }
    if let Some(interest) = &result.interest {
        let kinds = [MapKind::UncommonH, MapKind::UncommonS, MapKind::UncommonI];
        for (kind, map) in kinds.into_iter().zip(&interest.uncommon) {
            put(kind, &|p| save_png(&render_scalar_map(map), p))?;
        }
        put(MapKind::Interest, &|p| {
            save_png(&render_scalar_map(&interest.interest_map), p)
        })?;
        put(MapKind::Overlay, &|p| {
            let arm = cross_arm(original.width());
            save_png(&render_overlay(original, &interest.points, arm), p)
        })?;
    }

    let sidecar_path = dir.sidecar_path(idx);
    let sidecar = Sidecar::from_result(session_id, config, result);
    fs::write(&sidecar_path, sidecar.to_json()?).map_err(io_err(&sidecar_path))?;

    Ok(WrittenOutputs {
        original: original_path,
        sidecar: sidecar_path,
        maps,
    })
}

/// Restores a session from its directory: config and next index from the
/// manifest, weights from `memory.json`.
pub fn load_session(dir: &SessionDir) -> Result<(Session, RunManifest), OutputError> {
    let manifest = dir.read_manifest()?;
    let snapshot = dir.read_memory()?;
    let memory = HopfieldMemory::from_snapshot(&snapshot)?;
    let session = Session::resume(
        manifest.session_id.clone(),
        manifest.config.clone(),
        memory,
        manifest.next_index,
    )?;
    Ok((session, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn two_tone() -> RgbImage {
        RgbImage::from_fn(40, 30, |x, _| {
            if x < 25 {
                Rgb([60, 120, 200])
            } else {
                Rgb([200, 90, 40])
            }
        })
    }

    #[test]
    fn writes_full_layout_and_resumes() {
        let tmp = tempfile::tempdir().unwrap();
        let mut session = Session::new("abc", SessionConfig::default()).unwrap();
        let dir = SessionDir::create(tmp.path(), &session.id).unwrap();
        let mut manifest = RunManifest::new(&session, InputSource::Upload, tmp.path().into());

        let img = two_tone();
        let r = session.process_image(&img).unwrap().clone();
        let written = write_outputs(&dir, &session.id, &session.config, &r, &img).unwrap();
        assert_eq!(written.maps.len(), MapKind::ALL.len());
        for (_, p) in &written.maps {
            assert!(p.exists(), "{p:?}");
        }
        dir.write_memory(&session.memory.snapshot()).unwrap();
        manifest.images.push(ManifestEntry {
            image_index: 1,
            source: "upload".into(),
        });
        manifest.next_index = session.next_index();
        dir.write_manifest(&manifest).unwrap();

        let back = dir.read_sidecar(1).unwrap();
        assert_eq!(back.verdicts(), r.verdicts);

        let (mut resumed, m2) = load_session(&dir).unwrap();
        assert_eq!(m2, manifest);
        assert_eq!(resumed.next_index(), 2);
        assert_eq!(resumed.memory, session.memory);
        let again = resumed.process_image(&img).unwrap();
        assert_eq!(again.image_index, 2);
        assert!(again.all_familiar());
    }

    #[test]
    fn all_familiar_novelty_png_is_black() {
        let tmp = tempfile::tempdir().unwrap();
        let mut session = Session::new("blk", SessionConfig::default()).unwrap();
        let dir = SessionDir::create(tmp.path(), &session.id).unwrap();
        let img = two_tone();
        session.process_image(&img).unwrap();
        let r = session.process_image(&img).unwrap().clone();
        write_outputs(&dir, &session.id, &session.config, &r, &img).unwrap();
        let novelty = image::open(dir.map_path(2, MapKind::Novelty))
            .unwrap()
            .to_rgb8();
        assert!(novelty.pixels().all(|p| p.0 == [0, 0, 0]));
    }

    #[test]
    fn io_failure_names_path() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = SessionDir::open(tmp.path().join("missing"));
        match dir.read_memory() {
            Err(OutputError::Io { path, .. }) => assert!(path.ends_with("memory.json")),
            other => panic!("unexpected {other:?}"),
        }
    }
}
