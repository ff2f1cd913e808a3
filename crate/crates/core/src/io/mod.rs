//! Image decoding, per-image output files, the session directory, and
//! folder-watch ingestion.

mod decode;
mod layout;
mod sidecar;
mod watch;

pub use decode::{decode_bytes, decode_image, DecodeError};
pub use layout::{
    load_session, write_outputs, InputSource, ManifestEntry, MapKind, OutputError, RunManifest,
    SessionDir, WrittenOutputs, MANIFEST_VERSION,
};
pub use sidecar::{
    summarize_sidecars, InterestRecord, RleLabels, SegmentRecord, Sidecar, SidecarError,
    SIDECAR_VERSION,
};
pub use watch::{is_image_path, watch_folder, FolderScanner, WatchOptions};
