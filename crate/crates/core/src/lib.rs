//! Real-time color novelty detection for exploration imagery.
//!
//! Images are converted to HSI, segmented by spectral-angle matching, and each
//! segment's mean color is quantized into an 18-spin pattern that a Hopfield
//! familiarity network classifies as novel or familiar. A second path builds
//! per-band uncommon maps and reports the strongest interest points.

pub mod colorspace;
pub mod corpus;
pub mod io;
pub mod novelty;
pub mod pipeline;
pub mod render;
pub mod saliency;
pub mod segmentation;
pub mod verify;

pub use colorspace::{encode_pattern, quantize6, rgb_to_hsi, HsiImage, HsiPixel, Pattern};
pub use novelty::{HopfieldMemory, MemorySnapshot, NoveltyVerdict, FAMILIARITY_THRESHOLD};
pub use pipeline::{
    process_image, process_sequence, session_summary, ImageResult, Mode, PipelineError, Session,
    SessionConfig, SessionSummary,
};
pub use saliency::{InterestPoint, ScalarMap};
pub use segmentation::{SegmentLabelMap, SegmentStats};
