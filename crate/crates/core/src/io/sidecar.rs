//! Per-image JSON sidecar: everything needed to check a result without the
//! rasters.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::colorspace::{quantize6, Pattern};
use crate::novelty::NoveltyVerdict;
use crate::pipeline::{ImageResult, SessionConfig, SessionSummary, StageTimings};
use crate::saliency::InterestPoint;
use crate::segmentation::{SegmentLabelMap, SegmentStats};

pub const SIDECAR_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SidecarError {
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("unsupported sidecar version {0}")]
    Version(u32),
    #[error("run-length labels cover {actual} pixels, expected {expected}")]
    RleLength { expected: usize, actual: usize },
}

/// Run-length encoded label raster: `[label, run]` pairs in row-major order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleLabels {
    pub width: usize,
    pub height: usize,
    pub segment_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_segment: Option<u32>,
    pub runs: Vec<[u32; 2]>,
}

impl RleLabels {
    pub fn encode(map: &SegmentLabelMap) -> Self {
        let mut runs: Vec<[u32; 2]> = Vec::new();
        for &l in &map.labels {
            match runs.last_mut() {
                Some(last) if last[0] == l => last[1] += 1,
                _ => runs.push([l, 1]),
            }
        }
        RleLabels {
            width: map.width,
            height: map.height,
            segment_count: map.segment_count,
            null_segment: map.null_segment,
            runs,
        }
    }

    pub fn decode(&self) -> Result<SegmentLabelMap, SidecarError> {
        let expected = self.width * self.height;
        let actual: usize = self.runs.iter().map(|r| r[1] as usize).sum();
        if actual != expected {
            return Err(SidecarError::RleLength { expected, actual });
        }
        let mut labels = Vec::with_capacity(expected);
        for &[l, n] in &self.runs {
            labels.extend(std::iter::repeat_n(l, n as usize));
        }
        Ok(SegmentLabelMap {
            width: self.width,
            height: self.height,
            labels,
            segment_count: self.segment_count,
            null_segment: self.null_segment,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub segment_id: u32,
    pub pixel_count: usize,
    pub mean_h: f64,
    pub mean_s: f64,
    pub mean_i: f64,
    /// Quantized `(H, S, I)` bins.
    pub bins: [u8; 3],
    pub pattern: Pattern,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub novel: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stored: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterestRecord {
    pub points: Vec<InterestPoint>,
    pub degenerate: bool,
    pub sigma: f64,
    pub suppression_radius: f64,
    /// Gray segmentations of the H, S and I bands.
    pub band_labels: [RleLabels; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format_version: u32,
    pub session_id: String,
    pub image_index: usize,
    pub width: usize,
    pub height: usize,
    pub config: SessionConfig,
    pub segments: Vec<SegmentRecord>,
    pub label_map: RleLabels,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interest: Option<InterestRecord>,
    /// Convenience copy of `interest.degenerate`; false without interest mode.
    pub degenerate: bool,
    pub memory_stored_count: usize,
    pub timings: StageTimings,
}

impl Sidecar {
    pub fn from_result(session_id: &str, config: &SessionConfig, result: &ImageResult) -> Self {
        let segments = result
            .stats
            .iter()
            .map(|s| {
                let v = result
                    .verdicts
                    .iter()
                    .find(|v| v.segment_id == s.segment_id);
                let bins = [
                    quantize6(s.mean_h),
                    quantize6(s.mean_s),
                    quantize6(s.mean_i),
                ];
                SegmentRecord {
                    segment_id: s.segment_id,
                    pixel_count: s.pixel_count,
                    mean_h: s.mean_h,
                    mean_s: s.mean_s,
                    mean_i: s.mean_i,
                    bins,
                    pattern: Pattern::from_bins(bins),
                    energy: v.map(|v| v.energy),
                    novel: v.map(|v| v.novel),
                    stored: v.map(|v| v.stored),
                }
            })
            .collect();
        let interest = result.interest.as_ref().map(|i| InterestRecord {
            points: i.points.clone(),
            degenerate: i.degenerate,
            sigma: i.sigma,
            suppression_radius: i.suppression_radius,
            band_labels: [
                RleLabels::encode(&i.band_labels[0]),
                RleLabels::encode(&i.band_labels[1]),
                RleLabels::encode(&i.band_labels[2]),
            ],
        });
        Sidecar {
            format_version: SIDECAR_VERSION,
            session_id: session_id.to_string(),
            image_index: result.image_index,
            width: result.width,
            height: result.height,
            config: config.clone(),
            segments,
            label_map: RleLabels::encode(&result.label_map),
            degenerate: interest.as_ref().is_some_and(|i| i.degenerate),
            interest,
            memory_stored_count: result.memory_stored_count,
            timings: result.timings,
        }
    }

    pub fn to_json(&self) -> Result<String, SidecarError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, SidecarError> {
        let sc: Sidecar = serde_json::from_str(s)?;
        if sc.format_version != SIDECAR_VERSION {
            return Err(SidecarError::Version(sc.format_version));
        }
        Ok(sc)
    }

    /// The sidecar with wall-clock timings zeroed: the part that replays
    /// bit-exactly.
    pub fn deterministic(&self) -> Sidecar {
        Sidecar {
            timings: StageTimings::default(),
            ..self.clone()
        }
    }

    /// Verdicts in segment order; empty when novelty was not run.
    pub fn verdicts(&self) -> Vec<NoveltyVerdict> {
        self.segments
            .iter()
            .filter_map(|s| {
                Some(NoveltyVerdict {
                    segment_id: s.segment_id,
                    pattern: s.pattern,
                    energy: s.energy?,
                    novel: s.novel?,
                    stored: s.stored?,
                })
            })
            .collect()
    }

    pub fn stats(&self) -> Vec<SegmentStats> {
        self.segments
            .iter()
            .map(|s| SegmentStats {
                segment_id: s.segment_id,
                pixel_count: s.pixel_count,
                mean_h: s.mean_h,
                mean_s: s.mean_s,
                mean_i: s.mean_i,
            })
            .collect()
    }
}

/// Session summary rebuilt from sidecars alone; agrees with
/// [`crate::pipeline::session_summary`] over the same images.
pub fn summarize_sidecars<'a>(
    session_id: &str,
    sidecars: impl IntoIterator<Item = &'a Sidecar>,
    memory_stored_count: usize,
) -> SessionSummary {
    let mut out = SessionSummary {
        session_id: session_id.to_string(),
        images_processed: 0,
        segments_seen: 0,
        patterns_stored: 0,
        novel_segments: 0,
        memory_stored_count,
        novel_rate_per_image: Vec::new(),
    };
    for sc in sidecars {
        let verdicts = sc.verdicts();
        let novel = verdicts.iter().filter(|v| v.novel).count();
        out.images_processed += 1;
        out.segments_seen += sc.label_map.segment_count;
        out.patterns_stored += verdicts.iter().filter(|v| v.stored).count();
        out.novel_segments += novel;
        out.novel_rate_per_image.push(if verdicts.is_empty() {
            0.0
        } else {
            novel as f64 / verdicts.len() as f64
        });
    }
    out
}
