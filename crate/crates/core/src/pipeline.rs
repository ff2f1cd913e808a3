//! Per-image orchestration within a session.
//!
//! One image flows through HSI conversion, color segmentation, pattern
//! encoding and sequential novelty classification; in interest mode each HSI
//! band is also gray-segmented into an uncommon map, and the blurred sum of
//! those maps yields the top-k interest points.

use std::time::Instant;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::colorspace::{encode_pattern, Band, ColorError, HsiImage};
use crate::novelty::{render_novelty_map, HopfieldMemory, NoveltyError, NoveltyVerdict};
use crate::render::palette_colors;
use crate::saliency::{
    interest_map, top_interest_points, uncommon_map, InterestPoint, SaliencyError, ScalarMap,
};
use crate::segmentation::{
    segment_color_with, segment_gray, ColorSegmentParams, GrayRaster, GraySegmentParams,
    SegmentLabelMap, SegmentStats, SegmentationError,
};

/// Smallest accepted image side, in pixels.
pub const MIN_IMAGE_SIDE: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Novelty,
    Interest,
    #[default]
    Both,
}

impl Mode {
    pub fn includes_novelty(self) -> bool {
        matches!(self, Mode::Novelty | Mode::Both)
    }

    pub fn includes_interest(self) -> bool {
        matches!(self, Mode::Interest | Mode::Both)
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "novelty" => Ok(Mode::Novelty),
            "interest" => Ok(Mode::Interest),
            "both" => Ok(Mode::Both),
            other => Err(format!("unknown mode {other:?} (novelty|interest|both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    /// Spectral matching angle in degrees.
    pub theta_deg: f64,
    /// Blur sigma as a fraction of image width.
    pub blur_sigma_frac: f64,
    pub min_segment_frac: f64,
    pub mode: Mode,
    pub k_points: usize,
    pub retain_patterns: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            theta_deg: 5.0,
            blur_sigma_frac: 0.02,
            min_segment_frac: 0.001,
            mode: Mode::Both,
            k_points: 3,
            retain_patterns: true,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid config field `{field}`: {reason}")]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: String,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |field, reason: &str| {
            Err(ConfigError {
                field,
                reason: reason.to_string(),
            })
        };
        if !(self.theta_deg > 0.0 && self.theta_deg.is_finite()) {
            return bad("theta_deg", "must be positive and finite");
        }
        if !(self.blur_sigma_frac >= 0.0 && self.blur_sigma_frac.is_finite()) {
            return bad("blur_sigma_frac", "must be non-negative and finite");
        }
        if !(0.0..1.0).contains(&self.min_segment_frac) {
            return bad("min_segment_frac", "must lie in [0, 1)");
        }
        if self.k_points < 1 {
            return bad("k_points", "must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("image is {width}x{height}; at least {min}x{min} is required", min = MIN_IMAGE_SIDE)]
    ImageTooSmall { width: u32, height: u32 },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Color(#[from] ColorError),
    #[error(transparent)]
    Segmentation(#[from] SegmentationError),
    #[error(transparent)]
    Saliency(#[from] SaliencyError),
    #[error(transparent)]
    Novelty(#[from] NoveltyError),
    #[error("image sequence is empty")]
    EmptySequence,
    #[error("image {index}: {source}")]
    AtIndex {
        index: usize,
        #[source]
        source: Box<PipelineError>,
    },
}

/// Wall-clock milliseconds per stage.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub hsi_ms: f64,
    pub segmentation_ms: f64,
    pub novelty_ms: f64,
    pub interest_ms: f64,
    pub total_ms: f64,
}

/// Output of the uncommon-map path.
#[derive(Debug, Clone, PartialEq)]
pub struct InterestResult {
    /// Gray segmentation of the H, S and I bands, in that order.
    pub band_labels: [SegmentLabelMap; 3],
    pub uncommon: [ScalarMap; 3],
    pub interest_map: ScalarMap,
    pub points: Vec<InterestPoint>,
    /// Set when the interest map is flat and the points come from tie order.
    pub degenerate: bool,
    pub sigma: f64,
    pub suppression_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageResult {
    /// 1-based position within the session.
    pub image_index: usize,
    pub width: usize,
    pub height: usize,
    pub label_map: SegmentLabelMap,
    pub stats: Vec<SegmentStats>,
    /// Empty when the mode excludes novelty.
    pub verdicts: Vec<NoveltyVerdict>,
    pub novelty_map: Option<RgbImage>,
    pub interest: Option<InterestResult>,
    /// Patterns held by the session memory after this image.
    pub memory_stored_count: usize,
    pub timings: StageTimings,
}

impl ImageResult {
    pub fn novel_count(&self) -> usize {
        self.verdicts.iter().filter(|v| v.novel).count()
    }

    pub fn all_familiar(&self) -> bool {
        !self.verdicts.is_empty() && self.verdicts.iter().all(|v| !v.novel)
    }
}

/// One exploration run sharing a single color memory.
#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub config: SessionConfig,
    pub memory: HopfieldMemory,
    pub results: Vec<ImageResult>,
    next_index: usize,
    memory_epoch_start: usize,
}

impl Session {
    pub fn new(id: impl Into<String>, config: SessionConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let memory = HopfieldMemory::new(config.retain_patterns);
        Ok(Session {
            id: id.into(),
            config,
            memory,
            results: Vec::new(),
            next_index: 1,
            memory_epoch_start: 1,
        })
    }

    /// Rebuilds a session from persisted state; the next image gets
    /// `next_index`.
    pub fn resume(
        id: impl Into<String>,
        config: SessionConfig,
        memory: HopfieldMemory,
        next_index: usize,
    ) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Session {
            id: id.into(),
            config,
            memory,
            results: Vec::new(),
            next_index: next_index.max(1),
            memory_epoch_start: 1,
        })
    }

    /// Index the next processed image will receive.
    pub fn next_index(&self) -> usize {
        self.next_index
    }

    /// First image index whose stores live in the current memory.
    pub fn memory_epoch_start(&self) -> usize {
        self.memory_epoch_start
    }

    /// Zeroes the memory; history is kept.
    pub fn reset_memory(&mut self) {
        self.memory.reset();
        self.memory_epoch_start = self.next_index;
    }

    pub fn process_image(&mut self, img: &RgbImage) -> Result<&ImageResult, PipelineError> {
        let result = analyze_image(img, &self.config, &mut self.memory, self.next_index)?;
        self.next_index += 1;
        self.results.push(result);
        Ok(self.results.last().expect("just pushed"))
    }

    pub fn summary(&self) -> SessionSummary {
        session_summary(self)
    }
}

/// Runs one image against `memory`, mutating it with any novel stores.
pub fn analyze_image(
    img: &RgbImage,
    config: &SessionConfig,
    memory: &mut HopfieldMemory,
    image_index: usize,
) -> Result<ImageResult, PipelineError> {
    let (w, h) = img.dimensions();
    if w < MIN_IMAGE_SIDE || h < MIN_IMAGE_SIDE {
        return Err(PipelineError::ImageTooSmall {
            width: w,
            height: h,
        });
    }
    config.validate()?;
    let t0 = Instant::now();
    let mut timings = StageTimings::default();

    let hsi = HsiImage::from_rgb(img)?;
    timings.hsi_ms = ms_since(t0);

    let t = Instant::now();
    let (label_map, stats) = segment_color_with(
        &hsi,
        &ColorSegmentParams {
            theta_deg: config.theta_deg,
            min_segment_frac: config.min_segment_frac,
        },
    )?;
    timings.segmentation_ms = ms_since(t);

    let t = Instant::now();
    let mut verdicts = Vec::new();
    let mut novelty_map = None;
    if config.mode.includes_novelty() {
        verdicts = stats
            .iter()
            .map(|s| {
                let x = encode_pattern(s.mean_h, s.mean_s, s.mean_i);
                memory.classify_and_store(s.segment_id, x)
            })
            .collect();
        let colors = palette_colors(label_map.segment_count);
        novelty_map = Some(render_novelty_map(&label_map, &verdicts, &colors)?);
    }
    timings.novelty_ms = ms_since(t);

    let t = Instant::now();
    let interest = if config.mode.includes_interest() {
        Some(interest_path(&hsi, config)?)
    } else {
        None
    };
    timings.interest_ms = ms_since(t);
    timings.total_ms = ms_since(t0);

    Ok(ImageResult {
        image_index,
        width: w as usize,
        height: h as usize,
        label_map,
        stats,
        verdicts,
        novelty_map,
        interest,
        memory_stored_count: memory.stored_count(),
        timings,
    })
}

fn interest_path(hsi: &HsiImage, config: &SessionConfig) -> Result<InterestResult, PipelineError> {
    let params = GraySegmentParams::default();
    let mut band_labels = Vec::with_capacity(3);
    for band in Band::ALL {
        let raster = GrayRaster::new(hsi.width(), hsi.height(), hsi.band(band))?;
        band_labels.push(segment_gray(&raster, &params)?);
    }
    let band_labels: [SegmentLabelMap; 3] = band_labels.try_into().expect("three bands");
    let uncommon = band_labels.clone().map(|l| uncommon_map(&l));

    let sigma = config.blur_sigma_frac * hsi.width() as f64;
    let imap = interest_map(&uncommon[0], &uncommon[1], &uncommon[2], sigma)?;
    let suppression_radius = (3.0 * sigma).max(1.0);
    let points = top_interest_points(&imap, config.k_points, suppression_radius);
    let degenerate = imap.is_flat();
    Ok(InterestResult {
        band_labels,
        uncommon,
        interest_map: imap,
        points,
        degenerate,
        sigma,
        suppression_radius,
    })
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

pub fn process_image<'s>(
    img: &RgbImage,
    session: &'s mut Session,
) -> Result<&'s ImageResult, PipelineError> {
    session.process_image(img)
}

/// Processes `images` in order through a fresh session.
pub fn process_sequence(
    images: &[RgbImage],
    config: SessionConfig,
) -> Result<Session, PipelineError> {
    if images.is_empty() {
        return Err(PipelineError::EmptySequence);
    }
    let mut session = Session::new("sequence", config)?;
    for (k, img) in images.iter().enumerate() {
        session
            .process_image(img)
            .map_err(|e| PipelineError::AtIndex {
                index: k + 1,
                source: Box::new(e),
            })?;
    }
    Ok(session)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub images_processed: usize,
    pub segments_seen: usize,
    /// Stores recorded in the verdict history, including ones since reset.
    pub patterns_stored: usize,
    pub novel_segments: usize,
    /// Patterns currently held by memory.
    pub memory_stored_count: usize,
    pub novel_rate_per_image: Vec<f64>,
}

pub fn session_summary(session: &Session) -> SessionSummary {
    let r = &session.results;
    SessionSummary {
        session_id: session.id.clone(),
        images_processed: r.len(),
        segments_seen: r.iter().map(|x| x.label_map.segment_count).sum(),
        patterns_stored: r
            .iter()
            .flat_map(|x| &x.verdicts)
            .filter(|v| v.stored)
            .count(),
        novel_segments: r.iter().map(ImageResult::novel_count).sum(),
        memory_stored_count: session.memory.stored_count(),
        novel_rate_per_image: r
            .iter()
            .map(|x| {
                if x.verdicts.is_empty() {
                    0.0
                } else {
                    x.novel_count() as f64 / x.verdicts.len() as f64
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    fn uniform(w: u32, h: u32, c: [u8; 3]) -> RgbImage {
        RgbImage::from_pixel(w, h, Rgb(c))
    }

    fn quadrants(c: [[u8; 3]; 4]) -> RgbImage {
        RgbImage::from_fn(32, 32, |x, y| Rgb(c[(x / 16 + 2 * (y / 16)) as usize]))
    }

    #[test]
    fn config_validation_names_field() {
        let c = SessionConfig {
            theta_deg: -1.0,
            ..Default::default()
        };
        assert_eq!(c.validate().unwrap_err().field, "theta_deg");
        let c = SessionConfig {
            k_points: 0,
            ..Default::default()
        };
        assert_eq!(c.validate().unwrap_err().field, "k_points");
        let c = SessionConfig {
            min_segment_frac: 1.0,
            ..Default::default()
        };
        assert_eq!(c.validate().unwrap_err().field, "min_segment_frac");
    }

    #[test]
    fn too_small_rejected() {
        let mut s = Session::new("t", SessionConfig::default()).unwrap();
        assert!(matches!(
            s.process_image(&uniform(15, 40, [9, 9, 9])),
            Err(PipelineError::ImageTooSmall { .. })
        ));
        assert_eq!(s.next_index(), 1);
    }

    #[test]
    fn first_image_all_novel_then_all_familiar() {
        let img = quadrants([[200, 30, 30], [30, 160, 40], [40, 40, 190], [210, 200, 60]]);
        let mut s = Session::new("t", SessionConfig::default()).unwrap();
        let r1 = s.process_image(&img).unwrap().clone();
        assert_eq!(r1.image_index, 1);
        assert_eq!(r1.label_map.segment_count, 4);
        assert!(r1.verdicts.iter().all(|v| v.novel));
        let r2 = s.process_image(&img).unwrap();
        assert_eq!(r2.image_index, 2);
        assert!(r2.all_familiar());
        assert!(r2
            .novelty_map
            .as_ref()
            .unwrap()
            .pixels()
            .all(|p| p.0 == [0, 0, 0]));
        let sum = s.summary();
        assert_eq!(sum.images_processed, 2);
        assert_eq!(sum.patterns_stored, 4);
        assert_eq!(sum.memory_stored_count, 4);
        assert_eq!(sum.novel_rate_per_image, vec![1.0, 0.0]);
    }

    #[test]
    fn interest_mode_skips_novelty() {
        let img = quadrants([[200, 30, 30], [30, 160, 40], [40, 40, 190], [210, 200, 60]]);
        let cfg = SessionConfig {
            mode: Mode::Interest,
            ..Default::default()
        };
        let mut s = Session::new("t", cfg).unwrap();
        let r = s.process_image(&img).unwrap();
        assert!(r.verdicts.is_empty());
        assert!(r.novelty_map.is_none());
        let i = r.interest.as_ref().unwrap();
        assert_eq!(i.points.len(), 3);
        assert_eq!(s.memory.stored_count(), 0);
    }

    #[test]
    fn reset_restarts_memory_but_keeps_history() {
        let img = uniform(20, 20, [120, 80, 30]);
        let mut s = Session::new("t", SessionConfig::default()).unwrap();
        s.process_image(&img).unwrap();
        s.reset_memory();
        assert_eq!(s.memory_epoch_start(), 2);
        let r = s.process_image(&img).unwrap();
        assert!(r.verdicts.iter().all(|v| v.novel));
        assert_eq!(s.results.len(), 2);
    }

    #[test]
    fn sequence_errors() {
        assert!(matches!(
            process_sequence(&[], SessionConfig::default()),
            Err(PipelineError::EmptySequence)
        ));
        let imgs = vec![uniform(20, 20, [1, 2, 3]), uniform(8, 8, [1, 2, 3])];
        match process_sequence(&imgs, SessionConfig::default()) {
            Err(PipelineError::AtIndex { index, .. }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn uniform_sequence_novel_only_first() {
        let imgs = vec![uniform(24, 24, [90, 140, 200]); 5];
        let s = process_sequence(&imgs, SessionConfig::default()).unwrap();
        for r in &s.results {
            assert_eq!(r.verdicts.len(), 1);
            assert_eq!(r.verdicts[0].novel, r.image_index == 1);
            assert_eq!(r.memory_stored_count, 1);
        }
    }

    #[test]
    fn fresh_summary_is_zero() {
        let s = Session::new("t", SessionConfig::default()).unwrap();
        let sum = session_summary(&s);
        assert_eq!(sum.images_processed, 0);
        assert_eq!(sum.segments_seen, 0);
        assert_eq!(sum.patterns_stored, 0);
        assert!(sum.novel_rate_per_image.is_empty());
    }
}
