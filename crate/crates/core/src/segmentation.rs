//! Color segmentation by spectral-angle matching and gray-level segmentation
//! from co-occurrence matrix peaks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::colorspace::HsiImage;

#[derive(Debug, Error, PartialEq)]
pub enum SegmentationError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyImage { width: usize, height: usize },
    #[error("spectral angle is undefined for a zero vector")]
    DegenerateVector,
    #[error("matching angle must be positive and finite, got {0}")]
    InvalidTheta(f64),
    #[error("min_segment_frac must lie in [0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("co-occurrence levels must be at least 2, got {0}")]
    InvalidLevels(usize),
    #[error("peak bounds must satisfy 2 <= min_peaks <= max_peaks, got min {min}, max {max}")]
    InvalidPeaks { min: usize, max: usize },
    #[error("raster holds {actual} values, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
}

/// Partition of an image into segments, one label per pixel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentLabelMap {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<u32>,
    pub segment_count: usize,
    /// Segment holding the exact-black pixels, if any were present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub null_segment: Option<u32>,
}

impl SegmentLabelMap {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn label_at(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Pixel count of every segment, indexed by id.
    pub fn segment_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.segment_count];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }

    /// Number of segments other than the null segment.
    pub fn non_null_count(&self) -> usize {
        self.segment_count - self.null_segment.is_some() as usize
    }

    /// True when every label is in range and every segment is non-empty.
    pub fn is_partition(&self) -> bool {
        if self.labels.len() != self.width * self.height {
            return false;
        }
        if self
            .labels
            .iter()
            .any(|&l| l as usize >= self.segment_count)
        {
            return false;
        }
        self.segment_sizes().iter().all(|&n| n > 0)
    }
}

/// Per-segment pixel count and mean H, S, I.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    pub segment_id: u32,
    pub pixel_count: usize,
    pub mean_h: f64,
    pub mean_s: f64,
    pub mean_i: f64,
}

/// Angle in degrees between two non-negative three-vectors.
pub fn spectral_angle(a: [f64; 3], b: [f64; 3]) -> Result<f64, SegmentationError> {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(SegmentationError::DegenerateVector);
    }
    let cos = (dot(a, b) / (na * nb)).clamp(0.0, 1.0);
    Ok(cos.acos().to_degrees())
}

#[inline]
fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
fn unit(a: [f64; 3]) -> [f64; 3] {
    let n = norm(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Parameters for [`segment_color_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorSegmentParams {
    /// Matching angle in degrees.
    pub theta_deg: f64,
    /// Segments below this fraction of the image are folded into their
    /// best-matching larger segment. Zero disables the merge.
    pub min_segment_frac: f64,
}

impl Default for ColorSegmentParams {
    fn default() -> Self {
        ColorSegmentParams {
            theta_deg: 5.0,
            min_segment_frac: 0.001,
        }
    }
}

/// Running-mean representative of one color segment.
struct Representative {
    sum: [f64; 3],
    dir: [f64; 3],
    is_null: bool,
}

/// Single raster-order pass of spectral-angle matching with no small-segment
/// merge.
///
/// Each pixel joins the existing segment whose running-mean vector makes the
/// smallest angle with it, provided that angle is below `theta_deg`; ties go
/// to the lowest id. Otherwise it founds a new segment. Exact-black pixels
/// share one null segment.
pub fn segment_color(
    img: &HsiImage,
    theta_deg: f64,
) -> Result<(SegmentLabelMap, Vec<SegmentStats>), SegmentationError> {
    segment_color_with(
        img,
        &ColorSegmentParams {
            theta_deg,
            min_segment_frac: 0.0,
        },
    )
}

/// Spectral-angle segmentation followed by the optional small-segment merge.
pub fn segment_color_with(
    img: &HsiImage,
    params: &ColorSegmentParams,
) -> Result<(SegmentLabelMap, Vec<SegmentStats>), SegmentationError> {
    if img.width() == 0 || img.height() == 0 {
        return Err(SegmentationError::EmptyImage {
            width: img.width(),
            height: img.height(),
        });
    }
    if !(params.theta_deg > 0.0 && params.theta_deg.is_finite()) {
        return Err(SegmentationError::InvalidTheta(params.theta_deg));
    }
    if !(0.0..1.0).contains(&params.min_segment_frac) {
        return Err(SegmentationError::InvalidFraction(params.min_segment_frac));
    }

    let (mut labels, reps) = raster_pass(img, params.theta_deg);
    let mut null_segment = reps.iter().position(|r| r.is_null).map(|k| k as u32);
    let mut segment_count = reps.len();

    if params.min_segment_frac > 0.0 {
        let (count, null) = merge_small_segments(&mut labels, &reps, params.min_segment_frac);
        segment_count = count;
        null_segment = null;
    }

    let map = SegmentLabelMap {
        width: img.width(),
        height: img.height(),
        labels,
        segment_count,
        null_segment,
    };
    let stats = segment_stats(img, &map);
    Ok((map, stats))
}

fn raster_pass(img: &HsiImage, theta_deg: f64) -> (Vec<u32>, Vec<Representative>) {
    let cos_theta = theta_deg.to_radians().cos();
    let mut reps: Vec<Representative> = Vec::new();
    let mut null_id: Option<u32> = None;
    let mut labels = Vec::with_capacity(img.len());

    for px in img.pixels() {
        if px.is_zero() {
            let id = *null_id.get_or_insert_with(|| {
                reps.push(Representative {
                    sum: [0.0; 3],
                    dir: [0.0; 3],
                    is_null: true,
                });
                (reps.len() - 1) as u32
            });
            labels.push(id);
            continue;
        }

        let v = px.as_vector();
        let d = unit(v);
        let mut best: Option<usize> = None;
        let mut best_cos = cos_theta;
        for (k, rep) in reps.iter().enumerate() {
            if rep.is_null {
                continue;
            }
            let c = dot(d, rep.dir);
            if c > best_cos {
                best_cos = c;
                best = Some(k);
            }
        }

        match best {
            Some(k) => {
                let rep = &mut reps[k];
                rep.sum = [rep.sum[0] + v[0], rep.sum[1] + v[1], rep.sum[2] + v[2]];
                rep.dir = unit(rep.sum);
                labels.push(k as u32);
            }
            None => {
                reps.push(Representative {
                    sum: v,
                    dir: d,
                    is_null: false,
                });
                labels.push((reps.len() - 1) as u32);
            }
        }
    }
    (labels, reps)
}

/// Folds undersized segments into the best-matching large segment and
/// compacts ids in founding order. Returns the new count and null id.
fn merge_small_segments(
    labels: &mut [u32],
    reps: &[Representative],
    min_frac: f64,
) -> (usize, Option<u32>) {
    let total = labels.len();
    let min_count = min_frac * total as f64;
    let mut sizes = vec![0usize; reps.len()];
    for &l in labels.iter() {
        sizes[l as usize] += 1;
    }
    let large: Vec<bool> = sizes.iter().map(|&n| n as f64 >= min_count).collect();

    let mut target: Vec<u32> = (0..reps.len() as u32).collect();
    for (k, rep) in reps.iter().enumerate() {
        if large[k] || rep.is_null {
            continue;
        }
        let mut best: Option<usize> = None;
        let mut best_cos = f64::NEG_INFINITY;
        for (j, other) in reps.iter().enumerate() {
            if !large[j] || other.is_null {
                continue;
            }
            let c = dot(rep.dir, other.dir);
            if c > best_cos {
                best_cos = c;
                best = Some(j);
            }
        }
        if let Some(j) = best {
            target[k] = j as u32;
        }
    }

    let mut remap = vec![u32::MAX; reps.len()];
    let mut next = 0u32;
    for k in 0..reps.len() {
        if target[k] == k as u32 {
            remap[k] = next;
            next += 1;
        }
    }
    for l in labels.iter_mut() {
        *l = remap[target[*l as usize] as usize];
    }
    let null = reps
        .iter()
        .position(|r| r.is_null)
        .map(|k| remap[k])
        .filter(|&id| id != u32::MAX);
    (next as usize, null)
}

/// Pixel counts and mean H, S, I for every segment of `map`.
pub fn segment_stats(img: &HsiImage, map: &SegmentLabelMap) -> Vec<SegmentStats> {
    let mut sums = vec![[0.0f64; 3]; map.segment_count];
    let mut counts = vec![0usize; map.segment_count];
    for (px, &l) in img.pixels().iter().zip(&map.labels) {
        let s = &mut sums[l as usize];
        s[0] += px.h;
        s[1] += px.s;
        s[2] += px.i;
        counts[l as usize] += 1;
    }
    sums.iter()
        .zip(&counts)
        .enumerate()
        .map(|(k, (s, &n))| {
            let n_f = n.max(1) as f64;
            SegmentStats {
                segment_id: k as u32,
                pixel_count: n,
                mean_h: (s[0] / n_f).clamp(0.0, 1.0),
                mean_s: (s[1] / n_f).clamp(0.0, 1.0),
                mean_i: (s[2] / n_f).clamp(0.0, 1.0),
            }
        })
        .collect()
}

/// A single-band raster with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayRaster {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl GrayRaster {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self, SegmentationError> {
        if width == 0 || height == 0 {
            return Err(SegmentationError::EmptyImage { width, height });
        }
        if values.len() != width * height {
            return Err(SegmentationError::BufferSize {
                expected: width * height,
                actual: values.len(),
            });
        }
        Ok(GrayRaster {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Bin index of a unit-range gray value, `floor(v * levels)` clamped.
#[inline]
pub fn gray_bin(v: f64, levels: usize) -> usize {
    if v.is_nan() || v <= 0.0 {
        return 0;
    }
    ((v * levels as f64) as usize).min(levels - 1)
}

/// Symmetric co-occurrence counts over right and bottom neighbor pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CooccurrenceMatrix {
    levels: usize,
    counts: Vec<u64>,
}

impl CooccurrenceMatrix {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.levels + j]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn diagonal_total(&self) -> u64 {
        (0..self.levels).map(|i| self.get(i, i)).sum()
    }
}

pub fn gray_cooccurrence(
    img: &GrayRaster,
    levels: usize,
) -> Result<CooccurrenceMatrix, SegmentationError> {
    if levels < 2 {
        return Err(SegmentationError::InvalidLevels(levels));
    }
    let bins: Vec<usize> = img.values.iter().map(|&v| gray_bin(v, levels)).collect();
    Ok(cooccurrence_from_bins(&bins, img.width, img.height, levels))
}

fn cooccurrence_from_bins(bins: &[usize], w: usize, h: usize, levels: usize) -> CooccurrenceMatrix {
    let mut counts = vec![0u64; levels * levels];
    let mut add = |a: usize, b: usize| {
        counts[a * levels + b] += 1;
        counts[b * levels + a] += 1;
    };
    for y in 0..h {
        for x in 0..w {
            let a = bins[y * w + x];
            if x + 1 < w {
                add(a, bins[y * w + x + 1]);
            }
            if y + 1 < h {
                add(a, bins[(y + 1) * w + x]);
            }
        }
    }
    CooccurrenceMatrix { levels, counts }
}

/// Parameters for [`segment_gray`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraySegmentParams {
    pub levels: usize,
    pub max_peaks: usize,
    pub min_peaks: usize,
    /// Chebyshev radius, in bins, inside which weaker peaks are suppressed.
    pub suppression_radius: usize,
}

impl Default for GraySegmentParams {
    fn default() -> Self {
        GraySegmentParams {
            levels: 64,
            max_peaks: 8,
            min_peaks: 6,
            suppression_radius: 4,
        }
    }
}

/// Cell of the co-occurrence matrix selected as a peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CooccurrencePeak {
    pub row: usize,
    pub col: usize,
    pub height: f64,
}

impl CooccurrencePeak {
    /// Gray level the peak projects to on the diagonal.
    pub fn center(&self) -> f64 {
        (self.row + self.col) as f64 / 2.0
    }
}

/// 3x3 box mean over the in-bounds neighborhood of each cell.
fn box_smooth(m: &CooccurrenceMatrix) -> Vec<f64> {
    let n = m.levels;
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut sum = 0.0;
            let mut cells = 0.0;
            for ii in i.saturating_sub(1)..=(i + 1).min(n - 1) {
                for jj in j.saturating_sub(1)..=(j + 1).min(n - 1) {
                    sum += m.get(ii, jj) as f64;
                    cells += 1.0;
                }
            }
            out[i * n + j] = sum / cells;
        }
    }
    out
}

/// Greedy peak selection on the box-smoothed matrix.
///
/// Candidates are positive cells no lower than any of their eight neighbors,
/// ranked by smoothed height, then raw count, then position. If fewer than
/// `min_peaks` survive suppression, the radius is halved (down to 1) and the
/// remaining candidates are reconsidered.
pub fn cooccurrence_peaks(
    m: &CooccurrenceMatrix,
    params: &GraySegmentParams,
) -> Vec<CooccurrencePeak> {
    let n = m.levels;
    let smooth = box_smooth(m);
    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let v = smooth[i * n + j];
            if v <= 0.0 {
                continue;
            }
            let mut is_max = true;
            'nb: for ii in i.saturating_sub(1)..=(i + 1).min(n - 1) {
                for jj in j.saturating_sub(1)..=(j + 1).min(n - 1) {
                    if smooth[ii * n + jj] > v {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                candidates.push((i, j));
            }
        }
    }
    candidates.sort_by(|&(ai, aj), &(bi, bj)| {
        smooth[bi * n + bj]
            .total_cmp(&smooth[ai * n + aj])
            .then(m.get(bi, bj).cmp(&m.get(ai, aj)))
            .then((ai, aj).cmp(&(bi, bj)))
    });

    let mut taken = vec![false; candidates.len()];
    let mut selected: Vec<CooccurrencePeak> = Vec::new();
    let mut radius = params.suppression_radius.max(1);
    loop {
        for (k, &(i, j)) in candidates.iter().enumerate() {
            if selected.len() >= params.max_peaks {
                break;
            }
            if taken[k] {
                continue;
            }
            let clear = selected
                .iter()
                .all(|p| p.row.abs_diff(i).max(p.col.abs_diff(j)) > radius);
            if clear {
                taken[k] = true;
                selected.push(CooccurrencePeak {
                    row: i,
                    col: j,
                    height: smooth[i * n + j],
                });
            }
        }
        if selected.len() >= params.min_peaks || radius == 1 || selected.len() >= params.max_peaks {
            break;
        }
        radius /= 2;
    }
    selected
}

/// Gray-level segmentation from co-occurrence peaks.
///
/// Each selected peak projects to a diagonal gray center; every pixel joins
/// the peak whose center is nearest its bin, ties to the earlier peak. Peaks
/// that attract no pixels are dropped and ids are compacted in peak order.
pub fn segment_gray(
    img: &GrayRaster,
    params: &GraySegmentParams,
) -> Result<SegmentLabelMap, SegmentationError> {
    if params.min_peaks < 2 || params.min_peaks > params.max_peaks {
        return Err(SegmentationError::InvalidPeaks {
            min: params.min_peaks,
            max: params.max_peaks,
        });
    }
    if params.levels < 2 {
        return Err(SegmentationError::InvalidLevels(params.levels));
    }
    let levels = params.levels;
    let bins: Vec<usize> = img.values.iter().map(|&v| gray_bin(v, levels)).collect();
    let matrix = cooccurrence_from_bins(&bins, img.width, img.height, levels);
    let peaks = cooccurrence_peaks(&matrix, params);
    let centers: Vec<f64> = peaks.iter().map(CooccurrencePeak::center).collect();

    // Nearest center per gray bin; centers is never empty for a non-empty image.
    let bin_to_peak: Vec<usize> = (0..levels)
        .map(|b| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (k, &c) in centers.iter().enumerate() {
                let d = (b as f64 - c).abs();
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            best
        })
        .collect();

    let mut used = vec![false; centers.len().max(1)];
    for &b in &bins {
        used[bin_to_peak[b]] = true;
    }
    let mut remap = vec![0u32; used.len()];
    let mut next = 0u32;
    for (k, &u) in used.iter().enumerate() {
        if u {
            remap[k] = next;
            next += 1;
        }
    }
    let labels = bins.iter().map(|&b| remap[bin_to_peak[b]]).collect();
    Ok(SegmentLabelMap {
        width: img.width,
        height: img.height,
        labels,
        segment_count: next as usize,
        null_segment: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colorspace::HsiPixel;
    use proptest::prelude::*;

    /// Independent oracle: angle from the law of cosines.
    fn angle_oracle(a: [f64; 3], b: [f64; 3]) -> f64 {
        let la = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let lb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        let dc = (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>();
        let cos = (la * la + lb * lb - dc) / (2.0 * la * lb);
        cos.clamp(-1.0, 1.0).acos().to_degrees()
    }

    fn img_from(w: usize, h: usize, f: impl Fn(usize, usize) -> HsiPixel) -> HsiImage {
        let px = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect();
        HsiImage::new(w, h, px).unwrap()
    }

    #[test]
    fn spectral_angle_examples() {
        let a = [0.2, 0.5, 0.9];
        assert!(spectral_angle(a, a).unwrap().abs() < 1e-6);
        let right = spectral_angle([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]).unwrap();
        assert!((right - angle_oracle([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])).abs() < 1e-9);
        assert!((right - 90.0).abs() < 1e-9);
        let sixty = spectral_angle([1.0, 1.0, 0.0], [1.0, 0.0, 1.0]).unwrap();
        assert!((sixty - angle_oracle([1.0, 1.0, 0.0], [1.0, 0.0, 1.0])).abs() < 1e-9);
        assert!((sixty - 60.0).abs() < 1e-9);
    }

    #[test]
    fn spectral_angle_rejects_zero() {
        assert_eq!(
            spectral_angle([0.0; 3], [1.0, 0.0, 0.0]),
            Err(SegmentationError::DegenerateVector)
        );
    }

    #[test]
    fn uniform_image_is_one_segment() {
        let img = img_from(7, 5, |_, _| HsiPixel::new(0.3, 0.4, 0.5));
        for theta in [0.1, 5.0, 45.0] {
            let (map, stats) = segment_color(&img, theta).unwrap();
            assert_eq!(map.segment_count, 1);
            assert_eq!(stats[0].pixel_count, 35);
        }
    }

    #[test]
    fn orthogonal_halves_split() {
        let img = img_from(8, 4, |x, _| {
            if x < 4 {
                HsiPixel::new(0.8, 0.0, 0.0)
            } else {
                HsiPixel::new(0.0, 0.6, 0.0)
            }
        });
        let (map, _) = segment_color(&img, 10.0).unwrap();
        assert_eq!(map.segment_count, 2);
        for y in 0..4 {
            for x in 0..8 {
                assert_eq!(map.label_at(x, y), (x >= 4) as u32);
            }
        }
    }

    #[test]
    fn black_pixels_form_null_segment() {
        let img = img_from(4, 4, |x, y| {
            if (x + y) % 3 == 0 {
                HsiPixel::default()
            } else {
                HsiPixel::new(0.1, 0.5, 0.5)
            }
        });
        let (map, stats) = segment_color(&img, 5.0).unwrap();
        assert_eq!(map.segment_count, 2);
        assert_eq!(map.null_segment, Some(0));
        assert_eq!(map.non_null_count(), 1);
        assert_eq!(stats[0].mean_i, 0.0);
    }

    #[test]
    fn small_segments_merge_into_best_match() {
        // 99 pixels of one color, one pixel of a color 20 degrees away.
        let img = img_from(10, 10, |x, y| {
            if x == 9 && y == 9 {
                HsiPixel::new(0.5, 0.5, 0.2)
            } else {
                HsiPixel::new(0.5, 0.5, 0.5)
            }
        });
        let (raw, _) = segment_color(&img, 5.0).unwrap();
        assert_eq!(raw.segment_count, 2);
        let params = ColorSegmentParams {
            theta_deg: 5.0,
            min_segment_frac: 0.05,
        };
        let (merged, stats) = segment_color_with(&img, &params).unwrap();
        assert_eq!(merged.segment_count, 1);
        assert!(merged.is_partition());
        assert_eq!(stats[0].pixel_count, 100);
    }

    #[test]
    fn invalid_parameters() {
        let img = img_from(2, 2, |_, _| HsiPixel::new(0.1, 0.1, 0.1));
        assert_eq!(
            segment_color(&img, 0.0).unwrap_err(),
            SegmentationError::InvalidTheta(0.0)
        );
        let bad = ColorSegmentParams {
            theta_deg: 5.0,
            min_segment_frac: 1.0,
        };
        assert!(segment_color_with(&img, &bad).is_err());
        let g = GrayRaster::new(2, 1, vec![0.0, 0.0]).unwrap();
        assert!(gray_cooccurrence(&g, 1).is_err());
        let p = GraySegmentParams {
            min_peaks: 9,
            ..Default::default()
        };
        assert!(segment_gray(&g, &p).is_err());
        assert!(GrayRaster::new(0, 1, vec![]).is_err());
    }

    #[test]
    fn cooccurrence_two_pixels_same_bin() {
        let v = 5.5 / 64.0;
        let g = GrayRaster::new(2, 1, vec![v, v]).unwrap();
        let m = gray_cooccurrence(&g, 64).unwrap();
        assert_eq!(m.get(5, 5), 2);
        assert_eq!(m.total(), 2);
    }

    #[test]
    fn cooccurrence_uniform_is_diagonal() {
        let g = GrayRaster::new(6, 5, vec![0.4; 30]).unwrap();
        let m = gray_cooccurrence(&g, 64).unwrap();
        assert_eq!(m.diagonal_total(), m.total());
        // 5 rows x 5 horizontal + 4 rows x 6 vertical pairs, both orders.
        assert_eq!(m.total(), 2 * (25 + 24));
    }

    #[test]
    fn cooccurrence_checkerboard_off_diagonal() {
        let vals = (0..64)
            .map(|k| if (k % 8 + k / 8) % 2 == 0 { 0.0 } else { 1.0 })
            .collect();
        let g = GrayRaster::new(8, 8, vals).unwrap();
        let m = gray_cooccurrence(&g, 64).unwrap();
        assert_eq!(m.diagonal_total(), 0);
        assert_eq!(m.get(0, 63), m.get(63, 0));
        assert_eq!(m.total(), 2 * (8 * 7 * 2));
    }

    #[test]
    fn gray_uniform_single_segment() {
        let g = GrayRaster::new(9, 9, vec![0.7; 81]).unwrap();
        let map = segment_gray(&g, &GraySegmentParams::default()).unwrap();
        assert_eq!(map.segment_count, 1);
    }

    #[test]
    fn gray_two_levels_recovered() {
        let (w, h) = (20, 10);
        let lo = 10.5 / 64.0;
        let hi = 50.5 / 64.0;
        let vals = (0..w * h)
            .map(|k| if k % w < w / 2 { lo } else { hi })
            .collect();
        let g = GrayRaster::new(w, h, vals).unwrap();
        let map = segment_gray(&g, &GraySegmentParams::default()).unwrap();
        assert_eq!(map.segment_count, 2);
        for y in 0..h {
            for x in 0..w {
                assert_eq!(map.label_at(x, y), (x >= w / 2) as u32);
            }
        }
    }

    fn arb_hsi_image() -> impl Strategy<Value = HsiImage> {
        (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            prop::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0), w * h).prop_map(
                move |v| {
                    let px = v
                        .into_iter()
                        .map(|(a, b, c)| HsiPixel::new(a, b, c))
                        .collect();
                    HsiImage::new(w, h, px).unwrap()
                },
            )
        })
    }

    proptest! {
        #[test]
        fn spectral_angle_symmetric(a in prop::array::uniform3(0.01f64..1.0), b in prop::array::uniform3(0.01f64..1.0)) {
            let ab = spectral_angle(a, b).unwrap();
            let ba = spectral_angle(b, a).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!((0.0..=90.0).contains(&ab));
            prop_assert!((ab - angle_oracle(a, b)).abs() < 1e-5);
        }

        #[test]
        fn color_segmentation_is_partition(img in arb_hsi_image(), theta in 1.0f64..30.0, frac in 0.0f64..0.2) {
            let params = ColorSegmentParams { theta_deg: theta, min_segment_frac: frac };
            let (map, stats) = segment_color_with(&img, &params).unwrap();
            prop_assert!(map.is_partition());
            prop_assert_eq!(stats.len(), map.segment_count);
            let sizes = map.segment_sizes();
            for s in &stats {
                prop_assert_eq!(s.pixel_count, sizes[s.segment_id as usize]);
            }
        }

        #[test]
        fn gray_segmentation_bounded(vals in prop::collection::vec(0.0f64..1.0, 1..400)) {
            let n = vals.len();
            let g = GrayRaster::new(n, 1, vals).unwrap();
            let map = segment_gray(&g, &GraySegmentParams::default()).unwrap();
            prop_assert!(map.is_partition());
            prop_assert!(map.segment_count <= 8);
        }

        #[test]
        fn cooccurrence_total_counts_pairs(w in 1usize..10, h in 1usize..10, seed in any::<u64>()) {
            let vals = (0..w * h).map(|k| ((k as u64).wrapping_mul(seed | 1) % 97) as f64 / 97.0).collect();
            let g = GrayRaster::new(w, h, vals).unwrap();
            let m = gray_cooccurrence(&g, 16).unwrap();
            prop_assert_eq!(m.total() as usize, 2 * ((w - 1) * h + w * (h - 1)));
            for i in 0..16 {
                for j in 0..16 {
                    prop_assert_eq!(m.get(i, j), m.get(j, i));
                }
            }
        }
    }
}
