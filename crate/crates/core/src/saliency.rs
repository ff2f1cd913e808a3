//! Uncommon maps, the blurred interest map, and interest-point selection.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::segmentation::SegmentLabelMap;

#[derive(Debug, Error, PartialEq)]
pub enum SaliencyError {
    #[error("map dimensions differ: {0:?} vs {1:?}")]
    DimensionMismatch((usize, usize), (usize, usize)),
    #[error("blur sigma must be finite and non-negative, got {0}")]
    InvalidSigma(f64),
}

/// Non-negative per-pixel scores, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarMap {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl ScalarMap {
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        ScalarMap {
            width,
            height,
            values: vec![value; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// True when every value equals the first.
    pub fn is_flat(&self) -> bool {
        match self.values.first() {
            Some(&v0) => self.values.iter().all(|&v| v == v0),
            None => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterestPoint {
    pub x: usize,
    pub y: usize,
    pub score: f64,
}

/// Scores each pixel `1 - count/total` of its segment: rare segments score high.
pub fn uncommon_map(labels: &SegmentLabelMap) -> ScalarMap {
    let total = labels.labels.len() as f64;
    let scores: Vec<f64> = labels
        .segment_sizes()
        .iter()
        .map(|&n| 1.0 - n as f64 / total)
        .collect();
    ScalarMap {
        width: labels.width,
        height: labels.height,
        values: labels.labels.iter().map(|&l| scores[l as usize]).collect(),
    }
}

/// Sums the three band maps and applies a Gaussian of scale `sigma` pixels.
/// `sigma == 0` returns the raw sum.
pub fn interest_map(
    uh: &ScalarMap,
    us: &ScalarMap,
    ui: &ScalarMap,
    sigma: f64,
) -> Result<ScalarMap, SaliencyError> {
    for m in [us, ui] {
        if m.dims() != uh.dims() {
            return Err(SaliencyError::DimensionMismatch(uh.dims(), m.dims()));
        }
    }
    let sum = ScalarMap {
        width: uh.width,
        height: uh.height,
        values: uh
            .values
            .iter()
            .zip(&us.values)
            .zip(&ui.values)
            .map(|((a, b), c)| a + b + c)
            .collect(),
    };
    gaussian_blur(&sum, sigma)
}

/// Gaussian kernel truncated at `ceil(3 sigma)` and normalized to unit mass.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    k
}

/// Separable Gaussian blur. Near the border the kernel is renormalized over
/// the in-bounds taps, so constant maps stay constant.
pub fn gaussian_blur(map: &ScalarMap, sigma: f64) -> Result<ScalarMap, SaliencyError> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(SaliencyError::InvalidSigma(sigma));
    }
    if sigma == 0.0 {
        return Ok(map.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let (w, h) = map.dims();
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &map.values[y * w..(y + 1) * w];
        convolve_line(row, &kernel, &mut tmp[y * w..(y + 1) * w]);
    }
    let mut out = vec![0.0; w * h];
    let mut col = vec![0.0; h];
    let mut col_out = vec![0.0; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = tmp[y * w + x];
        }
        convolve_line(&col, &kernel, &mut col_out);
        for y in 0..h {
            out[y * w + x] = col_out[y];
        }
    }
    Ok(ScalarMap {
        width: w,
        height: h,
        values: out,
    })
}

fn convolve_line(input: &[f64], kernel: &[f64], out: &mut [f64]) {
    let n = input.len() as isize;
    let r = (kernel.len() / 2) as isize;
    for (i, o) in out.iter_mut().enumerate() {
        let i = i as isize;
        let lo = (i - r).max(0);
        let hi = (i + r).min(n - 1);
        let mut acc = 0.0;
        let mut mass = 0.0;
        for j in lo..=hi {
            let kw = kernel[(j - i + r) as usize];
            acc += kw * input[j as usize];
            mass += kw;
        }
        *o = acc / mass;
    }
}

/// Up to `k` peaks of `imap`, strongest first, pairwise at least
/// `suppression_radius` apart (Euclidean).
///
/// Local maxima (no 8-neighbor strictly higher) are considered first, in
/// descending score with ties broken by `(y, x)`. If suppression leaves fewer
/// than `k`, the remaining pixels are scanned in the same order.
pub fn top_interest_points(
    imap: &ScalarMap,
    k: usize,
    suppression_radius: f64,
) -> Vec<InterestPoint> {
    let (w, h) = imap.dims();
    if k == 0 || w == 0 || h == 0 {
        return Vec::new();
    }
    let order = |a: &(usize, usize), b: &(usize, usize)| {
        imap.get(b.0, b.1)
            .total_cmp(&imap.get(a.0, a.1))
            .then(a.1.cmp(&b.1))
            .then(a.0.cmp(&b.0))
    };

    let mut maxima = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if is_local_max(imap, x, y) {
                maxima.push((x, y));
            }
        }
    }
    maxima.sort_by(order);

    let r2 = suppression_radius * suppression_radius;
    let mut picked: Vec<InterestPoint> = Vec::with_capacity(k);
    let try_pick = |picked: &mut Vec<InterestPoint>, (x, y): (usize, usize)| {
        let clear = picked.iter().all(|p| {
            let dx = p.x as f64 - x as f64;
            let dy = p.y as f64 - y as f64;
            dx * dx + dy * dy >= r2
        });
        if clear {
            picked.push(InterestPoint {
                x,
                y,
                score: imap.get(x, y),
            });
        }
    };

    for &c in &maxima {
        if picked.len() == k {
            return picked;
        }
        try_pick(&mut picked, c);
    }
    if picked.len() < k {
        let mut rest: Vec<(usize, usize)> = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .filter(|&(x, y)| !is_local_max(imap, x, y))
            .collect();
        rest.sort_by(order);
        for c in rest {
            if picked.len() == k {
                break;
            }
            try_pick(&mut picked, c);
        }
        // Fallback candidates may outscore later maxima; restore order.
        picked.sort_by(|a, b| order(&(a.x, a.y), &(b.x, b.y)));
    }
    picked
}

fn is_local_max(m: &ScalarMap, x: usize, y: usize) -> bool {
    let v = m.get(x, y);
    for yy in y.saturating_sub(1)..=(y + 1).min(m.height - 1) {
        for xx in x.saturating_sub(1)..=(x + 1).min(m.width - 1) {
            if m.get(xx, yy) > v {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(w: usize, h: usize, f: impl Fn(usize) -> u32, count: usize) -> SegmentLabelMap {
        SegmentLabelMap {
            width: w,
            height: h,
            labels: (0..w * h).map(f).collect(),
            segment_count: count,
            null_segment: None,
        }
    }

    #[test]
    fn single_segment_scores_zero() {
        let m = uncommon_map(&labels(5, 4, |_| 0, 1));
        assert!(m.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ninety_ten_split() {
        let m = uncommon_map(&labels(10, 10, |k| (k >= 90) as u32, 2));
        assert!((m.values[0] - 0.1).abs() < 1e-12);
        assert!((m.values[95] - 0.9).abs() < 1e-12);
    }

    #[test]
    fn three_equal_segments() {
        let m = uncommon_map(&labels(3, 4, |k| (k % 3) as u32, 3));
        assert!(m.values.iter().all(|&v| (v - 2.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn interest_map_of_constants() {
        let z = ScalarMap::filled(9, 7, 0.0);
        assert!(interest_map(&z, &z, &z, 2.0)
            .unwrap()
            .values
            .iter()
            .all(|&v| v == 0.0));
        let c = ScalarMap::filled(9, 7, 0.25);
        let out = interest_map(&c, &c, &c, 2.0).unwrap();
        assert!(out.values.iter().all(|&v| (v - 0.75).abs() < 1e-12));
    }

    #[test]
    fn sigma_zero_is_raw_sum() {
        let mut a = ScalarMap::filled(4, 4, 0.0);
        a.values[5] = 1.0;
        let b = ScalarMap::filled(4, 4, 0.5);
        let out = interest_map(&a, &b, &b, 0.0).unwrap();
        assert_eq!(out.values[5], 2.0);
        assert_eq!(out.values[0], 1.0);
    }

    #[test]
    fn impulse_mass_conserved() {
        let mut m = ScalarMap::filled(41, 41, 0.0);
        m.values[20 * 41 + 20] = 1.0;
        let z = ScalarMap::filled(41, 41, 0.0);
        let out = interest_map(&m, &z, &z, 2.5).unwrap();
        assert!((out.sum() - 1.0).abs() < 1e-6);
        let top = top_interest_points(&out, 1, 1.0);
        assert_eq!((top[0].x, top[0].y), (20, 20));
    }

    #[test]
    fn dimension_mismatch() {
        let a = ScalarMap::filled(4, 4, 0.0);
        let b = ScalarMap::filled(4, 5, 0.0);
        assert!(matches!(
            interest_map(&a, &b, &a, 1.0),
            Err(SaliencyError::DimensionMismatch(..))
        ));
        assert!(gaussian_blur(&a, -1.0).is_err());
    }

    #[test]
    fn strict_global_max_first() {
        let mut m = ScalarMap::filled(10, 10, 0.1);
        m.values[37] = 5.0;
        let pts = top_interest_points(&m, 3, 2.0);
        assert_eq!((pts[0].x, pts[0].y), (7, 3));
        assert_eq!(pts[0].score, 5.0);
    }

    #[test]
    fn three_bumps_in_height_order() {
        let (w, h) = (60, 40);
        let bumps = [(10usize, 10usize, 1.0f64), (45, 30, 3.0), (30, 15, 2.0)];
        let mut m = ScalarMap::filled(w, h, 0.0);
        for y in 0..h {
            for x in 0..w {
                m.values[y * w + x] = bumps
                    .iter()
                    .map(|&(bx, by, a)| {
                        let d2 = (x as f64 - bx as f64).powi(2) + (y as f64 - by as f64).powi(2);
                        a * (-d2 / 8.0).exp()
                    })
                    .sum();
            }
        }
        let pts = top_interest_points(&m, 3, 6.0);
        let got: Vec<_> = pts.iter().map(|p| (p.x, p.y)).collect();
        assert_eq!(got, vec![(45, 30), (30, 15), (10, 10)]);
    }

    #[test]
    fn flat_map_uses_tie_order() {
        let m = ScalarMap::filled(10, 10, 1.0);
        assert!(m.is_flat());
        let pts = top_interest_points(&m, 3, 4.0);
        let got: Vec<_> = pts.iter().map(|p| (p.x, p.y)).collect();
        assert_eq!(got, vec![(0, 0), (4, 0), (8, 0)]);
    }

    proptest! {
        #[test]
        fn smaller_segment_scores_higher(sizes in prop::collection::vec(1usize..30, 2..6)) {
            let total: usize = sizes.iter().sum();
            let mut lab = Vec::with_capacity(total);
            for (k, &n) in sizes.iter().enumerate() {
                lab.extend(std::iter::repeat_n(k as u32, n));
            }
            let map = SegmentLabelMap { width: total, height: 1, labels: lab, segment_count: sizes.len(), null_segment: None };
            let u = uncommon_map(&map);
            let mut score = vec![0.0; sizes.len()];
            for (i, &l) in map.labels.iter().enumerate() {
                score[l as usize] = u.values[i];
            }
            for a in 0..sizes.len() {
                for b in 0..sizes.len() {
                    if sizes[a] < sizes[b] {
                        prop_assert!(score[a] > score[b]);
                    }
                }
            }
        }

        #[test]
        fn interest_map_is_linear(vals in prop::collection::vec(0.0f64..1.0, 64), sigma in 0.0f64..3.0) {
            let m = ScalarMap { width: 8, height: 8, values: vals };
            let m2 = ScalarMap { width: 8, height: 8, values: m.values.iter().map(|v| 2.0 * v).collect() };
            let a = interest_map(&m, &m, &m, sigma).unwrap();
            let b = interest_map(&m2, &m2, &m2, sigma).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((2.0 * x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn points_separated_and_sorted(vals in prop::collection::vec(0.0f64..1.0, 400), k in 1usize..6, r in 1.0f64..6.0) {
            let m = ScalarMap { width: 20, height: 20, values: vals };
            let pts = top_interest_points(&m, k, r);
            prop_assert!(pts.len() <= k);
            for w in pts.windows(2) {
                prop_assert!(w[0].score >= w[1].score);
            }
            for (i, a) in pts.iter().enumerate() {
                for b in &pts[i + 1..] {
                    let d = ((a.x as f64 - b.x as f64).powi(2) + (a.y as f64 - b.y as f64).powi(2)).sqrt();
                    prop_assert!(d >= r);
                }
            }
        }
    }
}
