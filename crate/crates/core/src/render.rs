//! Raster renderings: segment palette, gray-scale score maps, and
//! interest-point crosses.

use image::{GrayImage, Luma, Rgb, RgbImage};

use crate::saliency::{InterestPoint, ScalarMap};
use crate::segmentation::SegmentLabelMap;

pub const PALETTE_LEN: usize = 64;

/// Color drawn for interest-point crosses.
pub const CROSS_COLOR: [u8; 3] = [0, 255, 0];

/// Display color of segment `id`. The table cycles every 64 ids and never
/// contains black, which is reserved for familiar segments.
pub fn palette_color(id: u32) -> [u8; 3] {
    PALETTE[id as usize % PALETTE_LEN]
}

pub fn palette_colors(count: usize) -> Vec<[u8; 3]> {
    (0..count as u32).map(palette_color).collect()
}

static PALETTE: [[u8; 3]; PALETTE_LEN] = build_palette();

/// 16 hues stepped by 7/16 of the circle, at four brightness/saturation tiers.
const fn build_palette() -> [[u8; 3]; PALETTE_LEN] {
    const TIERS: [(u32, u32); 4] = [(255, 255), (255, 150), (190, 255), (230, 90)];
    let mut out = [[0u8; 3]; PALETTE_LEN];
    let mut k = 0;
    while k < PALETTE_LEN {
        let hue_step = (k % 16) * 7 % 16;
        let (value, sat) = TIERS[k / 16];
        out[k] = hsv_bytes(hue_step as u32 * 360 / 16, sat, value);
        k += 1;
    }
    out
}

/// Integer HSV to RGB with `s`, `v` in `0..=255` and `h` in degrees.
const fn hsv_bytes(h: u32, s: u32, v: u32) -> [u8; 3] {
    let region = h / 60;
    let rem = (h % 60) * 255 / 60;
    let p = v * (255 - s) / 255;
    let q = v * (255 - s * rem / 255) / 255;
    let t = v * (255 - s * (255 - rem) / 255) / 255;
    let (r, g, b) = match region {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [r as u8, g as u8, b as u8]
}

/// Segmentation rendering: each pixel painted with its segment's palette color.
pub fn render_segmentation(labels: &SegmentLabelMap) -> RgbImage {
    let mut img = RgbImage::new(labels.width as u32, labels.height as u32);
    for (px, &l) in img.pixels_mut().zip(&labels.labels) {
        *px = Rgb(palette_color(l));
    }
    img
}

/// Scales a score map so its maximum becomes 255. An all-zero map stays black.
pub fn render_scalar_map(map: &ScalarMap) -> GrayImage {
    let max = map.max();
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let mut img = GrayImage::new(map.width as u32, map.height as u32);
    for (px, &v) in img.pixels_mut().zip(&map.values) {
        *px = Luma([(v * scale).round().clamp(0.0, 255.0) as u8]);
    }
    img
}

/// Half-length of the cross arms for an image of the given width.
pub fn cross_arm(width: u32) -> u32 {
    (width / 40).max(3)
}

/// Copies `original` and draws a `+` cross at each point.
pub fn render_overlay(original: &RgbImage, points: &[InterestPoint], arm: u32) -> RgbImage {
    let mut img = original.clone();
    let (w, h) = img.dimensions();
    for p in points {
        let (cx, cy) = (p.x as i64, p.y as i64);
        for d in -(arm as i64)..=arm as i64 {
            for (x, y) in [(cx + d, cy), (cx, cy + d)] {
                if x >= 0 && y >= 0 && (x as u32) < w && (y as u32) < h {
                    img.put_pixel(x as u32, y as u32, Rgb(CROSS_COLOR));
                }
            }
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn palette_has_no_black_and_is_distinct() {
        let set: HashSet<[u8; 3]> = PALETTE.iter().copied().collect();
        assert_eq!(set.len(), PALETTE_LEN);
        assert!(!set.contains(&[0, 0, 0]));
    }

    #[test]
    fn palette_is_cyclic() {
        assert_eq!(palette_color(3), palette_color(3 + 64));
        assert_eq!(palette_color(0), [255, 0, 0]);
    }

    #[test]
    fn scalar_map_normalized() {
        let m = ScalarMap {
            width: 3,
            height: 1,
            values: vec![0.0, 0.5, 2.0],
        };
        let img = render_scalar_map(&m);
        assert_eq!(img.as_raw(), &vec![0, 64, 255]);
        let z = ScalarMap::filled(2, 2, 0.0);
        assert!(render_scalar_map(&z).pixels().all(|p| p.0[0] == 0));
    }

    #[test]
    fn overlay_clips_at_border() {
        let base = RgbImage::new(10, 10);
        let pts = [InterestPoint {
            x: 0,
            y: 9,
            score: 1.0,
        }];
        let img = render_overlay(&base, &pts, 3);
        let n = img.pixels().filter(|p| p.0 == CROSS_COLOR).count();
        assert_eq!(n, 7);
    }
}
