//! Synthetic image sequences for tests, demos, and `gen-corpus`.
//!
//! Colors are specified in HSI and converted back to 8-bit RGB, so scenes can
//! be built directly in the space the detector works in.

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::colorspace::{HsiPixel, MAX_BIN};

/// Inverse of the geometric HSI transform, clamped to the RGB cube.
pub fn hsi_to_rgb(p: HsiPixel) -> [u8; 3] {
    let (i, s) = (p.i, p.s);
    let deg = (p.h.rem_euclid(1.0)) * 360.0;
    let sector = |hd: f64| {
        let hr = hd.to_radians();
        let lo = i * (1.0 - s);
        let hi = i * (1.0 + s * hr.cos() / (60f64.to_radians() - hr).cos());
        let mid = 3.0 * i - (lo + hi);
        (lo, hi, mid)
    };
    let (r, g, b) = if deg < 120.0 {
        let (lo, hi, mid) = sector(deg);
        (hi, mid, lo)
    } else if deg < 240.0 {
        let (lo, hi, mid) = sector(deg - 120.0);
        (lo, hi, mid)
    } else {
        let (lo, hi, mid) = sector(deg - 240.0);
        (mid, lo, hi)
    };
    let to8 = |v: f64| (v * 255.0).round().clamp(0.0, 255.0) as u8;
    [to8(r), to8(g), to8(b)]
}

/// A rectangle filled with one HSI color, painted in order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
    pub color: HsiPixel,
}

/// Paints `regions` over a background, with optional per-pixel noise on
/// intensity (standard deviation `noise`, in unit intensity).
pub fn region_scene(
    width: u32,
    height: u32,
    background: HsiPixel,
    regions: &[Region],
    noise: f64,
    seed: u64,
) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RgbImage::from_fn(width, height, |x, y| {
        let mut c = background;
        for r in regions {
            if x >= r.x0 && x < r.x1 && y >= r.y0 && y < r.y1 {
                c = r.color;
            }
        }
        if noise > 0.0 {
            c.i = (c.i + noise * gaussian(&mut rng)).clamp(0.01, 0.99);
        }
        Rgb(hsi_to_rgb(c))
    })
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    // Box-Muller; one sample per call is plenty here.
    let u1: f64 = rng.random::<f64>().max(1e-12);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Parameters of a uniform-terrain sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerrainParams {
    pub images: usize,
    pub width: u32,
    pub height: u32,
    /// Each image's mean color is drawn uniformly within `±jitter_bins / 2`
    /// quantization bins of the base color on every channel.
    pub jitter_bins: f64,
    /// Per-pixel intensity noise (standard deviation, unit intensity).
    pub pixel_noise: f64,
}

impl Default for TerrainParams {
    fn default() -> Self {
        TerrainParams {
            images: 10,
            width: 64,
            height: 48,
            jitter_bins: 2.0,
            pixel_noise: 0.002,
        }
    }
}

/// A random moderately saturated base color well inside the RGB gamut.
pub fn random_terrain_color(rng: &mut impl Rng) -> HsiPixel {
    HsiPixel::new(
        rng.random_range(0.02..0.98),
        rng.random_range(0.2..0.5),
        rng.random_range(0.3..0.55),
    )
}

/// Images of one terrain color whose per-image mean wanders by at most
/// `jitter_bins` quantization bins per channel. Returns the images and the
/// base color.
pub fn uniform_terrain_sequence(seed: u64, params: &TerrainParams) -> (Vec<RgbImage>, HsiPixel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = random_terrain_color(&mut rng);
    let half = params.jitter_bins / 2.0 / MAX_BIN as f64;
    let images = (0..params.images)
        .map(|k| {
            let mut j = || rng.random_range(-half..=half);
            let color = HsiPixel::new(
                (base.h + j()).clamp(0.0, 1.0),
                (base.s + j()).clamp(0.0, 1.0),
                (base.i + j()).clamp(0.0, 1.0),
            );
            region_scene(
                params.width,
                params.height,
                color,
                &[],
                params.pixel_noise,
                seed.wrapping_mul(1_000_003).wrapping_add(k as u64),
            )
        })
        .collect();
    (images, base)
}

/// A "natural-style" outcrop scene: a banded background of a few earth
/// tones, scattered rectangular inclusions, and mild intensity noise.
pub fn natural_scene(seed: u64, width: u32, height: u32) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bands = rng.random_range(3..6);
    let band_colors: Vec<HsiPixel> = (0..bands)
        .map(|_| {
            HsiPixel::new(
                rng.random_range(0.03..0.15),
                rng.random_range(0.15..0.45),
                rng.random_range(0.3..0.7),
            )
        })
        .collect();
    let band_h = height.div_ceil(bands as u32);
    let mut regions: Vec<Region> = band_colors
        .iter()
        .enumerate()
        .map(|(k, &c)| Region {
            x0: 0,
            y0: k as u32 * band_h,
            x1: width,
            y1: ((k as u32 + 1) * band_h).min(height),
            color: c,
        })
        .collect();
    let inclusions = rng.random_range(4..9);
    for _ in 0..inclusions {
        let w = rng.random_range(width / 40..width / 8).max(2);
        let h = rng.random_range(height / 40..height / 8).max(2);
        let x0 = rng.random_range(0..width - w);
        let y0 = rng.random_range(0..height - h);
        regions.push(Region {
            x0,
            y0,
            x1: x0 + w,
            y1: y0 + h,
            color: HsiPixel::new(
                rng.random_range(0.0..1.0),
                rng.random_range(0.3..0.8),
                rng.random_range(0.25..0.6),
            ),
        });
    }
    region_scene(
        width,
        height,
        band_colors[0],
        &regions,
        0.004,
        seed ^ 0x5eed,
    )
}
