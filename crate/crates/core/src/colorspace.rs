//! RGB to HSI conversion and the 18-spin color pattern.
//!
//! Hue is mapped linearly from `[0°, 360°)` onto `[0, 1)`; saturation and
//! intensity are already unit-range. Achromatic pixels get hue 0.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bits per quantized channel.
pub const BITS_PER_CHANNEL: usize = 6;
/// Largest quantized channel value.
pub const MAX_BIN: u8 = (1 << BITS_PER_CHANNEL) - 1;
/// Spins in a color pattern: three channels of six bits.
pub const PATTERN_LEN: usize = 3 * BITS_PER_CHANNEL;

/// One pixel in hue/saturation/intensity space, every component in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct HsiPixel {
    pub h: f64,
    pub s: f64,
    pub i: f64,
}

impl HsiPixel {
    pub fn new(h: f64, s: f64, i: f64) -> Self {
        HsiPixel { h, s, i }
    }

    /// The pixel as a three-vector, in `(h, s, i)` order.
    #[inline]
    pub fn as_vector(&self) -> [f64; 3] {
        [self.h, self.s, self.i]
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        self.h == 0.0 && self.s == 0.0 && self.i == 0.0
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ColorError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    EmptyImage { width: usize, height: usize },
    #[error("pixel buffer holds {actual} pixels, expected {expected}")]
    BufferSize { expected: usize, actual: usize },
    #[error("invalid pattern string {0:?}: expected 18 characters of '0'/'1'")]
    PatternParse(String),
}

/// A row-major HSI raster.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiImage {
    width: usize,
    height: usize,
    pixels: Vec<HsiPixel>,
}

impl HsiImage {
    pub fn new(width: usize, height: usize, pixels: Vec<HsiPixel>) -> Result<Self, ColorError> {
        if width == 0 || height == 0 {
            return Err(ColorError::EmptyImage { width, height });
        }
        if pixels.len() != width * height {
            return Err(ColorError::BufferSize {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        Ok(HsiImage {
            width,
            height,
            pixels,
        })
    }

    /// Converts an 8-bit RGB image pixel by pixel.
    pub fn from_rgb(img: &image::RgbImage) -> Result<Self, ColorError> {
        let pixels = img.pixels().map(|p| rgb_to_hsi(p[0], p[1], p[2])).collect();
        HsiImage::new(img.width() as usize, img.height() as usize, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[HsiPixel] {
        &self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn get(&self, x: usize, y: usize) -> HsiPixel {
        self.pixels[y * self.width + x]
    }

    /// Applies `f` to every pixel, keeping the dimensions.
    pub fn map_pixels(&self, f: impl Fn(HsiPixel) -> HsiPixel) -> HsiImage {
        HsiImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&p| f(p)).collect(),
        }
    }

    /// Extracts one band as a flat row-major vector.
    pub fn band(&self, band: Band) -> Vec<f64> {
        self.pixels
            .iter()
            .map(|p| match band {
                Band::Hue => p.h,
                Band::Saturation => p.s,
                Band::Intensity => p.i,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Hue,
    Saturation,
    Intensity,
}

impl Band {
    pub const ALL: [Band; 3] = [Band::Hue, Band::Saturation, Band::Intensity];

    pub fn short_name(&self) -> &'static str {
        match self {
            Band::Hue => "h",
            Band::Saturation => "s",
            Band::Intensity => "i",
        }
    }
}

/// Geometric HSI conversion of an 8-bit RGB triple.
///
/// `I = (R+G+B)/3`, `S = 1 - min(R,G,B)/I`, and hue from the arccos
/// chromatic-angle formula, reflected when `B > G`.
pub fn rgb_to_hsi(r: u8, g: u8, b: u8) -> HsiPixel {
    let (rf, gf, bf) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
    let i = (rf + gf + bf) / 3.0;
    if r == g && g == b {
        return HsiPixel::new(0.0, 0.0, i.clamp(0.0, 1.0));
    }

    let min = rf.min(gf).min(bf);
    let s = if i > 0.0 { 1.0 - min / i } else { 0.0 };

    let num = 0.5 * ((rf - gf) + (rf - bf));
    let den = ((rf - gf) * (rf - gf) + (rf - bf) * (gf - bf)).sqrt();
    let h = if den > 0.0 {
        let theta = (num / den).clamp(-1.0, 1.0).acos().to_degrees();
        let deg = if b > g { 360.0 - theta } else { theta };
        deg / 360.0
    } else {
        0.0
    };

    HsiPixel::new(h.clamp(0.0, 1.0), s.clamp(0.0, 1.0), i.clamp(0.0, 1.0))
}

/// Quantizes a unit-range value to six bits, rounding half away from zero.
/// Out-of-range inputs are clamped first; NaN maps to 0.
pub fn quantize6(v: f64) -> u8 {
    if v.is_nan() {
        return 0;
    }
    (v.clamp(0.0, 1.0) * MAX_BIN as f64).round() as u8
}

/// The center of a quantization bin back in `[0, 1]`.
pub fn bin_center(bin: u8) -> f64 {
    bin.min(MAX_BIN) as f64 / MAX_BIN as f64
}

/// An 18-entry vector of ±1 spins: the six-bit quantized H, S and I means,
/// MSB first, with bit `b` mapped to spin `2b - 1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pattern([i8; PATTERN_LEN]);

impl Pattern {
    /// Builds a pattern from raw spins. Returns `None` unless every entry is ±1.
    pub fn from_spins(spins: [i8; PATTERN_LEN]) -> Option<Self> {
        spins
            .iter()
            .all(|&s| s == 1 || s == -1)
            .then_some(Pattern(spins))
    }

    /// Packs three six-bit bins (values above 63 are clamped).
    pub fn from_bins(bins: [u8; 3]) -> Self {
        let mut spins = [-1i8; PATTERN_LEN];
        for (c, &bin) in bins.iter().enumerate() {
            let bin = bin.min(MAX_BIN);
            for k in 0..BITS_PER_CHANNEL {
                let bit = (bin >> (BITS_PER_CHANNEL - 1 - k)) & 1;
                spins[c * BITS_PER_CHANNEL + k] = 2 * bit as i8 - 1;
            }
        }
        Pattern(spins)
    }

    /// Recovers the `(qH, qS, qI)` bins.
    pub fn bins(&self) -> [u8; 3] {
        let mut out = [0u8; 3];
        for (c, slot) in out.iter_mut().enumerate() {
            for k in 0..BITS_PER_CHANNEL {
                let bit = (self.0[c * BITS_PER_CHANNEL + k] > 0) as u8;
                *slot = (*slot << 1) | bit;
            }
        }
        out
    }

    pub fn spins(&self) -> &[i8; PATTERN_LEN] {
        &self.0
    }

    /// The pattern with every spin flipped.
    pub fn complement(&self) -> Pattern {
        let mut spins = self.0;
        spins.iter_mut().for_each(|s| *s = -*s);
        Pattern(spins)
    }

    /// Spin overlap `x · y`, an even integer in `[-18, 18]`.
    pub fn overlap(&self, other: &Pattern) -> i32 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(&a, &b)| a as i32 * b as i32)
            .sum()
    }

    pub fn hamming(&self, other: &Pattern) -> usize {
        self.0
            .iter()
            .zip(other.0.iter())
            .filter(|(a, b)| a != b)
            .count()
    }

    /// `"0"`/`"1"` bitstring, H bits first.
    pub fn to_bitstring(&self) -> String {
        self.0
            .iter()
            .map(|&s| if s > 0 { '1' } else { '0' })
            .collect()
    }
}

impl fmt::Debug for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pattern({})", self.to_bitstring())
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

impl FromStr for Pattern {
    type Err = ColorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut spins = [0i8; PATTERN_LEN];
        let mut n = 0;
        for ch in s.chars() {
            if n == PATTERN_LEN {
                return Err(ColorError::PatternParse(s.to_string()));
            }
            spins[n] = match ch {
                '0' => -1,
                '1' => 1,
                _ => return Err(ColorError::PatternParse(s.to_string())),
            };
            n += 1;
        }
        if n != PATTERN_LEN {
            return Err(ColorError::PatternParse(s.to_string()));
        }
        Ok(Pattern(spins))
    }
}

impl Serialize for Pattern {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_bitstring())
    }
}

impl<'de> Deserialize<'de> for Pattern {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Quantizes a segment's mean color and packs it into a pattern.
pub fn encode_pattern(mean_h: f64, mean_s: f64, mean_i: f64) -> Pattern {
    Pattern::from_bins([quantize6(mean_h), quantize6(mean_s), quantize6(mean_i)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn black_pixel() {
        assert_eq!(rgb_to_hsi(0, 0, 0), HsiPixel::new(0.0, 0.0, 0.0));
    }

    #[test]
    fn gray_pixel() {
        let p = rgb_to_hsi(128, 128, 128);
        assert_eq!(p.s, 0.0);
        assert_eq!(p.h, 0.0);
        assert!((p.i - 128.0 / 255.0).abs() < 1e-12);
    }

    #[test]
    fn pure_red() {
        // num = ((1-0) + (1-0))/2 = 1, den = sqrt(1 + 0) = 1 -> theta = 0.
        let p = rgb_to_hsi(255, 0, 0);
        assert!(p.h.abs() < 1e-12);
        assert!((p.s - 1.0).abs() < 1e-12);
        assert!((p.i - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn primaries_land_on_thirds() {
        let g = rgb_to_hsi(0, 255, 0);
        let b = rgb_to_hsi(0, 0, 255);
        assert!((g.h - 1.0 / 3.0).abs() < 1e-9);
        assert!((b.h - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn quantize_endpoints_and_midpoint() {
        assert_eq!(quantize6(0.0), 0);
        assert_eq!(quantize6(1.0), 63);
        // 0.5 * 63 = 31.5 rounds away from zero.
        assert_eq!(quantize6(0.5), 32);
        assert_eq!(quantize6(-3.0), 0);
        assert_eq!(quantize6(7.0), 63);
        assert_eq!(quantize6(f64::NAN), 0);
    }

    #[test]
    fn quantize_is_monotone_on_dense_grid() {
        let mut prev = 0u8;
        for k in 0..=100_000 {
            let q = quantize6(k as f64 / 100_000.0);
            assert!(q >= prev);
            prev = q;
        }
    }

    #[test]
    fn encode_extremes() {
        assert!(encode_pattern(0.0, 0.0, 0.0)
            .spins()
            .iter()
            .all(|&s| s == -1));
        assert!(encode_pattern(1.0, 1.0, 1.0)
            .spins()
            .iter()
            .all(|&s| s == 1));
    }

    #[test]
    fn encode_mixed() {
        let p = encode_pattern(0.5, 0.0, 1.0);
        assert_eq!(p.to_bitstring(), "100000000000111111");
        let expected: [i8; 18] = [
            1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, -1, 1, 1, 1, 1, 1, 1,
        ];
        assert_eq!(p.spins(), &expected);
        assert_eq!(p.bins(), [32, 0, 63]);
    }

    #[test]
    fn bitstring_parse_errors() {
        assert!("10101".parse::<Pattern>().is_err());
        assert!("1010101010101010102".parse::<Pattern>().is_err());
        assert!("10101010101010101x".parse::<Pattern>().is_err());
        assert!(Pattern::from_spins([0; 18]).is_none());
    }

    #[test]
    fn empty_image_rejected() {
        assert!(matches!(
            HsiImage::new(0, 3, vec![]),
            Err(ColorError::EmptyImage { .. })
        ));
    }

    proptest! {
        #[test]
        fn gray_has_zero_saturation(v in any::<u8>()) {
            prop_assert_eq!(rgb_to_hsi(v, v, v).s, 0.0);
        }

        #[test]
        fn hsi_in_unit_cube(r in any::<u8>(), g in any::<u8>(), b in any::<u8>()) {
            let p = rgb_to_hsi(r, g, b);
            for c in p.as_vector() {
                prop_assert!(c.is_finite() && (0.0..=1.0).contains(&c));
            }
        }

        #[test]
        fn pattern_round_trips_bins(h in 0u8..64, s in 0u8..64, i in 0u8..64) {
            let p = Pattern::from_bins([h, s, i]);
            prop_assert_eq!(p.bins(), [h, s, i]);
            prop_assert_eq!(p.to_bitstring().parse::<Pattern>().unwrap(), p);
        }

        #[test]
        fn encode_is_injective_on_bins(a in (0u8..64, 0u8..64, 0u8..64), b in (0u8..64, 0u8..64, 0u8..64)) {
            let pa = Pattern::from_bins([a.0, a.1, a.2]);
            let pb = Pattern::from_bins([b.0, b.1, b.2]);
            prop_assert_eq!(a == b, pa == pb);
        }
    }
}
