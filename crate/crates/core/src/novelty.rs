//! Hopfield familiarity discrimination over 18-spin color patterns.
//!
//! Weights follow the Hebbian rule `w[i][j] = (1/N) sum_p x_p[i] x_p[j]` with a
//! zero diagonal, and the familiarity energy is `E(x) = -1/2 x^T W x`. A stored
//! pattern sits at `-(N-1)/2 = -8.5`, an unrelated one near zero, and
//! anything at or above `-N/4 = -4.5` counts as novel.

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::colorspace::{Pattern, PATTERN_LEN};
use crate::segmentation::SegmentLabelMap;

/// Neuron count.
pub const N: usize = PATTERN_LEN;
/// Energies strictly below this are familiar.
pub const FAMILIARITY_THRESHOLD: f64 = -(N as f64) / 4.0;
/// Version tag written into memory snapshots.
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum NoveltyError {
    #[error("no verdict for segment {0}")]
    MissingVerdict(u32),
    #[error("no display color for segment {0}")]
    MissingColor(u32),
    #[error("unsupported memory snapshot version {0}")]
    SnapshotVersion(u32),
    #[error("memory snapshot is malformed: {0}")]
    SnapshotShape(String),
}

/// Session-long color memory.
#[derive(Debug, Clone, PartialEq)]
pub struct HopfieldMemory {
    weights: [[f64; N]; N],
    stored_count: usize,
    stored_patterns: Option<Vec<Pattern>>,
}

impl Default for HopfieldMemory {
    fn default() -> Self {
        HopfieldMemory::new(true)
    }
}

impl HopfieldMemory {
    /// Empty memory. With `retain_patterns` off only the weights are kept.
    pub fn new(retain_patterns: bool) -> Self {
        HopfieldMemory {
            weights: [[0.0; N]; N],
            stored_count: 0,
            stored_patterns: retain_patterns.then(Vec::new),
        }
    }

    pub fn n(&self) -> usize {
        N
    }

    pub fn weights(&self) -> &[[f64; N]; N] {
        &self.weights
    }

    pub fn stored_count(&self) -> usize {
        self.stored_count
    }

    pub fn stored_patterns(&self) -> Option<&[Pattern]> {
        self.stored_patterns.as_deref()
    }

    pub fn retains_patterns(&self) -> bool {
        self.stored_patterns.is_some()
    }

    /// Familiarity energy `-1/2 sum_{i != j} w[i][j] x[i] x[j]`.
    pub fn energy(&self, x: &Pattern) -> f64 {
        let s = x.spins();
        let mut acc = 0.0;
        for i in 0..N {
            let row = &self.weights[i];
            let mut r = 0.0;
            for j in 0..N {
                r += row[j] * s[j] as f64;
            }
            acc += r * s[i] as f64;
        }
        -0.5 * acc
    }

    pub fn is_familiar(&self, x: &Pattern) -> bool {
        self.energy(x) < FAMILIARITY_THRESHOLD
    }

    /// Hebbian update `w[i][j] += x[i] x[j] / N` for `i != j`.
    pub fn store(&mut self, x: &Pattern) {
        let s = x.spins();
        let inv_n = 1.0 / N as f64;
        for i in 0..N {
            for j in 0..N {
                if i != j {
                    self.weights[i][j] += (s[i] * s[j]) as f64 * inv_n;
                }
            }
        }
        self.stored_count += 1;
        if let Some(p) = self.stored_patterns.as_mut() {
            p.push(*x);
        }
    }

    /// Classifies `x` and stores it if novel.
    pub fn classify_and_store(&mut self, segment_id: u32, x: Pattern) -> NoveltyVerdict {
        let energy = self.energy(&x);
        let familiar = energy < FAMILIARITY_THRESHOLD;
        let novel = !familiar;
        if novel {
            self.store(&x);
        }
        NoveltyVerdict {
            segment_id,
            pattern: x,
            energy,
            novel,
            stored: novel,
        }
    }

    /// Zeroes the weights and forgets every stored pattern.
    pub fn reset(&mut self) {
        self.weights = [[0.0; N]; N];
        self.stored_count = 0;
        if let Some(p) = self.stored_patterns.as_mut() {
            p.clear();
        }
    }

    pub fn snapshot(&self) -> MemorySnapshot {
        MemorySnapshot {
            format_version: SNAPSHOT_VERSION,
            n: N,
            stored_count: self.stored_count,
            weights: self.weights.iter().flatten().copied().collect(),
            patterns: self.stored_patterns.clone(),
        }
    }

    pub fn from_snapshot(snap: &MemorySnapshot) -> Result<Self, NoveltyError> {
        if snap.format_version != SNAPSHOT_VERSION {
            return Err(NoveltyError::SnapshotVersion(snap.format_version));
        }
        if snap.n != N || snap.weights.len() != N * N {
            return Err(NoveltyError::SnapshotShape(format!(
                "n = {}, {} weights",
                snap.n,
                snap.weights.len()
            )));
        }
        if let Some(p) = &snap.patterns {
            if p.len() != snap.stored_count {
                return Err(NoveltyError::SnapshotShape(format!(
                    "{} patterns for stored_count {}",
                    p.len(),
                    snap.stored_count
                )));
            }
        }
        let mut weights = [[0.0; N]; N];
        for (i, row) in weights.iter_mut().enumerate() {
            row.copy_from_slice(&snap.weights[i * N..(i + 1) * N]);
        }
        Ok(HopfieldMemory {
            weights,
            stored_count: snap.stored_count,
            stored_patterns: snap.patterns.clone(),
        })
    }
}

/// Serializable memory state: weights row-major at full precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemorySnapshot {
    pub format_version: u32,
    pub n: usize,
    pub stored_count: usize,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patterns: Option<Vec<Pattern>>,
}

impl MemorySnapshot {
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoveltyVerdict {
    pub segment_id: u32,
    pub pattern: Pattern,
    pub energy: f64,
    pub novel: bool,
    pub stored: bool,
}

/// Free-function form of [`HopfieldMemory::energy`].
pub fn familiarity_energy(x: &Pattern, mem: &HopfieldMemory) -> f64 {
    mem.energy(x)
}

/// Free-function form of [`HopfieldMemory::classify_and_store`].
pub fn classify_and_store(segment_id: u32, x: Pattern, mem: &mut HopfieldMemory) -> NoveltyVerdict {
    mem.classify_and_store(segment_id, x)
}

pub fn reset_memory(mem: &mut HopfieldMemory) {
    mem.reset();
}

/// Familiar segments go black; novel segments keep their display color.
pub fn render_novelty_map(
    labels: &SegmentLabelMap,
    verdicts: &[NoveltyVerdict],
    seg_colors: &[[u8; 3]],
) -> Result<RgbImage, NoveltyError> {
    let mut novel: Vec<Option<bool>> = vec![None; labels.segment_count];
    for v in verdicts {
        if let Some(slot) = novel.get_mut(v.segment_id as usize) {
            *slot = Some(v.novel);
        }
    }
    for (k, slot) in novel.iter().enumerate() {
        if slot.is_none() {
            return Err(NoveltyError::MissingVerdict(k as u32));
        }
        if k >= seg_colors.len() {
            return Err(NoveltyError::MissingColor(k as u32));
        }
    }
    let mut img = RgbImage::new(labels.width as u32, labels.height as u32);
    for (px, &l) in img.pixels_mut().zip(&labels.labels) {
        *px = if novel[l as usize] == Some(true) {
            Rgb(seg_colors[l as usize])
        } else {
            Rgb([0, 0, 0])
        };
    }
    Ok(img)
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Closed-form energy over the stored pattern list.
    fn oracle_energy(x: &Pattern, stored: &[Pattern]) -> f64 {
        let n = N as f64;
        -stored
            .iter()
            .map(|p| {
                let o = x.overlap(p) as f64;
                (o * o - n) / (2.0 * n)
            })
            .sum::<f64>()
    }

    fn pat(bins: [u8; 3]) -> Pattern {
        Pattern::from_bins(bins)
    }

    fn flip(p: &Pattern, k: usize) -> Pattern {
        let mut s = *p.spins();
        s[k] = -s[k];
        Pattern::from_spins(s).unwrap()
    }

    #[test]
    fn empty_memory_energy_is_zero() {
        let m = HopfieldMemory::default();
        assert_eq!(m.energy(&pat([12, 40, 3])), 0.0);
    }

    #[test]
    fn self_energy_after_single_store() {
        let x = pat([21, 7, 50]);
        let mut m = HopfieldMemory::default();
        m.store(&x);
        assert!((m.energy(&x) + 8.5).abs() < 1e-12);
        assert!((oracle_energy(&x, &[x]) + 8.5).abs() < 1e-12);
        assert!((m.energy(&x.complement()) + 8.5).abs() < 1e-12);
    }

    #[test]
    fn threshold_sequence() {
        let x = pat([33, 12, 45]);
        let mut m = HopfieldMemory::default();
        let v = m.classify_and_store(0, x);
        assert!(v.novel && v.stored && v.energy == 0.0);
        assert_eq!(m.stored_count(), 1);

        let v = m.classify_and_store(0, x);
        assert!(!v.novel && !v.stored);
        assert!((v.energy + 8.5).abs() < 1e-12);
        assert_eq!(m.stored_count(), 1);

        let y = flip(&x, 4);
        assert_eq!(x.overlap(&y), 16);
        let v = m.classify_and_store(1, y);
        assert!((v.energy + 238.0 / 36.0).abs() < 1e-12);
        assert!(!v.novel);
    }

    #[test]
    fn familiarity_decays_under_orthogonal_stores() {
        // Each store with zero overlap raises E(p) by 0.5, so nine of them
        // push a once-familiar pattern above the threshold.
        let p = Pattern::from_spins([1; PATTERN_LEN]).unwrap();
        let mut m = HopfieldMemory::default();
        m.store(&p);
        let mut spins = [1i8; PATTERN_LEN];
        for k in 0..9 {
            for (i, s) in spins.iter_mut().enumerate() {
                *s = if (i + k) % 2 == 0 { 1 } else { -1 };
            }
            let q = Pattern::from_spins(spins).unwrap();
            assert_eq!(q.overlap(&p), 0);
            m.store(&q);
        }
        assert!((m.energy(&p) + 4.0).abs() < 1e-12);
        assert!(!m.is_familiar(&p));
    }

    #[test]
    fn energy_at_threshold_is_novel() {
        let mut m = HopfieldMemory::default();
        m.weights[0][1] = 4.5;
        m.weights[1][0] = 4.5;
        let x = pat([0, 0, 0]);
        assert_eq!(m.energy(&x), FAMILIARITY_THRESHOLD);
        assert!(m.classify_and_store(0, x).novel);
    }

    #[test]
    fn reset_is_idempotent() {
        let mut m = HopfieldMemory::default();
        for k in 0..5u8 {
            m.store(&pat([k * 9, 63 - k, k]));
        }
        m.reset();
        let once = m.clone();
        m.reset();
        assert_eq!(m, once);
        assert_eq!(m.stored_count(), 0);
        assert!(m.weights().iter().flatten().all(|&w| w == 0.0));
        assert_eq!(m.energy(&pat([9, 9, 9])), 0.0);
    }

    #[test]
    fn snapshot_round_trip() {
        let mut m = HopfieldMemory::default();
        m.store(&pat([1, 2, 3]));
        m.store(&pat([60, 30, 10]));
        let json = serde_json::to_string(&m.snapshot()).unwrap();
        let back: MemorySnapshot = serde_json::from_str(&json).unwrap();
        assert_eq!(HopfieldMemory::from_snapshot(&back).unwrap(), m);

        let mut bad = back.clone();
        bad.weights.pop();
        assert!(HopfieldMemory::from_snapshot(&bad).is_err());
        bad = back;
        bad.format_version = 99;
        assert_eq!(
            HopfieldMemory::from_snapshot(&bad),
            Err(NoveltyError::SnapshotVersion(99))
        );
    }

    #[test]
    fn without_retention_only_weights_kept() {
        let mut m = HopfieldMemory::new(false);
        m.store(&pat([1, 1, 1]));
        assert!(m.stored_patterns().is_none());
        assert_eq!(m.stored_count(), 1);
        assert!(m.snapshot().patterns.is_none());
    }

    fn two_segment_labels() -> SegmentLabelMap {
        SegmentLabelMap {
            width: 4,
            height: 2,
            labels: vec![0, 0, 1, 1, 0, 0, 1, 1],
            segment_count: 2,
            null_segment: None,
        }
    }

    fn verdict(id: u32, novel: bool) -> NoveltyVerdict {
        NoveltyVerdict {
            segment_id: id,
            pattern: pat([0, 0, 0]),
            energy: 0.0,
            novel,
            stored: novel,
        }
    }

    #[test]
    fn novelty_map_rendering() {
        let labels = two_segment_labels();
        let colors = [[200, 10, 10], [10, 200, 10]];

        let all_fam =
            render_novelty_map(&labels, &[verdict(0, false), verdict(1, false)], &colors).unwrap();
        assert!(all_fam.pixels().all(|p| p.0 == [0, 0, 0]));

        let all_novel =
            render_novelty_map(&labels, &[verdict(0, true), verdict(1, true)], &colors).unwrap();
        for (p, &l) in all_novel.pixels().zip(&labels.labels) {
            assert_eq!(p.0, colors[l as usize]);
        }

        let one =
            render_novelty_map(&labels, &[verdict(0, false), verdict(1, true)], &colors).unwrap();
        for (p, &l) in one.pixels().zip(&labels.labels) {
            let want = if l == 1 { colors[1] } else { [0, 0, 0] };
            assert_eq!(p.0, want);
        }

        assert_eq!(
            render_novelty_map(&labels, &[verdict(0, true)], &colors),
            Err(NoveltyError::MissingVerdict(1))
        );
    }

    fn arb_pattern() -> impl Strategy<Value = Pattern> {
        prop::array::uniform18(prop::bool::ANY)
            .prop_map(|b| Pattern::from_spins(b.map(|v| if v { 1 } else { -1 })).unwrap())
    }

    proptest! {
        #[test]
        fn matches_closed_form(stored in prop::collection::vec(arb_pattern(), 0..50), q in arb_pattern()) {
            let mut m = HopfieldMemory::default();
            for p in &stored {
                m.store(p);
            }
            prop_assert!((m.energy(&q) - oracle_energy(&q, &stored)).abs() < 1e-9);
            prop_assert!((m.energy(&q) - m.energy(&q.complement())).abs() < 1e-9);
            let w = m.weights();
            for i in 0..N {
                prop_assert_eq!(w[i][i], 0.0);
                for j in 0..N {
                    prop_assert_eq!(w[i][j], w[j][i]);
                    prop_assert!(w[i][j].abs() <= stored.len() as f64 / N as f64 + 1e-12);
                }
            }
        }

        #[test]
        fn store_delta(stored in prop::collection::vec(arb_pattern(), 0..20), p in arb_pattern(), q in arb_pattern()) {
            let mut m = HopfieldMemory::default();
            for s in &stored {
                m.store(s);
            }
            let (ep, eq) = (m.energy(&p), m.energy(&q));
            m.store(&p);
            prop_assert!((m.energy(&p) - ep + 8.5).abs() < 1e-9);
            let o = p.overlap(&q) as f64;
            let delta = m.energy(&q) - eq;
            prop_assert!((delta + (o * o - 18.0) / 36.0).abs() < 1e-9);
            prop_assert!((-8.5 - 1e-9..=0.5 + 1e-9).contains(&delta));
        }
    }
}
