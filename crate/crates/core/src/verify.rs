//! Acceptance property suite, shared by the `acceptance` test target and the
//! `verify` CLI command.
//!
//! Every check here compares the library against a reference computed in
//! [`oracle`], which never calls into the code under test: Hopfield energies
//! come from the closed-form overlap sum, weights from an explicit Hebbian
//! sum over the stored list, and segment means from a direct recount.

use std::time::{Duration, Instant};

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::colorspace::{quantize6, HsiImage, HsiPixel, Pattern, PATTERN_LEN};
use crate::corpus::{
    hsi_to_rgb, natural_scene, region_scene, uniform_terrain_sequence, Region, TerrainParams,
};
use crate::io::{write_outputs, SessionDir, Sidecar};
use crate::novelty::{HopfieldMemory, FAMILIARITY_THRESHOLD};
use crate::pipeline::{Mode, Session, SessionConfig};
use crate::saliency::{gaussian_blur, top_interest_points, uncommon_map, ScalarMap};
use crate::segmentation::{
    segment_color, segment_gray, GrayRaster, GraySegmentParams, SegmentLabelMap,
};

/// Tolerance for energy and weight comparisons.
pub const ENERGY_TOL: f64 = 1e-9;
/// Tolerance for blur mass conservation.
pub const MASS_TOL: f64 = 1e-6;
/// Tolerance for recomputed segment means.
pub const MEAN_TOL: f64 = 1e-9;

pub const ORACLE_TRIALS: usize = 1_000;
pub const ORACLE_MAX_STORES: usize = 50;
pub const ORACLE_BUDGET: Duration = Duration::from_secs(5);
pub const FAST_LEARNING_BUDGET: Duration = Duration::from_secs(1);
pub const TERRAIN_SEEDS: u64 = 100;
pub const TERRAIN_IMAGES: usize = 10;
pub const TERRAIN_MAX_INDEX: usize = 6;
pub const TERRAIN_MIN_SUCCESS: f64 = 0.95;
pub const TERRAIN_MAX_BIN_SPAN: u8 = 3;
pub const RANDOM_SEGMENTATION_IMAGES: usize = 200;
pub const RANDOM_PARTITIONS: usize = 100;
pub const GRAY_PEAK_CAP: usize = 8;
pub const REPLAY_IMAGES: usize = 20;
pub const REALTIME_BUDGET: Duration = Duration::from_secs(1);

/// Reference computations kept apart from the implementation.
pub mod oracle {
    use crate::colorspace::{HsiImage, Pattern, PATTERN_LEN};
    use crate::segmentation::SegmentLabelMap;

    /// `-sum_p ((x . x_p)^2 - N) / (2N)`.
    pub fn closed_form_energy(x: &Pattern, stored: &[Pattern]) -> f64 {
        let n = PATTERN_LEN as f64;
        let xs = x.spins();
        let mut e = 0.0;
        for p in stored {
            let o: i32 = xs
                .iter()
                .zip(p.spins())
                .map(|(&a, &b)| a as i32 * b as i32)
                .sum();
            let o = o as f64;
            e -= (o * o - n) / (2.0 * n);
        }
        e
    }

    /// Hebbian weights `sum_p x_p[i] x_p[j] / N`, zero diagonal, from integer
    /// co-activation counts.
    pub fn hebbian_weights(stored: &[Pattern]) -> Vec<f64> {
        let n = PATTERN_LEN;
        let mut counts = vec![0i64; n * n];
        for p in stored {
            let s = p.spins();
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        counts[i * n + j] += (s[i] * s[j]) as i64;
                    }
                }
            }
        }
        counts.iter().map(|&c| c as f64 / n as f64).collect()
    }

    /// Per-segment mean `(h, s, i)` by direct recount.
    pub fn segment_means(img: &HsiImage, map: &SegmentLabelMap) -> Vec<[f64; 3]> {
        let mut out = Vec::with_capacity(map.segment_count);
        for k in 0..map.segment_count as u32 {
            let members: Vec<_> = img
                .pixels()
                .iter()
                .zip(&map.labels)
                .filter(|(_, &l)| l == k)
                .map(|(p, _)| *p)
                .collect();
            let n = members.len() as f64;
            out.push([
                members.iter().map(|p| p.h).sum::<f64>() / n,
                members.iter().map(|p| p.s).sum::<f64>() / n,
                members.iter().map(|p| p.i).sum::<f64>() / n,
            ]);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct CriterionOutcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl std::fmt::Display for CriterionOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] criterion {}: {} ({:.0} ms) - {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed.as_secs_f64() * 1e3,
            self.detail
        )
    }
}

type Check = fn() -> Result<String, String>;

pub const CRITERIA: [(u8, &str, Check); 9] = [
    (
        1,
        "Hopfield oracle equivalence",
        criterion_oracle_equivalence,
    ),
    (2, "threshold semantics", criterion_threshold_semantics),
    (3, "fast learning", criterion_fast_learning),
    (4, "familiarization bound", criterion_familiarization),
    (5, "segmentation properties", criterion_segmentation),
    (6, "saliency", criterion_saliency),
    (
        7,
        "gray co-occurrence segmentation",
        criterion_gray_segmentation,
    ),
    (8, "pipeline replay determinism", criterion_replay),
    (9, "real-time budget", criterion_realtime),
];

pub fn run_criterion(id: u8) -> Option<CriterionOutcome> {
    CRITERIA
        .iter()
        .find(|c| c.0 == id)
        .map(|&(id, name, check)| {
            let t = Instant::now();
            let r = check();
            let elapsed = t.elapsed();
            let (passed, detail) = match r {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CriterionOutcome {
                id,
                name,
                passed,
                detail,
                elapsed,
            }
        })
}

pub fn run_all() -> Vec<CriterionOutcome> {
    CRITERIA.iter().filter_map(|c| run_criterion(c.0)).collect()
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn random_pattern(rng: &mut impl Rng) -> Pattern {
    let mut s = [0i8; PATTERN_LEN];
    for v in s.iter_mut() {
        *v = if rng.random::<bool>() { 1 } else { -1 };
    }
    Pattern::from_spins(s).expect("spins are +-1")
}

pub fn criterion_oracle_equivalence() -> Result<String, String> {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0f1e);
    let mut worst = 0.0f64;
    let mut queries = 0usize;
    for _ in 0..ORACLE_TRIALS {
        let stores = rng.random_range(1..=ORACLE_MAX_STORES);
        let mut mem = HopfieldMemory::default();
        let mut stored = Vec::with_capacity(stores);
        for _ in 0..stores {
            let p = random_pattern(&mut rng);
            mem.store(&p);
            stored.push(p);
            for _ in 0..2 {
                let q = if rng.random::<bool>() {
                    random_pattern(&mut rng)
                } else {
                    stored[rng.random_range(0..stored.len())]
                };
                let d = (mem.energy(&q) - oracle::closed_form_energy(&q, &stored)).abs();
                worst = worst.max(d);
                queries += 1;
            }
        }
    }
    let elapsed = t.elapsed();
    ensure!(
        worst <= ENERGY_TOL,
        "max |E - E_oracle| = {worst:e} > {ENERGY_TOL:e}"
    );
    ensure!(
        elapsed < ORACLE_BUDGET,
        "took {elapsed:?}, budget {ORACLE_BUDGET:?}"
    );
    Ok(format!(
        "{ORACLE_TRIALS} sequences, {queries} queries, max deviation {worst:e}"
    ))
}

pub fn criterion_threshold_semantics() -> Result<String, String> {
    let x = Pattern::from_bins([37, 18, 44]);
    let mut mem = HopfieldMemory::default();

    let v = mem.classify_and_store(0, x);
    ensure!(
        v.energy.abs() <= ENERGY_TOL && v.novel,
        "empty memory: {v:?}"
    );

    let v = mem.classify_and_store(0, x);
    ensure!(
        (v.energy + 8.5).abs() <= ENERGY_TOL && !v.novel,
        "self-query: {v:?}"
    );
    ensure!(
        (oracle::closed_form_energy(&x, &[x]) + 8.5).abs() <= ENERGY_TOL,
        "oracle self-energy"
    );

    let mut spins = *x.spins();
    spins[7] = -spins[7];
    let y = Pattern::from_spins(spins).expect("valid");
    let expected = -((16.0f64 * 16.0) - 18.0) / 36.0;
    let v = mem.classify_and_store(1, y);
    ensure!(
        (v.energy - expected).abs() <= ENERGY_TOL && !v.novel,
        "hamming-1 neighbor: {v:?}, expected {expected}"
    );
    ensure!(
        (oracle::closed_form_energy(&y, &[x]) - expected).abs() <= ENERGY_TOL,
        "oracle neighbor energy"
    );
    ensure!(
        FAMILIARITY_THRESHOLD == -4.5,
        "threshold {FAMILIARITY_THRESHOLD}"
    );
    Ok(format!(
        "E = 0 novel, -8.5 familiar, {expected:.4} familiar"
    ))
}

/// Fixed colors for the fast-learning scene: three repeated regions and
/// one that only appears in the second image.
const FAST_COLORS: [HsiPixel; 4] = [
    HsiPixel {
        h: 0.06,
        s: 0.35,
        i: 0.45,
    },
    HsiPixel {
        h: 0.33,
        s: 0.55,
        i: 0.35,
    },
    HsiPixel {
        h: 0.62,
        s: 0.25,
        i: 0.62,
    },
    HsiPixel {
        h: 0.88,
        s: 0.75,
        i: 0.30,
    },
];

fn fast_learning_images() -> (RgbImage, RgbImage) {
    let (w, h) = (96u32, 64u32);
    let a = Region {
        x0: 0,
        y0: 0,
        x1: 48,
        y1: 64,
        color: FAST_COLORS[0],
    };
    let b = Region {
        x0: 48,
        y0: 0,
        x1: 96,
        y1: 32,
        color: FAST_COLORS[1],
    };
    let c = Region {
        x0: 48,
        y0: 32,
        x1: 96,
        y1: 64,
        color: FAST_COLORS[2],
    };
    let d = Region {
        x0: 12,
        y0: 20,
        x1: 30,
        y1: 44,
        color: FAST_COLORS[3],
    };
    let first = region_scene(w, h, FAST_COLORS[0], &[a, b, c], 0.0, 1);
    let second = region_scene(w, h, FAST_COLORS[0], &[a, b, c, d], 0.0, 2);
    (first, second)
}

/// Which of `colors` the pixel at `k` was painted with.
fn source_region(img: &RgbImage, k: usize, colors: &[HsiPixel]) -> Option<usize> {
    let (w, _) = img.dimensions();
    let px = img.get_pixel(k as u32 % w, k as u32 / w).0;
    colors.iter().position(|&c| hsi_to_rgb(c) == px)
}

pub fn criterion_fast_learning() -> Result<String, String> {
    let t = Instant::now();
    let (first, second) = fast_learning_images();
    let mut session =
        Session::new("fast-learning", SessionConfig::default()).map_err(|e| e.to_string())?;
    let r1 = session
        .process_image(&first)
        .map_err(|e| e.to_string())?
        .clone();
    ensure!(
        r1.verdicts.iter().all(|v| v.novel),
        "image 1 should be all novel"
    );
    let mut stored: Vec<Pattern> = r1.verdicts.iter().map(|v| v.pattern).collect();

    let r2 = session
        .process_image(&second)
        .map_err(|e| e.to_string())?
        .clone();
    let elapsed = t.elapsed();

    // Map each segment of image 2 to the region that painted its pixels.
    let mut errors = 0;
    let mut new_region_segments = 0;
    for v in &r2.verdicts {
        let members: Vec<usize> = r2
            .label_map
            .labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == v.segment_id)
            .map(|(k, _)| k)
            .collect();
        let regions: std::collections::BTreeSet<_> = members
            .iter()
            .map(|&k| source_region(&second, k, &FAST_COLORS))
            .collect();
        ensure!(
            regions.len() == 1 && regions.iter().next().unwrap().is_some(),
            "segment {} spans regions {regions:?}",
            v.segment_id
        );
        let is_new = regions.contains(&Some(3));
        let oracle_e = oracle::closed_form_energy(&v.pattern, &stored);
        ensure!(
            (oracle_e - v.energy).abs() <= ENERGY_TOL,
            "segment {}: energy {} vs oracle {oracle_e}",
            v.segment_id,
            v.energy
        );
        if v.stored {
            stored.push(v.pattern);
        }
        if is_new {
            new_region_segments += 1;
        }
        if v.novel != is_new {
            errors += 1;
        }
    }
    ensure!(new_region_segments >= 1, "new region produced no segment");
    ensure!(errors == 0, "{errors} misclassified segments in image 2");
    ensure!(elapsed < FAST_LEARNING_BUDGET, "took {elapsed:?}");
    Ok(format!(
        "{} segments in image 2, {} novel, 0 misclassified",
        r2.verdicts.len(),
        r2.novel_count()
    ))
}

fn presentation_bound(e1: f64) -> usize {
    ((e1 - FAMILIARITY_THRESHOLD) / 8.5).ceil().max(0.0) as usize + 1
}

pub fn criterion_familiarization() -> Result<String, String> {
    let params = TerrainParams {
        images: TERRAIN_IMAGES,
        ..TerrainParams::default()
    };
    let mut successes = 0;
    let mut ties = 0;
    let mut first_familiar_hist = [0usize; TERRAIN_IMAGES + 2];
    for seed in 0..TERRAIN_SEEDS {
        let (images, _) = uniform_terrain_sequence(seed, &params);
        let mut session = Session::new(format!("terrain-{seed}"), SessionConfig::default())
            .map_err(|e| e.to_string())?;
        let mut lo = [u8::MAX; 3];
        let mut hi = [0u8; 3];
        // pattern -> (first energy, presentations, novel presentations)
        let mut seen: Vec<(Pattern, f64, usize, bool)> = Vec::new();
        let mut first_familiar = None;
        for img in &images {
            let r = session.process_image(img).map_err(|e| e.to_string())?;
            for s in &r.stats {
                let b = [
                    quantize6(s.mean_h),
                    quantize6(s.mean_s),
                    quantize6(s.mean_i),
                ];
                for c in 0..3 {
                    lo[c] = lo[c].min(b[c]);
                    hi[c] = hi[c].max(b[c]);
                }
            }
            for v in &r.verdicts {
                match seen.iter_mut().find(|e| e.0 == v.pattern) {
                    Some(e) => {
                        if !e.3 {
                            e.2 += 1;
                            e.3 = !v.novel;
                        }
                    }
                    None => seen.push((v.pattern, v.energy, 1, !v.novel)),
                }
            }
            if first_familiar.is_none() && r.all_familiar() {
                first_familiar = Some(r.image_index);
            }
        }
        for c in 0..3 {
            ensure!(
                hi[c] - lo[c] < TERRAIN_MAX_BIN_SPAN,
                "seed {seed}: channel {c} spans bins {}..={}",
                lo[c],
                hi[c]
            );
        }
        for (p, e1, presentations, familiar) in &seen {
            // An exact tie with the threshold is novel under the strict
            // comparison; the ceiling bound does not cover that case.
            if (e1 - FAMILIARITY_THRESHOLD).abs() < ENERGY_TOL {
                ties += 1;
                continue;
            }
            let bound = presentation_bound(*e1);
            ensure!(
                *familiar || *presentations < bound,
                "seed {seed}: pattern {p} still novel after {presentations} presentations (bound {bound})"
            );
            ensure!(
                !*familiar || *presentations <= bound,
                "seed {seed}: pattern {p} familiar only at presentation {presentations} (bound {bound}, E1 {e1:.3})"
            );
        }
        let idx = first_familiar.unwrap_or(TERRAIN_IMAGES + 1);
        first_familiar_hist[idx] += 1;
        if idx <= TERRAIN_MAX_INDEX {
            successes += 1;
        }
    }
    let rate = successes as f64 / TERRAIN_SEEDS as f64;
    ensure!(
        rate >= TERRAIN_MIN_SUCCESS,
        "all-familiar by image {TERRAIN_MAX_INDEX} in {successes}/{TERRAIN_SEEDS} seeds"
    );
    Ok(format!(
        "{successes}/{TERRAIN_SEEDS} seeds all-familiar by image {TERRAIN_MAX_INDEX}; first-familiar histogram {:?}; {ties} threshold ties outside the bound check",
        &first_familiar_hist[1..]
    ))
}

fn random_hsi_image(rng: &mut impl Rng) -> HsiImage {
    let w = rng.random_range(1..40);
    let h = rng.random_range(1..40);
    let palette: Vec<HsiPixel> = (0..rng.random_range(1..8))
        .map(|_| {
            if rng.random_range(0..10) == 0 {
                HsiPixel::default()
            } else {
                HsiPixel::new(rng.random(), rng.random(), rng.random())
            }
        })
        .collect();
    let noisy = rng.random::<bool>();
    let pixels = (0..w * h)
        .map(|_| {
            if noisy {
                HsiPixel::new(rng.random(), rng.random(), rng.random())
            } else {
                palette[rng.random_range(0..palette.len())]
            }
        })
        .collect();
    HsiImage::new(w, h, pixels).expect("non-empty")
}

fn check_partition(map: &SegmentLabelMap) -> Result<(), String> {
    ensure!(map.labels.len() == map.width * map.height, "label count");
    ensure!(
        map.labels.iter().all(|&l| (l as usize) < map.segment_count),
        "label out of range"
    );
    let mut sizes = vec![0usize; map.segment_count];
    for &l in &map.labels {
        sizes[l as usize] += 1;
    }
    ensure!(sizes.iter().all(|&n| n > 0), "empty segment in {sizes:?}");
    Ok(())
}

pub fn criterion_segmentation() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e6);
    let mut total_segments = 0;
    for trial in 0..RANDOM_SEGMENTATION_IMAGES {
        let img = random_hsi_image(&mut rng);
        let theta = rng.random_range(1.0..20.0);
        let (map, stats) = segment_color(&img, theta).map_err(|e| e.to_string())?;
        check_partition(&map).map_err(|e| format!("image {trial}: {e}"))?;
        total_segments += map.segment_count;

        let means = oracle::segment_means(&img, &map);
        for (s, m) in stats.iter().zip(&means) {
            ensure!(
                (s.mean_h - m[0]).abs() <= MEAN_TOL
                    && (s.mean_s - m[1]).abs() <= MEAN_TOL
                    && (s.mean_i - m[2]).abs() <= MEAN_TOL,
                "image {trial}: segment {} means differ from recount",
                s.segment_id
            );
        }

        let (again, _) = segment_color(&img, theta).map_err(|e| e.to_string())?;
        ensure!(again == map, "image {trial}: non-deterministic labels");

        let halved = img.map_pixels(|p| HsiPixel::new(p.h * 0.5, p.s * 0.5, p.i * 0.5));
        let (scaled, _) = segment_color(&halved, theta).map_err(|e| e.to_string())?;
        ensure!(
            scaled.labels == map.labels,
            "image {trial}: labels change under x0.5 scaling"
        );
    }

    // Three colors well apart in spectral angle, plus black specks.
    let colors = [[200u8, 40, 40], [40, 170, 60], [60, 70, 210]];
    let img = RgbImage::from_fn(60, 40, |x, y| {
        if (x * 7 + y * 3) % 53 == 0 {
            Rgb([0, 0, 0])
        } else {
            Rgb(colors[(x / 20) as usize])
        }
    });
    let hsi = HsiImage::from_rgb(&img).map_err(|e| e.to_string())?;
    let (map, _) = segment_color(&hsi, 5.0).map_err(|e| e.to_string())?;
    ensure!(
        map.non_null_count() == 3 && map.null_segment.is_some(),
        "3-color image gave {} non-null segments (null {:?})",
        map.non_null_count(),
        map.null_segment
    );
    Ok(format!(
        "{RANDOM_SEGMENTATION_IMAGES} random images ({total_segments} segments) valid, deterministic, scale-invariant; 3-color image -> 3 segments"
    ))
}

fn euclid(a: (usize, usize), b: (usize, usize)) -> f64 {
    ((a.0 as f64 - b.0 as f64).powi(2) + (a.1 as f64 - b.1 as f64).powi(2)).sqrt()
}

pub fn criterion_saliency() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5a1);

    // Uncommonness is strictly anti-monotone in segment size.
    for trial in 0..RANDOM_PARTITIONS {
        let k = rng.random_range(2..10);
        let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(1..200)).collect();
        let mut labels: Vec<u32> = sizes
            .iter()
            .enumerate()
            .flat_map(|(id, &n)| std::iter::repeat_n(id as u32, n))
            .collect();
        // Shuffle pixel order; the score depends only on counts.
        for i in (1..labels.len()).rev() {
            labels.swap(i, rng.random_range(0..=i));
        }
        let total = labels.len();
        let map = SegmentLabelMap {
            width: total,
            height: 1,
            labels,
            segment_count: k,
            null_segment: None,
        };
        let u = uncommon_map(&map);
        let mut score = vec![f64::NAN; k];
        for (px, &l) in map.labels.iter().enumerate() {
            score[l as usize] = u.values[px];
        }
        for a in 0..k {
            for b in 0..k {
                if sizes[a] < sizes[b] {
                    ensure!(
                        score[a] > score[b],
                        "partition {trial}: sizes {sizes:?} scores {score:?}"
                    );
                }
            }
        }
    }

    // Mass conservation for interior impulses.
    let mut worst_mass = 0.0f64;
    for _ in 0..20 {
        let sigma: f64 = rng.random_range(0.5..4.0);
        let r = (3.0 * sigma).ceil() as usize;
        let (w, h) = (4 * r + 20, 4 * r + 16);
        let x = rng.random_range(2 * r..w - 2 * r);
        let y = rng.random_range(2 * r..h - 2 * r);
        let mut m = ScalarMap::filled(w, h, 0.0);
        m.values[y * w + x] = 1.0;
        let out = gaussian_blur(&m, sigma).map_err(|e| e.to_string())?;
        worst_mass = worst_mass.max((out.sum() - 1.0).abs());
        let top = top_interest_points(&out, 1, 1.0);
        ensure!((top[0].x, top[0].y) == (x, y), "impulse peak moved");
    }
    ensure!(worst_mass <= MASS_TOL, "blur mass error {worst_mass:e}");

    // Three separated points on natural-style scenes.
    let cfg = SessionConfig {
        mode: Mode::Interest,
        ..SessionConfig::default()
    };
    for seed in 0..5 {
        let img = natural_scene(seed, 320, 240);
        let mut s = Session::new("saliency", cfg.clone()).map_err(|e| e.to_string())?;
        let r = s.process_image(&img).map_err(|e| e.to_string())?;
        let i = r.interest.as_ref().ok_or("interest path missing")?;
        ensure!(
            i.points.len() == 3,
            "scene {seed}: {} points",
            i.points.len()
        );
        for a in 0..3 {
            for b in a + 1..3 {
                let d = euclid(
                    (i.points[a].x, i.points[a].y),
                    (i.points[b].x, i.points[b].y),
                );
                ensure!(
                    d >= i.suppression_radius,
                    "scene {seed}: points {a},{b} only {d:.1} apart"
                );
            }
        }
    }

    // 95% / 4% / 1% scene: the top point falls inside the rarest region.
    let (w, h) = (200u32, 200u32);
    let rare = Region {
        x0: 140,
        y0: 30,
        x1: 160,
        y1: 50,
        color: HsiPixel::new(0.62, 0.6, 0.55),
    };
    let mid = Region {
        x0: 30,
        y0: 110,
        x1: 70,
        y1: 150,
        color: HsiPixel::new(0.33, 0.45, 0.3),
    };
    let background = HsiPixel::new(0.08, 0.25, 0.45);
    let img = region_scene(w, h, background, &[mid, rare], 0.0, 0);
    let area = |r: &Region| ((r.x1 - r.x0) * (r.y1 - r.y0)) as f64 / (w * h) as f64;
    let (rare_frac, mid_frac) = (area(&rare), area(&mid));
    ensure!(
        (rare_frac - 0.01).abs() < 1e-12 && (mid_frac - 0.04).abs() < 1e-12,
        "region fractions {rare_frac:.4} / {mid_frac:.4}"
    );
    let mut s = Session::new("rare", cfg).map_err(|e| e.to_string())?;
    let r = s.process_image(&img).map_err(|e| e.to_string())?;
    let top = r.interest.as_ref().ok_or("interest path missing")?.points[0];
    let inside = (rare.x0 as usize..rare.x1 as usize).contains(&top.x)
        && (rare.y0 as usize..rare.y1 as usize).contains(&top.y);
    ensure!(inside, "top point {top:?} outside the 1% region");

    Ok(format!(
        "{RANDOM_PARTITIONS} partitions ordered, blur mass error {worst_mass:e}, 3 points on 5 scenes, top point ({}, {}) in rare region",
        top.x, top.y
    ))
}

pub fn criterion_gray_segmentation() -> Result<String, String> {
    let params = GraySegmentParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a7);
    let mut max_seen = 0;
    for trial in 0..300 {
        let w = rng.random_range(1..80);
        let h = rng.random_range(1..80);
        let levels = rng.random_range(1..20);
        let centers: Vec<f64> = (0..levels).map(|_| rng.random()).collect();
        let noise = rng.random_range(0.0..0.2);
        let vals = (0..w * h)
            .map(|_| {
                let c = centers[rng.random_range(0..centers.len())];
                (c + noise * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0)
            })
            .collect();
        let g = GrayRaster::new(w, h, vals).map_err(|e| e.to_string())?;
        let map = segment_gray(&g, &params).map_err(|e| e.to_string())?;
        check_partition(&map).map_err(|e| format!("trial {trial}: {e}"))?;
        ensure!(
            map.segment_count <= GRAY_PEAK_CAP,
            "trial {trial}: {} segments",
            map.segment_count
        );
        max_seen = max_seen.max(map.segment_count);
    }

    let (w, h) = (64, 48);
    let vals = (0..w * h)
        .map(|k| {
            if (k % w) < 40 {
                10.5 / 64.0
            } else {
                50.5 / 64.0
            }
        })
        .collect();
    let g = GrayRaster::new(w, h, vals).map_err(|e| e.to_string())?;
    let map = segment_gray(&g, &params).map_err(|e| e.to_string())?;
    ensure!(
        map.segment_count == 2,
        "two-level image gave {} segments",
        map.segment_count
    );
    let left = map.labels[0];
    for (k, &l) in map.labels.iter().enumerate() {
        ensure!((l == left) == ((k % w) < 40), "pixel {k} mislabeled");
    }
    Ok(format!(
        "300 random rasters, max {max_seen} segments; two-level image recovered exactly"
    ))
}

fn replay_images() -> Vec<RgbImage> {
    (0..REPLAY_IMAGES as u64)
        .map(|k| match k % 4 {
            0 | 1 => natural_scene(k / 2, 160, 120),
            2 => natural_scene(k, 160, 120),
            _ => {
                let (imgs, _) = uniform_terrain_sequence(
                    k,
                    &TerrainParams {
                        images: 1,
                        width: 160,
                        height: 120,
                        ..TerrainParams::default()
                    },
                );
                imgs.into_iter().next().expect("one image")
            }
        })
        .collect()
}

pub fn criterion_replay() -> Result<String, String> {
    let images = replay_images();
    let config = SessionConfig::default();
    let root = std::env::temp_dir().join(format!(
        "novelty-verify-{}-{:016x}",
        std::process::id(),
        rand::random::<u64>()
    ));
    let outcome = (|| {
        let mut recorded = Session::new("replay", config.clone()).map_err(|e| e.to_string())?;
        let dir = SessionDir::create(&root, &recorded.id).map_err(|e| e.to_string())?;
        let mut snapshots = Vec::new();
        for img in &images {
            let r = recorded
                .process_image(img)
                .map_err(|e| e.to_string())?
                .clone();
            write_outputs(&dir, &recorded.id, &config, &r, img).map_err(|e| e.to_string())?;
            snapshots.push(recorded.memory.snapshot());
        }

        let mut replay = Session::new("replay", config.clone()).map_err(|e| e.to_string())?;
        let mut stored: Vec<Pattern> = Vec::new();
        let mut total_stores = 0;
        for (k, img) in images.iter().enumerate() {
            let r = replay.process_image(img).map_err(|e| e.to_string())?;
            let on_disk = dir.read_sidecar(k + 1).map_err(|e| e.to_string())?;
            let fresh = Sidecar::from_result("replay", &config, r);
            let a = on_disk
                .deterministic()
                .to_json()
                .map_err(|e| e.to_string())?;
            let b = fresh.deterministic().to_json().map_err(|e| e.to_string())?;
            ensure!(a == b, "image {}: sidecar differs on replay", k + 1);

            // Memory after image k equals the oracle replay of stores 1..k.
            stored.extend(
                on_disk
                    .verdicts()
                    .iter()
                    .filter(|v| v.stored)
                    .map(|v| v.pattern),
            );
            total_stores = stored.len();
            let expected = oracle::hebbian_weights(&stored);
            let snap = &snapshots[k];
            ensure!(
                snap.stored_count == stored.len(),
                "image {}: stored_count",
                k + 1
            );
            let worst = snap
                .weights
                .iter()
                .zip(&expected)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            ensure!(
                worst <= ENERGY_TOL,
                "image {}: weights off by {worst:e}",
                k + 1
            );
            ensure!(
                snap.patterns.as_deref() == Some(&stored[..]),
                "image {}: stored pattern list differs",
                k + 1
            );
        }
        Ok(format!(
            "{REPLAY_IMAGES} sidecars identical on replay; {total_stores} stores match oracle weights"
        ))
    })();
    let _ = std::fs::remove_dir_all(&root);
    outcome
}

pub fn criterion_realtime() -> Result<String, String> {
    let img = natural_scene(42, 640, 480);
    let mut session =
        Session::new("realtime", SessionConfig::default()).map_err(|e| e.to_string())?;
    let mut worst = Duration::ZERO;
    for _ in 0..3 {
        let t = Instant::now();
        let r = session.process_image(&img).map_err(|e| e.to_string())?;
        let dt = t.elapsed();
        ensure!(
            r.interest.as_ref().is_some_and(|i| i.points.len() == 3) && !r.verdicts.is_empty(),
            "mode=both did not produce both outputs"
        );
        worst = worst.max(dt);
    }
    ensure!(
        worst < REALTIME_BUDGET,
        "slowest 640x480 image took {worst:?}"
    );
    Ok(format!(
        "slowest of 3 runs at 640x480: {:.1} ms",
        worst.as_secs_f64() * 1e3
    ))
}
