//! Visual metadata: a 4x4x4 RGB color histogram and an 8-bin edge
//! orientation histogram, plus the weighted-cosine similarity over them.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::imaging::ImageBuffer;
use crate::preprocess::{canny_stages, CannyParams};
use crate::scalar::Real;

pub const COLOR_BINS: usize = 64;
pub const EDGE_BINS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Metadata {
    pub color_hist: Vec<f64>,
    pub edge_hist: Vec<f64>,
    pub aspect_ratio: f64,
    pub width: usize,
    pub height: usize,
    pub category: Option<String>,
    pub created_at: DateTime<Utc>,
}

impl Metadata {
    /// True when both records carry the same descriptors (timestamp and
    /// category ignored).
    pub fn same_content(&self, other: &Metadata) -> bool {
        self.color_hist == other.color_hist
            && self.edge_hist == other.edge_hist
            && self.aspect_ratio == other.aspect_ratio
            && (self.width, self.height) == (other.width, other.height)
    }
}

/// Bin index of an RGB triple: `(r/64)*16 + (g/64)*4 + b/64`.
#[inline]
pub fn color_bin(r: u8, g: u8, b: u8) -> usize {
    usize::from(r / 64) * 16 + usize::from(g / 64) * 4 + usize::from(b / 64)
}

/// Fraction of pixels per color bin. Gray images count as `(v, v, v)`.
pub fn color_histogram(img: &ImageBuffer) -> Vec<f64> {
    let mut counts = [0usize; COLOR_BINS];
    for px in img.pixels() {
        let bin = match *px {
            [v] => color_bin(v, v, v),
            [r, g, b] => color_bin(r, g, b),
            _ => unreachable!("images have 1 or 3 channels"),
        };
        counts[bin] += 1;
    }
    let n = img.pixel_count() as f64;
    counts.iter().map(|&c| c as f64 / n).collect()
}

/// Gradient directions of Canny edge pixels (default thresholds), folded to
/// `[0, pi)` and split into 8 equal bins. All zero when there are no edges.
pub fn edge_orientation_histogram(img: &ImageBuffer) -> Vec<f64> {
    let stages = canny_stages(img, &CannyParams::<f64>::default()).expect("default canny parameters are valid");
    let mut counts = [0usize; EDGE_BINS];
    let mut total = 0usize;
    for (i, _) in stages.edges.edge.iter().enumerate().filter(|(_, &e)| e) {
        counts[orientation_bin(stages.gradient.direction[i])] += 1;
        total += 1;
    }
    if total == 0 {
        return vec![0.0; EDGE_BINS];
    }
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

pub fn orientation_bin<T: Real>(direction: T) -> usize {
    let pi = T::PI();
    let mut d = direction;
    if d < T::zero() {
        d += pi;
    }
    if d >= pi {
        d -= pi;
    }
    let bin = (d / pi * T::of_usize(EDGE_BINS)).floor().to_usize().unwrap_or(0);
    bin.min(EDGE_BINS - 1)
}

pub fn generate_metadata(img: &ImageBuffer) -> Metadata {
    generate_metadata_at(img, Utc::now())
}

/// As [`generate_metadata`] with a caller-chosen timestamp.
pub fn generate_metadata_at(img: &ImageBuffer, created_at: DateTime<Utc>) -> Metadata {
    Metadata {
        color_hist: color_histogram(img),
        edge_hist: edge_orientation_histogram(img),
        aspect_ratio: img.width() as f64 / img.height() as f64,
        width: img.width(),
        height: img.height(),
        category: None,
        created_at,
    }
}

/// Component-wise mean of member histograms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Centroid {
    pub color_hist: Vec<f64>,
    pub edge_hist: Vec<f64>,
    pub members: usize,
}

impl Centroid {
    /// `None` for an empty member list.
    pub fn mean_of<'a>(members: impl IntoIterator<Item = &'a Metadata>) -> Option<Centroid> {
        let mut color = vec![0.0; COLOR_BINS];
        let mut edge = vec![0.0; EDGE_BINS];
        let mut n = 0usize;
        for m in members {
            color.iter_mut().zip(&m.color_hist).for_each(|(a, b)| *a += b);
            edge.iter_mut().zip(&m.edge_hist).for_each(|(a, b)| *a += b);
            n += 1;
        }
        if n == 0 {
            return None;
        }
        let inv = n as f64;
        color.iter_mut().chain(edge.iter_mut()).for_each(|v| *v /= inv);
        Some(Centroid {
            color_hist: color,
            edge_hist: edge,
            members: n,
        })
    }
}

/// Cosine similarity. Two zero vectors score 1; one zero vector scores 0.
pub fn cosine<T: Real>(a: &[T], b: &[T]) -> T {
    let (mut dot, mut na, mut nb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    match (na == T::zero(), nb == T::zero()) {
        (true, true) => T::one(),
        (true, false) | (false, true) => T::zero(),
        _ => dot / (na.sqrt() * nb.sqrt()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityWeights {
    pub color: f64,
    pub edge: f64,
}

impl Default for SimilarityWeights {
    fn default() -> Self {
        Self { color: 0.7, edge: 0.3 }
    }
}

impl SimilarityWeights {
    /// Weighted cosine over both histograms, clamped to `[0, 1]`.
    pub fn score_histograms(&self, color_a: &[f64], edge_a: &[f64], color_b: &[f64], edge_b: &[f64]) -> f64 {
        let v = self.color * cosine(color_a, color_b) + self.edge * cosine(edge_a, edge_b);
        v.clamp(0.0, 1.0)
    }

    pub fn score(&self, a: &Metadata, b: &Metadata) -> f64 {
        self.score_histograms(&a.color_hist, &a.edge_hist, &b.color_hist, &b.edge_hist)
    }

    pub fn score_centroid(&self, m: &Metadata, c: &Centroid) -> f64 {
        self.score_histograms(&m.color_hist, &m.edge_hist, &c.color_hist, &c.edge_hist)
    }
}

/// Similarity with the default 0.7 / 0.3 weights.
pub fn similarity(a: &Metadata, b: &Metadata) -> f64 {
    SimilarityWeights::default().score(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sum(v: &[f64]) -> f64 {
        v.iter().sum()
    }

    #[test]
    fn black_image_single_bin() {
        let h = color_histogram(&ImageBuffer::filled(5, 5, 3, 0));
        assert_eq!(h[0], 1.0);
        assert_eq!(sum(&h), 1.0);
    }

    #[test]
    fn red_blue_halves() {
        let img = ImageBuffer::rgb_from_fn(4, 2, |x, _| if x < 2 { [255, 0, 0] } else { [0, 0, 255] });
        let h = color_histogram(&img);
        assert_eq!(h[color_bin(255, 0, 0)], 0.5);
        assert_eq!(h[color_bin(0, 0, 255)], 0.5);
        assert_eq!(h.iter().filter(|&&v| v > 0.0).count(), 2);
    }

    #[test]
    fn gray_is_replicated() {
        let g = ImageBuffer::gray_from_fn(3, 3, |x, y| (x * 80 + y) as u8);
        assert_eq!(color_histogram(&g), color_histogram(&g.to_rgb()));
    }

    #[test]
    fn constant_image_has_no_edge_mass() {
        assert_eq!(edge_orientation_histogram(&ImageBuffer::filled(16, 16, 1, 40)), vec![0.0; 8]);
    }

    #[test]
    fn vertical_step_lands_in_bin_zero() {
        for (a, b) in [(0, 255), (255, 0)] {
            let img = ImageBuffer::gray_from_fn(16, 16, |x, _| if x < 8 { a } else { b });
            let h = edge_orientation_histogram(&img);
            assert_eq!(h[0], 1.0, "{h:?}");
        }
    }

    #[test]
    fn orientation_folding() {
        use std::f64::consts::PI;
        assert_eq!(orientation_bin(0.0), 0);
        assert_eq!(orientation_bin(PI), 0);
        assert_eq!(orientation_bin(-PI / 2.0), 4);
        assert_eq!(orientation_bin(PI / 2.0), 4);
        assert_eq!(orientation_bin(PI - 1e-12), 7);
        assert_eq!(orientation_bin(-1e-3f32), 7);
    }

    #[test]
    fn metadata_shape_and_json_names() {
        let img = ImageBuffer::filled(100, 50, 3, 10);
        let m = generate_metadata(&img);
        assert_eq!(m.aspect_ratio, 2.0);
        assert_eq!((m.width, m.height), (100, 50));
        assert!(m.category.is_none());
        let again = generate_metadata(&img);
        assert!(m.same_content(&again));
        let v = serde_json::to_value(&m).unwrap();
        for key in ["colorHist", "edgeHist", "aspectRatio", "width", "height", "category", "createdAt"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        let back: Metadata = serde_json::from_value(v).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn red_vs_blue_square() {
        let red = generate_metadata(&ImageBuffer::rgb_from_fn(8, 8, |_, _| [255, 0, 0]));
        let blue = generate_metadata(&ImageBuffer::rgb_from_fn(8, 8, |_, _| [0, 0, 255]));
        let s = similarity(&red, &blue);
        assert!(s < 0.5);
        assert!((s - 0.3).abs() < 1e-12);
        assert!((similarity(&red, &red) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn centroid_is_member_mean() {
        let a = generate_metadata(&ImageBuffer::filled(4, 4, 3, 0));
        let b = generate_metadata(&ImageBuffer::filled(4, 4, 3, 255));
        assert!(Centroid::mean_of([]).is_none());
        let one = Centroid::mean_of([&a]).unwrap();
        assert_eq!(one.color_hist, a.color_hist);
        let two = Centroid::mean_of([&a, &b]).unwrap();
        assert_eq!(two.members, 2);
        assert_eq!(two.color_hist[0], 0.5);
        assert_eq!(two.color_hist[63], 0.5);
        assert_eq!(sum(&two.color_hist), 1.0);
    }

    #[test]
    fn cosine_zero_conventions() {
        assert_eq!(cosine(&[0.0f64; 3], &[0.0; 3]), 1.0);
        assert_eq!(cosine(&[0.0f64, 0.0], &[1.0, 0.0]), 0.0);
        assert_eq!(cosine(&[1.0f64, 0.0], &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn weight_rescaling_keeps_ranking() {
        let q = generate_metadata(&ImageBuffer::rgb_from_fn(16, 16, |x, _| if x < 9 { [200, 10, 10] } else { [0, 0, 0] }));
        let cands: Vec<_> = (0..6u8)
            .map(|i| generate_metadata(&ImageBuffer::rgb_from_fn(16, 16, |x, y| [i * 40, (x * 16) as u8, (y * i as usize) as u8])))
            .collect();
        let rank = |w: SimilarityWeights| {
            let mut idx: Vec<usize> = (0..cands.len()).collect();
            idx.sort_by(|&a, &b| w.score(&q, &cands[b]).total_cmp(&w.score(&q, &cands[a])).then(a.cmp(&b)));
            idx
        };
        let base = SimilarityWeights { color: 0.35, edge: 0.15 };
        let scaled = SimilarityWeights { color: 0.7, edge: 0.3 };
        assert_eq!(rank(base), rank(scaled));
    }

    fn arb_image() -> impl Strategy<Value = ImageBuffer> {
        (1usize..12, 1usize..12, prop::bool::ANY).prop_flat_map(|(w, h, rgb)| {
            let ch = if rgb { 3 } else { 1 };
            prop::collection::vec(any::<u8>(), w * h * ch).prop_map(move |d| ImageBuffer::new(w, h, ch, d).unwrap())
        })
    }

    proptest! {
        #[test]
        fn histograms_are_distributions(img in arb_image()) {
            let c = color_histogram(&img);
            prop_assert!((sum(&c) - 1.0).abs() < 1e-9);
            let e = edge_orientation_histogram(&img);
            let s = sum(&e);
            prop_assert!(s == 0.0 || (s - 1.0).abs() < 1e-9);
            prop_assert!(c.iter().chain(&e).all(|&v| v >= 0.0));
        }

        #[test]
        fn similarity_symmetric_and_bounded(a in arb_image(), b in arb_image()) {
            let (ma, mb) = (generate_metadata(&a), generate_metadata(&b));
            let s = similarity(&ma, &mb);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert_eq!(s, similarity(&mb, &ma));
            prop_assert!((similarity(&ma, &ma) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn color_hist_translation_invariant(img in arb_image(), dx in 0usize..12, dy in 0usize..12) {
            let (w, h, ch) = (img.width(), img.height(), img.channels());
            let mut data = Vec::with_capacity(img.data().len());
            for y in 0..h {
                for x in 0..w {
                    data.extend_from_slice(img.pixel((x + dx) % w, (y + dy) % h));
                }
            }
            let shifted = ImageBuffer::new(w, h, ch, data).unwrap();
            prop_assert_eq!(color_histogram(&img), color_histogram(&shifted));
        }
    }
}
