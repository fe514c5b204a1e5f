//! Seeded synthetic data: a small multi-category product corpus, smooth
//! textures for training, and rectangular occlusion damage.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imaging::{ImageBuffer, MaskImage};

/// One of the generated product families.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Motif {
    pub category: &'static str,
    background: [u8; 3],
    foreground: [u8; 3],
    shape: Shape,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Shape {
    Disc,
    Stripes,
    Square,
    Cross,
}

pub const MOTIFS: [Motif; 4] = [
    Motif {
        category: "crimson-disc",
        background: [200, 40, 40],
        foreground: [250, 230, 220],
        shape: Shape::Disc,
    },
    Motif {
        category: "azure-stripes",
        background: [40, 80, 200],
        foreground: [240, 220, 60],
        shape: Shape::Stripes,
    },
    Motif {
        category: "forest-square",
        background: [50, 150, 60],
        foreground: [20, 40, 20],
        shape: Shape::Square,
    },
    Motif {
        category: "amber-cross",
        background: [230, 160, 40],
        foreground: [90, 30, 110],
        shape: Shape::Cross,
    },
];

/// A labelled generated image.
#[derive(Clone, Debug)]
pub struct SynthItem {
    pub category: &'static str,
    pub name: String,
    pub image: ImageBuffer,
}

fn jitter<R: Rng>(rgb: [u8; 3], amount: i32, rng: &mut R) -> [u8; 3] {
    rgb.map(|v| (i32::from(v) + rng.random_range(-amount..=amount)).clamp(0, 255) as u8)
}

/// Render one instance of `motif`: jittered colors, random motif placement
/// and scale, light per-pixel noise.
pub fn render_motif<R: Rng>(motif: &Motif, size: usize, rng: &mut R) -> ImageBuffer {
    let bg = jitter(motif.background, 20, rng);
    let fg = jitter(motif.foreground, 20, rng);
    let s = size as f64;
    let cx = rng.random_range(0.35..0.65) * s;
    let cy = rng.random_range(0.35..0.65) * s;
    let r = rng.random_range(0.2..0.32) * s;
    let period = rng.random_range(0.12..0.2) * s;
    let phase = rng.random_range(0.0..period);
    let noise: Vec<i32> = (0..size * size).map(|_| rng.random_range(-6..=6)).collect();
    ImageBuffer::rgb_from_fn(size, size, |x, y| {
        let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
        let inside = match motif.shape {
            Shape::Disc => (fx - cx).powi(2) + (fy - cy).powi(2) <= r * r,
            Shape::Stripes => ((fy + phase) / period).floor() as i64 % 2 == 0,
            Shape::Square => (fx - cx).abs() <= r && (fy - cy).abs() <= r,
            Shape::Cross => {
                let arm = r * 0.35;
                ((fx - cx).abs() <= arm && (fy - cy).abs() <= r * 1.3)
                    || ((fy - cy).abs() <= arm && (fx - cx).abs() <= r * 1.3)
            }
        };
        let base = if inside { fg } else { bg };
        let n = noise[y * size + x];
        base.map(|v| (i32::from(v) + n).clamp(0, 255) as u8)
    })
}

/// `per_category` images of each motif, `size` x `size`, in category order.
pub fn synth_corpus(per_category: usize, size: usize, seed: u64) -> Vec<SynthItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    MOTIFS
        .iter()
        .flat_map(|m| (0..per_category).map(move |i| (m, i)))
        .map(|(m, i)| SynthItem {
            category: m.category,
            name: format!("{}-{i:03}", m.category),
            image: render_motif(m, size, &mut rng),
        })
        .collect()
}

/// Smooth sinusoidal color textures.
pub fn synth_textures(count: usize, size: usize, seed: u64) -> Vec<ImageBuffer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let f: [f64; 2] = [rng.random_range(0.08..0.4), rng.random_range(0.08..0.4)];
            let base: [f64; 3] = [0, 1, 2].map(|_| rng.random_range(60.0..190.0));
            let amp: [f64; 3] = [0, 1, 2].map(|_| rng.random_range(20.0..60.0));
            ImageBuffer::rgb_from_fn(size, size, |x, y| {
                let w = (x as f64 * f[0]).sin() * (y as f64 * f[1]).cos();
                [0, 1, 2].map(|c| (base[c] + amp[c] * w).round().clamp(0.0, 255.0) as u8)
            })
        })
        .collect()
}

/// Axis-aligned rectangle covering about `area_fraction` of the image, with
/// seeded aspect ratio and position.
pub fn damage_mask(width: usize, height: usize, area_fraction: f64, seed: u64) -> MaskImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frac = area_fraction.clamp(0.0, 1.0);
    let target = frac * (width * height) as f64;
    let aspect: f64 = rng.random_range(0.5..2.0);
    let rw = ((target * aspect).sqrt().round() as usize).clamp(0, width);
    let rh = if rw == 0 {
        0
    } else {
        ((target / rw as f64).round() as usize).clamp(0, height)
    };
    let x0 = rng.random_range(0..=width - rw);
    let y0 = rng.random_range(0..=height - rh);
    MaskImage::with_rect_hole(width, height, x0, y0, rw, rh)
}

/// Paint the holes of `mask` with a seeded solid occluder color.
pub fn occlude(img: &ImageBuffer, mask: &MaskImage, seed: u64) -> ImageBuffer {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let color: [u8; 3] = [0, 1, 2].map(|_| rng.random_range(0..=255));
    let mut out = img.clone();
    for y in 0..img.height() {
        for x in 0..img.width() {
            if !mask.is_valid(x, y) {
                for (c, &v) in color.iter().enumerate().take(img.channels()) {
                    out.set(x, y, c, v);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_seeded_and_labelled() {
        let a = synth_corpus(3, 24, 7);
        let b = synth_corpus(3, 24, 7);
        assert_eq!(a.len(), 12);
        assert!(a.iter().zip(&b).all(|(x, y)| x.image == y.image && x.name == y.name));
        assert_ne!(a[0].image, synth_corpus(3, 24, 8)[0].image);
        assert_eq!(a[4].category, "azure-stripes");
    }

    #[test]
    fn damage_area_is_close_to_target() {
        for seed in 0..50 {
            let m = damage_mask(64, 48, 0.2, seed);
            let holes = m.hole_count() as f64 / (64.0 * 48.0);
            assert!((holes - 0.2).abs() < 0.03, "seed {seed}: {holes}");
        }
        assert_eq!(damage_mask(10, 10, 0.0, 1).hole_count(), 0);
        assert_eq!(damage_mask(10, 10, 1.0, 1).hole_count(), 100);
    }

    #[test]
    fn occlusion_touches_holes_only() {
        let img = synth_corpus(1, 16, 1).remove(0).image;
        let m = damage_mask(16, 16, 0.25, 3);
        let d = occlude(&img, &m, 3);
        for y in 0..16 {
            for x in 0..16 {
                if m.is_valid(x, y) {
                    assert_eq!(d.pixel(x, y), img.pixel(x, y));
                }
            }
        }
    }
}
