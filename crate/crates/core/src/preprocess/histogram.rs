use super::PreprocessError;
use crate::imaging::{rgb_to_ycbcr, ycbcr_to_rgb, ImageBuffer, YCbCrBuffer};

/// `round(x * num / den)` for non-negative integers, half rounded up.
#[inline]
fn div_round(num: u64, den: u64) -> u64 {
    (2 * num + den) / (2 * den)
}

/// Linear remap of the observed `[min, max]` range onto `[0, 255]`.
///
/// A constant image is returned unchanged.
pub fn histogram_stretch(img: &ImageBuffer) -> Result<ImageBuffer, PreprocessError> {
    histogram_stretch_masked(img, None)
}

/// As [`histogram_stretch`], with `[min, max]` taken over the pixels where
/// `valid` is true. Other pixels are remapped with the same line, clamped.
pub fn histogram_stretch_masked(img: &ImageBuffer, valid: Option<&[bool]>) -> Result<ImageBuffer, PreprocessError> {
    if img.channels() != 1 {
        return Err(PreprocessError::Channels {
            expected: 1,
            got: img.channels(),
        });
    }
    let Some((lo, hi)) = selected(img.data(), valid).fold(None, |acc: Option<(u8, u8)>, v| {
        Some(acc.map_or((v, v), |(a, b)| (a.min(v), b.max(v))))
    }) else {
        return Ok(img.clone());
    };
    if lo == hi {
        return Ok(img.clone());
    }
    let span = u64::from(hi - lo);
    let mut lut = [0u8; 256];
    for v in 0..=255u8 {
        lut[v as usize] = match v {
            v if v <= lo => 0,
            v if v >= hi => 255,
            v => div_round(u64::from(v - lo) * 255, span) as u8,
        };
    }
    let mut out = img.clone();
    for v in out.data_mut() {
        *v = lut[*v as usize];
    }
    Ok(out)
}

/// Lookup table `v -> round(255 * CDF(v))` for the histogram of `samples`.
pub fn equalization_lut(samples: &[u8]) -> [u8; 256] {
    let mut hist = [0u64; 256];
    for &v in samples {
        hist[v as usize] += 1;
    }
    let n = samples.len() as u64;
    let mut lut = [0u8; 256];
    if n == 0 {
        return lut;
    }
    let mut cdf = 0u64;
    for (v, &count) in hist.iter().enumerate() {
        cdf += count;
        lut[v] = div_round(cdf * 255, n) as u8;
    }
    lut
}

fn selected<'a>(samples: &'a [u8], valid: Option<&'a [bool]>) -> impl Iterator<Item = u8> + 'a {
    samples
        .iter()
        .enumerate()
        .filter(move |(i, _)| valid.is_none_or(|m| m[*i]))
        .map(|(_, &v)| v)
}

/// Equalize the Y plane; Cb and Cr are passed through untouched.
pub fn equalize_luma(buf: &YCbCrBuffer) -> YCbCrBuffer {
    let lut = equalization_lut(&buf.y);
    YCbCrBuffer {
        y: buf.y.iter().map(|&v| lut[v as usize]).collect(),
        ..buf.clone()
    }
}

/// Color histogram equalization on luminance only, via YCbCr.
///
/// An image whose luminance takes a single value is returned unchanged.
pub fn equalize_color(img: &ImageBuffer) -> Result<ImageBuffer, PreprocessError> {
    equalize_color_masked(img, None)
}

/// As [`equalize_color`], with the luminance histogram built from the pixels
/// where `valid` is true.
pub fn equalize_color_masked(img: &ImageBuffer, valid: Option<&[bool]>) -> Result<ImageBuffer, PreprocessError> {
    if img.channels() != 3 {
        return Err(PreprocessError::Channels {
            expected: 3,
            got: img.channels(),
        });
    }
    let planes = rgb_to_ycbcr(img);
    let samples: Vec<u8> = selected(&planes.y, valid).collect();
    if samples.iter().all(|&v| v == samples[0]) {
        return Ok(img.clone());
    }
    let lut = equalization_lut(&samples);
    let y = planes.y.iter().map(|&v| lut[v as usize]).collect();
    Ok(ycbcr_to_rgb(&YCbCrBuffer { y, ..planes }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn stretch_endpoints_and_midpoint() {
        let img = ImageBuffer::new(3, 1, 1, vec![50, 100, 150]).unwrap();
        assert_eq!(histogram_stretch(&img).unwrap().data(), &[0, 128, 255]);
    }

    #[test]
    fn masked_statistics_ignore_holes() {
        let img = ImageBuffer::new(4, 1, 1, vec![50, 100, 150, 0]).unwrap();
        let valid = [true, true, true, false];
        assert_eq!(histogram_stretch_masked(&img, Some(&valid)).unwrap().data(), &[0, 128, 255, 0]);
        let red = ImageBuffer::rgb_from_fn(4, 1, |x, _| if x == 3 { [0, 0, 0] } else { [230, 30, 30] });
        let out = equalize_color_masked(&red, Some(&valid)).unwrap();
        assert_eq!(out, red);
        assert_ne!(equalize_color(&red).unwrap(), red);
    }

    #[test]
    fn single_luma_level_is_unchanged() {
        let img = ImageBuffer::rgb_from_fn(5, 5, |_, _| [230, 30, 30]);
        assert_eq!(equalize_color(&img).unwrap(), img);
    }

    #[test]
    fn stretch_full_range_and_constant_are_identity() {
        let full = ImageBuffer::new(4, 1, 1, vec![0, 17, 200, 255]).unwrap();
        assert_eq!(histogram_stretch(&full).unwrap(), full);
        let flat = ImageBuffer::filled(3, 3, 1, 42);
        assert_eq!(histogram_stretch(&flat).unwrap(), flat);
        assert!(histogram_stretch(&ImageBuffer::filled(2, 2, 3, 0)).is_err());
    }

    #[test]
    fn two_level_luma() {
        let y = [vec![64u8; 8], vec![192u8; 8]].concat();
        let buf = YCbCrBuffer::new(4, 4, y, vec![128; 16], vec![128; 16]);
        let eq = equalize_luma(&buf);
        let mut levels: Vec<u8> = eq.y.clone();
        levels.sort_unstable();
        levels.dedup();
        // round(255 * 0.5) = round(127.5) = 128, round(255 * 1.0) = 255
        assert_eq!(levels, vec![128, 255]);
    }

    #[test]
    fn gray_world_stays_achromatic() {
        let img = ImageBuffer::rgb_from_fn(6, 5, |x, y| {
            let v = (40 + 10 * x + 3 * y) as u8;
            [v, v, v]
        });
        let out = equalize_color(&img).unwrap();
        for p in out.pixels() {
            assert!(p[0] == p[1] && p[1] == p[2]);
        }
        let planes = rgb_to_ycbcr(&out);
        assert!(planes.cb.iter().chain(&planes.cr).all(|&c| c == 128));
    }

    proptest! {
        #[test]
        fn stretch_hits_both_ends(data in proptest::collection::vec(any::<u8>(), 2..64)) {
            let img = ImageBuffer::new(data.len(), 1, 1, data).unwrap();
            let (lo, hi) = img.min_max();
            let once = histogram_stretch(&img).unwrap();
            if lo != hi {
                prop_assert_eq!(once.min_max(), (0, 255));
            }
            let twice = histogram_stretch(&once).unwrap();
            for (a, b) in once.data().iter().zip(twice.data()) {
                prop_assert!(a.abs_diff(*b) <= 1);
            }
        }

        #[test]
        fn equalize_keeps_chroma(data in proptest::collection::vec(any::<u8>(), 3 * 20)) {
            let img = ImageBuffer::new(5, 4, 3, data).unwrap();
            let before = rgb_to_ycbcr(&img);
            let after = equalize_luma(&before);
            prop_assert_eq!(&after.cb, &before.cb);
            prop_assert_eq!(&after.cr, &before.cr);
        }

        #[test]
        fn equalized_cdf_near_uniform(data in proptest::collection::vec(any::<u8>(), 1..200)) {
            let lut = equalization_lut(&data);
            let out: Vec<u8> = data.iter().map(|&v| lut[v as usize]).collect();
            let mut levels = data.clone();
            levels.sort_unstable();
            levels.dedup();
            let (at_levels, everywhere) = cdf_deviation(&out);
            prop_assert!(at_levels <= 1.0 / levels.len() as f64);
            prop_assert!(at_levels <= 0.5 / 255.0 + 1e-12);
            // Between occupied levels the gap is bounded by the heaviest input bin.
            let heaviest = levels
                .iter()
                .map(|l| data.iter().filter(|&&v| v == *l).count())
                .max()
                .unwrap() as f64
                / data.len() as f64;
            prop_assert!(everywhere <= heaviest + 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn skewed_histogram_leaves_a_gap_below_its_first_level() {
        let data = [vec![10u8; 9], vec![200u8; 1]].concat();
        let lut = equalization_lut(&data);
        assert_eq!((lut[10], lut[200]), (230, 255));
        let out: Vec<u8> = data.iter().map(|&v| lut[v as usize]).collect();
        let (at_levels, everywhere) = cdf_deviation(&out);
        assert!(at_levels <= 0.5 / 255.0);
        assert!(everywhere > 0.5);
    }

    /// Distance between the empirical CDF of `samples` and the ramp `u / 255`:
    /// `(max over occupied levels, max over all 256 levels)`.
    fn cdf_deviation(samples: &[u8]) -> (f64, f64) {
        let mut hist = [0usize; 256];
        for &v in samples {
            hist[v as usize] += 1;
        }
        let n = samples.len() as f64;
        let mut acc = 0usize;
        let (mut at_levels, mut everywhere) = (0.0f64, 0.0f64);
        for (u, &c) in hist.iter().enumerate() {
            acc += c;
            let d = (acc as f64 / n - u as f64 / 255.0).abs();
            everywhere = everywhere.max(d);
            if c > 0 {
                at_levels = at_levels.max(d);
            }
        }
        (at_levels, everywhere)
    }
}
