//! Image pre-processing: Gaussian/Sobel/Canny edge machinery, histogram
//! stretching and luminance equalization, unsharp masking, and the
//! color/grayscale routing that turns an input image into the enhanced
//! image handed to inpainting.

mod canny;
mod gradient;
mod histogram;
mod kernel;

pub use canny::{canny, canny_stages, hysteresis, non_maximum_suppression, CannyParams, CannyStages, EdgeMap};
pub use gradient::{sobel_gradient, GradientField};
pub use histogram::{
    equalization_lut, equalize_color, equalize_color_masked, equalize_luma, histogram_stretch, histogram_stretch_masked,
};
pub use kernel::{gaussian_blur, gaussian_density, gaussian_kernel, unsharp_mask, GaussianKernel};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{rgb_to_ycbcr, to_grayscale, ImageBuffer, MaskImage};

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("invalid sigma {0}: must be finite and > 0")]
    InvalidSigma(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("expected a {expected}-channel image, got {got} channels")]
    Channels { expected: usize, got: usize },
}

/// Which enhancement path an image went through.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreprocessMode {
    Color,
    Grayscale,
}

impl PreprocessMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PreprocessMode::Color => "color",
            PreprocessMode::Grayscale => "grayscale",
        }
    }
}

/// Routing request: detect automatically or force a path.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ModeChoice {
    #[default]
    Auto,
    Color,
    Grayscale,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PreprocessStep {
    ToGrayscale,
    EqualizeColor,
    UnsharpMask,
    HistogramStretch,
    Canny,
}

impl PreprocessStep {
    pub fn as_str(self) -> &'static str {
        match self {
            PreprocessStep::ToGrayscale => "to_grayscale",
            PreprocessStep::EqualizeColor => "equalize_color",
            PreprocessStep::UnsharpMask => "unsharp_mask",
            PreprocessStep::HistogramStretch => "histogram_stretch",
            PreprocessStep::Canny => "canny",
        }
    }
}

impl std::fmt::Display for PreprocessStep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug)]
pub struct PreprocessReport {
    pub mode: PreprocessMode,
    pub steps: Vec<PreprocessStep>,
    pub output: ImageBuffer,
    pub edges: Option<EdgeMap>,
}

/// Mean squared chroma deviation below which an RGB image counts as gray.
pub const CHROMA_GRAY_THRESHOLD: f64 = 1.0;

pub const UNSHARP_AMOUNT: f64 = 1.0;
pub const UNSHARP_SIGMA: f64 = 1.0;

/// Mean over pixels of `(Cb - 128)^2 + (Cr - 128)^2`; zero for gray images.
pub fn chroma_variance(img: &ImageBuffer) -> f64 {
    chroma_variance_masked(img, None)
}

/// As [`chroma_variance`], averaged over the pixels where `valid` is true.
pub fn chroma_variance_masked(img: &ImageBuffer, valid: Option<&[bool]>) -> f64 {
    if img.channels() == 1 {
        return 0.0;
    }
    let planes = rgb_to_ycbcr(img);
    let (mut total, mut n) = (0.0, 0usize);
    for (i, (&cb, &cr)) in planes.cb.iter().zip(&planes.cr).enumerate() {
        if valid.is_none_or(|m| m[i]) {
            let (a, b) = (f64::from(cb) - 128.0, f64::from(cr) - 128.0);
            total += a * a + b * b;
            n += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        total / n as f64
    }
}

pub fn detect_mode(img: &ImageBuffer) -> PreprocessMode {
    detect_mode_masked(img, None)
}

fn detect_mode_masked(img: &ImageBuffer, valid: Option<&[bool]>) -> PreprocessMode {
    if img.channels() == 3 && chroma_variance_masked(img, valid) >= CHROMA_GRAY_THRESHOLD {
        PreprocessMode::Color
    } else {
        PreprocessMode::Grayscale
    }
}

/// Case-based enhancement with automatic color/grayscale detection.
pub fn preprocess_auto(img: &ImageBuffer) -> Result<PreprocessReport, PreprocessError> {
    preprocess(img, ModeChoice::Auto)
}

/// Color path: luminance equalization, then Canny.
/// Grayscale path: unsharp mask, histogram stretch, then Canny.
pub fn preprocess(img: &ImageBuffer, choice: ModeChoice) -> Result<PreprocessReport, PreprocessError> {
    preprocess_masked(img, choice, None)
}

/// As [`preprocess`], for an image with holes: mode detection, equalization
/// and stretching draw their statistics from valid pixels only, so occluder
/// content does not steer the enhancement. Pixels are still all transformed.
pub fn preprocess_masked(
    img: &ImageBuffer,
    choice: ModeChoice,
    mask: Option<&MaskImage>,
) -> Result<PreprocessReport, PreprocessError> {
    if let Some(m) = mask {
        if m.dims() != img.dims() {
            return Err(PreprocessError::InvalidParams(format!(
                "mask is {}x{}, image is {}x{}",
                m.width(),
                m.height(),
                img.width(),
                img.height()
            )));
        }
    }
    let valid = mask.map(MaskImage::as_slice);
    let mode = match choice {
        ModeChoice::Auto => detect_mode_masked(img, valid),
        ModeChoice::Color => PreprocessMode::Color,
        ModeChoice::Grayscale => PreprocessMode::Grayscale,
    };
    let params = CannyParams::<f64>::default();
    let mut steps = Vec::new();
    let output = match mode {
        PreprocessMode::Color => {
            steps.push(PreprocessStep::EqualizeColor);
            equalize_color_masked(&img.to_rgb(), valid)?
        }
        PreprocessMode::Grayscale => {
            let gray = if img.channels() == 3 {
                steps.push(PreprocessStep::ToGrayscale);
                to_grayscale(img)
            } else {
                img.clone()
            };
            steps.push(PreprocessStep::UnsharpMask);
            let sharp = unsharp_mask(&gray, UNSHARP_AMOUNT, UNSHARP_SIGMA)?;
            steps.push(PreprocessStep::HistogramStretch);
            histogram_stretch_masked(&sharp, valid)?
        }
    };
    steps.push(PreprocessStep::Canny);
    let edges = canny(&output, &params)?;
    Ok(PreprocessReport {
        mode,
        steps,
        output,
        edges: Some(edges),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use PreprocessStep::*;

    #[test]
    fn routes_saturated_color() {
        let img = ImageBuffer::rgb_from_fn(16, 16, |x, _| if x < 8 { [200, 30, 30] } else { [20, 40, 220] });
        let r = preprocess_auto(&img).unwrap();
        assert_eq!(r.mode, PreprocessMode::Color);
        assert_eq!(r.steps, vec![EqualizeColor, Canny]);
        assert_eq!(r.output.channels(), 3);
        assert!(r.edges.is_some());
    }

    #[test]
    fn routes_single_channel() {
        let img = ImageBuffer::gray_from_fn(16, 16, |x, y| (x * 8 + y) as u8);
        let r = preprocess_auto(&img).unwrap();
        assert_eq!(r.mode, PreprocessMode::Grayscale);
        assert_eq!(r.steps, vec![UnsharpMask, HistogramStretch, Canny]);
        assert_eq!(r.output.channels(), 1);
        assert_eq!(r.output.min_max(), (0, 255));
    }

    #[test]
    fn gray_looking_rgb_takes_gray_path() {
        let img = ImageBuffer::rgb_from_fn(8, 8, |x, _| {
            let v = (x * 20) as u8;
            [v, v, v]
        });
        assert_eq!(chroma_variance(&img), 0.0);
        let r = preprocess_auto(&img).unwrap();
        assert_eq!(r.mode, PreprocessMode::Grayscale);
        assert_eq!(r.steps, vec![ToGrayscale, UnsharpMask, HistogramStretch, Canny]);
    }

    #[test]
    fn occluder_does_not_change_mode_or_statistics() {
        let clean = ImageBuffer::rgb_from_fn(8, 8, |x, y| if x < 4 { [120, 60, 40 + y as u8] } else { [90, 50, 30] });
        let mask = MaskImage::from_fn(8, 8, |x, y| !(y == 0 && x < 3));
        let occlude = |rgb: [u8; 3]| {
            let mut img = clean.clone();
            for x in 0..3 {
                for (c, &v) in rgb.iter().enumerate() {
                    img.set(x, 0, c, v);
                }
            }
            img
        };
        let a = preprocess_masked(&occlude([0, 255, 0]), ModeChoice::Auto, Some(&mask)).unwrap();
        let b = preprocess_masked(&occlude([255, 255, 255]), ModeChoice::Auto, Some(&mask)).unwrap();
        assert_eq!(a.mode, PreprocessMode::Color);
        assert_eq!(a.mode, b.mode);
        for y in 1..8 {
            for x in 0..8 {
                assert_eq!(a.output.pixel(x, y), b.output.pixel(x, y));
            }
        }
        let gray_with_green_hole = ImageBuffer::rgb_from_fn(8, 8, |x, y| {
            if y == 0 && x < 3 {
                [0, 255, 0]
            } else {
                [(x * 30) as u8; 3]
            }
        });
        let r = preprocess_masked(&gray_with_green_hole, ModeChoice::Auto, Some(&mask)).unwrap();
        assert_eq!(r.mode, PreprocessMode::Grayscale);
        assert!(preprocess_masked(&clean, ModeChoice::Auto, Some(&MaskImage::all_valid(2, 2))).is_err());
    }

    #[test]
    fn forced_color_on_gray_input() {
        let img = ImageBuffer::gray_from_fn(8, 8, |x, _| (100 + x) as u8);
        let r = preprocess(&img, ModeChoice::Color).unwrap();
        assert_eq!(r.mode, PreprocessMode::Color);
        assert_eq!(r.output.channels(), 3);
    }
}
