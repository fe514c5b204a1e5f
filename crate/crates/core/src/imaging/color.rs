//! Grayscale and full-range BT.601 YCbCr conversion.

use super::ImageBuffer;
use crate::scalar::quantize;

/// Separate Y, Cb, Cr planes of an image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct YCbCrBuffer {
    pub width: usize,
    pub height: usize,
    pub y: Vec<u8>,
    pub cb: Vec<u8>,
    pub cr: Vec<u8>,
}

impl YCbCrBuffer {
    pub fn new(width: usize, height: usize, y: Vec<u8>, cb: Vec<u8>, cr: Vec<u8>) -> Self {
        let n = width * height;
        assert!(
            y.len() == n && cb.len() == n && cr.len() == n,
            "YCbCr planes must all hold width*height samples"
        );
        Self {
            width,
            height,
            y,
            cb,
            cr,
        }
    }
}

#[inline]
fn luma(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

/// `round(0.299 R + 0.587 G + 0.114 B)`; single-channel input is copied.
pub fn to_grayscale(img: &ImageBuffer) -> ImageBuffer {
    if img.channels() == 1 {
        return img.clone();
    }
    let data = img
        .pixels()
        .map(|p| quantize(luma(p[0] as f64, p[1] as f64, p[2] as f64)))
        .collect();
    ImageBuffer::new(img.width(), img.height(), 1, data).expect("same dims")
}

#[inline]
pub(crate) fn rgb_to_ycbcr_pixel(p: &[u8]) -> [u8; 3] {
    let (r, g, b) = (p[0] as f64, p[1] as f64, p[2] as f64);
    [
        quantize(luma(r, g, b)),
        quantize(128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b),
        quantize(128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b),
    ]
}

#[inline]
pub(crate) fn ycbcr_to_rgb_pixel(y: u8, cb: u8, cr: u8) -> [u8; 3] {
    let (y, cb, cr) = (y as f64, cb as f64 - 128.0, cr as f64 - 128.0);
    [
        quantize(y + 1.402 * cr),
        quantize(y - 0.344136 * cb - 0.714136 * cr),
        quantize(y + 1.772 * cb),
    ]
}

/// Full-range BT.601 (JFIF) forward transform.
///
/// Panics unless `img` has three channels.
pub fn rgb_to_ycbcr(img: &ImageBuffer) -> YCbCrBuffer {
    assert_eq!(img.channels(), 3, "rgb_to_ycbcr needs a 3-channel image");
    let n = img.pixel_count();
    let (mut y, mut cb, mut cr) = (
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    );
    for p in img.pixels() {
        let [a, b, c] = rgb_to_ycbcr_pixel(p);
        y.push(a);
        cb.push(b);
        cr.push(c);
    }
    YCbCrBuffer::new(img.width(), img.height(), y, cb, cr)
}

pub fn ycbcr_to_rgb(buf: &YCbCrBuffer) -> ImageBuffer {
    let mut data = Vec::with_capacity(buf.y.len() * 3);
    for i in 0..buf.y.len() {
        data.extend_from_slice(&ycbcr_to_rgb_pixel(buf.y[i], buf.cb[i], buf.cr[i]));
    }
    ImageBuffer::new(buf.width, buf.height, 3, data).expect("plane dims are valid")
}
