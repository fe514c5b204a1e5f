//! Raster images, validity masks, color conversion and PNG I/O.

mod codec;
mod color;

pub use codec::{decode_image, decode_mask, encode_mask_png, encode_png};
pub use color::{rgb_to_ycbcr, to_grayscale, ycbcr_to_rgb, YCbCrBuffer};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("malformed image file: {0}")]
    MalformedFile(String),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("invalid image shape: {0}")]
    InvalidShape(String),
    #[error("dimension mismatch: image is {image_w}x{image_h}, mask is {mask_w}x{mask_h}")]
    DimMismatch {
        image_w: usize,
        image_h: usize,
        mask_w: usize,
        mask_h: usize,
    },
}

/// Dense 8-bit raster with 1 (gray) or 3 (RGB) interleaved channels, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for ImageBuffer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ImageBuffer")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}

impl ImageBuffer {
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<u8>,
    ) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidShape(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if channels != 1 && channels != 3 {
            return Err(ImageError::InvalidShape(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(channels))
            .ok_or_else(|| ImageError::InvalidShape("image too large".into()))?;
        if data.len() != expected {
            return Err(ImageError::InvalidShape(format!(
                "expected {expected} samples, got {}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Image with every sample set to `value`.
    ///
    /// Panics on zero dimensions or a channel count other than 1 or 3.
    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Self {
        Self::new(width, height, channels, vec![value; width * height * channels])
            .expect("valid filled image shape")
    }

    /// Grayscale image built from `f(x, y)`.
    pub fn gray_from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, 1, data).expect("valid gray image shape")
    }

    /// RGB image built from `f(x, y)`.
    pub fn rgb_from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [u8; 3],
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, 3, data).expect("valid rgb image shape")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    /// Sample with coordinates clamped into the image (replicate border).
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize, c: usize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y, c)
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn pixels(&self) -> std::slice::ChunksExact<'_, u8> {
        self.data.chunks_exact(self.channels)
    }

    /// Extract channel `c` as a grayscale image.
    pub fn channel(&self, c: usize) -> ImageBuffer {
        assert!(c < self.channels, "channel {c} out of range");
        let data = self.pixels().map(|p| p[c]).collect();
        ImageBuffer::new(self.width, self.height, 1, data).expect("same dims")
    }

    /// Interleave single-channel planes back into one image.
    pub fn from_planes(planes: &[ImageBuffer]) -> Result<ImageBuffer, ImageError> {
        let first = planes
            .first()
            .ok_or_else(|| ImageError::InvalidShape("no planes".into()))?;
        if planes
            .iter()
            .any(|p| p.channels != 1 || p.dims() != first.dims())
        {
            return Err(ImageError::InvalidShape(
                "planes must be single-channel with equal dimensions".into(),
            ));
        }
        let n = first.pixel_count();
        let mut data = Vec::with_capacity(n * planes.len());
        for i in 0..n {
            data.extend(planes.iter().map(|p| p.data[i]));
        }
        ImageBuffer::new(first.width, first.height, planes.len(), data)
    }

    /// Replicate a gray image into three channels; RGB images are cloned.
    pub fn to_rgb(&self) -> ImageBuffer {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        ImageBuffer::new(self.width, self.height, 3, data).expect("same dims")
    }

    pub fn min_max(&self) -> (u8, u8) {
        self.data
            .iter()
            .fold((u8::MAX, u8::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Per-pixel validity map: `true` is a known pixel, `false` a hole to restore.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MaskImage {
    width: usize,
    height: usize,
    valid: Vec<bool>,
}

impl MaskImage {
    pub fn new(width: usize, height: usize, valid: Vec<bool>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 || valid.len() != width * height {
            return Err(ImageError::InvalidShape(format!(
                "mask {width}x{height} needs {} entries, got {}",
                width * height,
                valid.len()
            )));
        }
        Ok(Self {
            width,
            height,
            valid,
        })
    }

    pub fn all_valid(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![true; width * height]).expect("valid mask shape")
    }

    pub fn all_holes(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![false; width * height]).expect("valid mask shape")
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut valid = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                valid.push(f(x, y));
            }
        }
        Self::new(width, height, valid).expect("valid mask shape")
    }

    /// Mask with an axis-aligned rectangular hole; the rectangle is clipped to the image.
    pub fn with_rect_hole(width: usize, height: usize, x0: usize, y0: usize, w: usize, h: usize) -> Self {
        Self::from_fn(width, height, |x, y| {
            !(x >= x0 && x < x0 + w && y >= y0 && y < y0 + h)
        })
    }

    /// Gray image convention: samples >= 128 are valid, < 128 are holes.
    pub fn from_gray(img: &ImageBuffer) -> Result<Self, ImageError> {
        if img.channels() != 1 {
            return Err(ImageError::UnsupportedFormat(
                "mask must be an 8-bit grayscale image".into(),
            ));
        }
        Self::new(
            img.width(),
            img.height(),
            img.data().iter().map(|&v| v >= 128).collect(),
        )
    }

    /// Render as a gray image: 255 valid, 0 hole.
    pub fn to_gray(&self) -> ImageBuffer {
        let data = self.valid.iter().map(|&v| if v { 255 } else { 0 }).collect();
        ImageBuffer::new(self.width, self.height, 1, data).expect("mask dims are valid")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, valid: bool) {
        self.valid[y * self.width + x] = valid;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn hole_count(&self) -> usize {
        self.valid.len() - self.valid_count()
    }

    /// Fraction of valid pixels, in `[0, 1]`.
    pub fn coverage(&self) -> f64 {
        self.valid_count() as f64 / self.valid.len() as f64
    }

    /// Error unless the mask pairs with `img`.
    pub fn check_pairs_with(&self, img: &ImageBuffer) -> Result<(), ImageError> {
        if self.dims() != img.dims() {
            return Err(ImageError::DimMismatch {
                image_w: img.width(),
                image_h: img.height(),
                mask_w: self.width,
                mask_h: self.height,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(ImageBuffer::new(0, 1, 1, vec![]).is_err());
        assert!(ImageBuffer::new(1, 1, 2, vec![0, 0]).is_err());
        assert!(ImageBuffer::new(2, 2, 1, vec![0; 3]).is_err());
        assert!(ImageBuffer::new(2, 1, 3, vec![1, 2, 3, 4, 5, 6]).is_ok());
    }

    #[test]
    fn mask_gray_threshold_is_128() {
        let img = ImageBuffer::new(4, 1, 1, vec![0, 127, 128, 255]).unwrap();
        let mask = MaskImage::from_gray(&img).unwrap();
        assert_eq!(mask.as_slice(), &[false, false, true, true]);
        assert_eq!(mask.to_gray().data(), &[0, 0, 255, 255]);
    }

    #[test]
    fn mask_dims_must_pair() {
        let img = ImageBuffer::filled(4, 3, 3, 0);
        assert!(MaskImage::all_valid(4, 3).check_pairs_with(&img).is_ok());
        assert!(matches!(
            MaskImage::all_valid(3, 4).check_pairs_with(&img),
            Err(ImageError::DimMismatch { .. })
        ));
    }

    #[test]
    fn rect_hole_counts() {
        let m = MaskImage::with_rect_hole(10, 10, 2, 2, 5, 5);
        assert_eq!(m.hole_count(), 25);
        assert_eq!(m.coverage(), 0.75);
        // clipped at the border
        let m = MaskImage::with_rect_hole(4, 4, 3, 3, 5, 5);
        assert_eq!(m.hole_count(), 1);
    }

    #[test]
    fn planes_round_trip() {
        let img = ImageBuffer::rgb_from_fn(3, 2, |x, y| [x as u8, y as u8, (x + y) as u8]);
        let planes: Vec<_> = (0..3).map(|c| img.channel(c)).collect();
        assert_eq!(ImageBuffer::from_planes(&planes).unwrap(), img);
    }
}
