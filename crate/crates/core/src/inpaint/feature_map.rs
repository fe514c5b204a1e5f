use crate::imaging::{ImageBuffer, MaskImage};
use crate::scalar::{quantize, Real};

/// Real-valued activations in planar layout: the value for channel `c` at
/// `(x, y)` lives at `values[(c * height + y) * width + x]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap<T> {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub values: Vec<T>,
}

impl<T: Real> FeatureMap<T> {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Self {
            width,
            height,
            channels,
            values: vec![T::zero(); width * height * channels],
        }
    }

    /// Samples scaled from `[0, 255]` to `[0, 1]`.
    pub fn from_image(img: &ImageBuffer) -> Self {
        let (w, h, ch) = (img.width(), img.height(), img.channels());
        let mut fm = Self::zeros(w, h, ch);
        let scale = T::of(255.0);
        for y in 0..h {
            for x in 0..w {
                for c in 0..ch {
                    fm.values[(c * h + y) * w + x] = T::of(img.get(x, y, c) as f64) / scale;
                }
            }
        }
        fm
    }

    /// Clamp to `[0, 1]`, scale to 8 bits and round.
    pub fn to_image(&self) -> ImageBuffer {
        let mut data = Vec::with_capacity(self.values.len());
        for y in 0..self.height {
            for x in 0..self.width {
                for c in 0..self.channels {
                    let v = self.get(c, x, y).max(T::zero()).min(T::one());
                    data.push(quantize(v * T::of(255.0)));
                }
            }
        }
        ImageBuffer::new(self.width, self.height, self.channels, data)
            .expect("feature map has image-compatible shape")
    }

    #[inline]
    pub fn index(&self, c: usize, x: usize, y: usize) -> usize {
        (c * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, c: usize, x: usize, y: usize) -> T {
        self.values[self.index(c, x, y)]
    }

    pub fn plane(&self, c: usize) -> &[T] {
        let n = self.width * self.height;
        &self.values[c * n..(c + 1) * n]
    }

    /// Zero every position the mask marks invalid.
    pub fn masked(&self, mask: &MaskImage) -> Self {
        let mut out = self.clone();
        let n = self.width * self.height;
        for c in 0..self.channels {
            for (v, &ok) in out.values[c * n..(c + 1) * n].iter_mut().zip(mask.as_slice()) {
                if !ok {
                    *v = T::zero();
                }
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Stack channels of `a` followed by channels of `b` (same spatial dims).
    pub fn concat(a: &Self, b: &Self) -> Self {
        assert_eq!((a.width, a.height), (b.width, b.height), "concat needs equal dims");
        let mut values = Vec::with_capacity(a.values.len() + b.values.len());
        values.extend_from_slice(&a.values);
        values.extend_from_slice(&b.values);
        Self {
            width: a.width,
            height: a.height,
            channels: a.channels + b.channels,
            values,
        }
    }

    /// Nearest-neighbour resize to `(width, height)`.
    pub fn upsample_nearest(&self, width: usize, height: usize) -> Self {
        let mut out = Self::zeros(width, height, self.channels);
        for c in 0..self.channels {
            for y in 0..height {
                let sy = nearest_source(y, self.height, height);
                for x in 0..width {
                    let sx = nearest_source(x, self.width, width);
                    out.values[(c * height + y) * width + x] = self.get(c, sx, sy);
                }
            }
        }
        out
    }
}

/// Source coordinate for nearest-neighbour resampling from `src` to `dst` samples.
#[inline]
pub(crate) fn nearest_source(i: usize, src: usize, dst: usize) -> usize {
    (i * src / dst).min(src - 1)
}

/// Nearest-neighbour resize of a mask, consistent with [`FeatureMap::upsample_nearest`].
pub fn upsample_mask(mask: &MaskImage, width: usize, height: usize) -> MaskImage {
    let (sw, sh) = mask.dims();
    MaskImage::from_fn(width, height, |x, y| {
        mask.is_valid(nearest_source(x, sw, width), nearest_source(y, sh, height))
    })
}
