//! Sampled 2D Gaussian masks and the convolutions built on them.

use super::PreprocessError;
use crate::imaging::ImageBuffer;
use crate::scalar::{quantize, Real};

/// Value of the zero-mean 2D Gaussian density with standard deviations
/// `sigma_x`, `sigma_y` at offset `(x, y)`.
pub fn gaussian_density<T: Real>(sigma_x: T, sigma_y: T, x: T, y: T) -> T {
    let two = T::of(2.0);
    let norm = T::one() / (two * T::PI() * sigma_x * sigma_y);
    norm * (-(x * x / (two * sigma_x * sigma_x) + y * y / (two * sigma_y * sigma_y))).exp()
}

/// Normalized `(2r+1) x (2r+1)` Gaussian mask, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianKernel<T> {
    sigma_x: T,
    sigma_y: T,
    radius: usize,
    weights: Vec<T>,
}

impl<T: Real> GaussianKernel<T> {
    pub fn sigma_x(&self) -> T {
        self.sigma_x
    }

    pub fn sigma_y(&self) -> T {
        self.sigma_y
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Side length `2r + 1`.
    pub fn size(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Weight at offset `(dx, dy)` from the center.
    pub fn at(&self, dx: isize, dy: isize) -> T {
        let r = self.radius as isize;
        let side = self.size();
        self.weights[(dy + r) as usize * side + (dx + r) as usize]
    }
}

fn check_sigma<T: Real>(sigma: T) -> Result<(), PreprocessError> {
    if !sigma.is_finite() || sigma <= T::zero() {
        return Err(PreprocessError::InvalidSigma(sigma.as_f64()));
    }
    Ok(())
}

/// Build a Gaussian mask with radius `ceil(3 * max(sigma_x, sigma_y))`,
/// sampled at integer offsets and normalized to unit sum.
pub fn gaussian_kernel<T: Real>(sigma_x: T, sigma_y: T) -> Result<GaussianKernel<T>, PreprocessError> {
    check_sigma(sigma_x)?;
    check_sigma(sigma_y)?;
    let radius = (T::of(3.0) * sigma_x.max(sigma_y))
        .ceil()
        .to_usize()
        .unwrap_or(1)
        .max(1);
    let r = radius as isize;
    let mut weights = Vec::with_capacity((2 * radius + 1).pow(2));
    for dy in -r..=r {
        for dx in -r..=r {
            weights.push(gaussian_density(
                sigma_x,
                sigma_y,
                T::of(dx as f64),
                T::of(dy as f64),
            ));
        }
    }
    let total: T = weights.iter().copied().sum();
    for w in &mut weights {
        *w /= total;
    }
    Ok(GaussianKernel {
        sigma_x,
        sigma_y,
        radius,
        weights,
    })
}

/// Per-channel 2D convolution with replicate-border padding; outputs are
/// rounded half away from zero and clamped.
pub fn gaussian_blur<T: Real>(img: &ImageBuffer, kernel: &GaussianKernel<T>) -> ImageBuffer {
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let r = kernel.radius as isize;
    let side = kernel.size();
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            for c in 0..ch {
                let mut acc = T::zero();
                for dy in -r..=r {
                    let row = &kernel.weights[(dy + r) as usize * side..][..side];
                    for (k, dx) in (-r..=r).enumerate() {
                        let v = img.get_clamped(x as isize + dx, y as isize + dy, c);
                        acc += row[k] * T::of(v as f64);
                    }
                }
                out.set(x, y, c, quantize(acc));
            }
        }
    }
    out
}

/// `clamp(round(img + amount * (img - blur(img, sigma))))`, per channel.
pub fn unsharp_mask<T: Real>(
    img: &ImageBuffer,
    amount: T,
    sigma: T,
) -> Result<ImageBuffer, PreprocessError> {
    if !amount.is_finite() || amount < T::zero() {
        return Err(PreprocessError::InvalidParams(format!(
            "unsharp amount must be a finite value >= 0, got {amount}"
        )));
    }
    let kernel = gaussian_kernel(sigma, sigma)?;
    let blurred = gaussian_blur(img, &kernel);
    let mut out = img.clone();
    for (o, (&v, &b)) in out
        .data_mut()
        .iter_mut()
        .zip(img.data().iter().zip(blurred.data()))
    {
        let v = T::of(v as f64);
        let b = T::of(b as f64);
        *o = quantize(v + amount * (v - b));
    }
    Ok(out)
}
