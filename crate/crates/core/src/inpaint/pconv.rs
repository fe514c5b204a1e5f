//! Partial convolution: a convolution evaluated over valid inputs only,
//! rescaled by `window size / valid count`, with the mask update rule
//! "an output is valid iff its window saw at least one valid input".
//!
//! Padding is `k / 2` on every side. Padded positions are neither valid nor
//! counted in the window size, so with an all-valid mask the layer is
//! exactly a zero-padded convolution plus bias.

use rand::Rng;

use super::feature_map::FeatureMap;
use super::InpaintError;
use crate::imaging::MaskImage;
use crate::scalar::Real;

/// Weights of one partial-convolution layer. `weights` is indexed
/// `[out][in][ky][kx]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PConvLayer<T> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> PConvLayer<T> {
    pub fn zeros(in_channels: usize, out_channels: usize, kernel_size: usize, stride: usize) -> Self {
        Self {
            in_channels,
            out_channels,
            kernel_size,
            stride,
            weights: vec![T::zero(); out_channels * in_channels * kernel_size * kernel_size],
            bias: vec![T::zero(); out_channels],
        }
    }

    /// Weights and biases uniform in `[-sqrt(1/fan_in), sqrt(1/fan_in)]`.
    pub fn random<R: Rng + ?Sized>(
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        stride: usize,
        rng: &mut R,
    ) -> Self {
        let mut layer = Self::zeros(in_channels, out_channels, kernel_size, stride);
        let bound = (1.0 / (in_channels * kernel_size * kernel_size) as f64).sqrt();
        for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
            *w = T::of(rng.random_range(-bound..=bound));
        }
        layer
    }

    pub fn validate(&self) -> Result<(), InpaintError> {
        let k = self.kernel_size;
        if k == 0 || k.is_multiple_of(2) {
            return Err(InpaintError::InvalidModel(format!("kernel size {k} must be odd")));
        }
        if self.stride == 0 || self.in_channels == 0 || self.out_channels == 0 {
            return Err(InpaintError::InvalidModel(
                "stride and channel counts must be >= 1".into(),
            ));
        }
        if self.weights.len() != self.out_channels * self.in_channels * k * k
            || self.bias.len() != self.out_channels
        {
            return Err(InpaintError::InvalidModel("weight array length mismatch".into()));
        }
        if !self.weights.iter().chain(&self.bias).all(|w| w.is_finite()) {
            return Err(InpaintError::InvalidModel("non-finite weight".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn weight_index(&self, o: usize, i: usize, ky: usize, kx: usize) -> usize {
        ((o * self.in_channels + i) * self.kernel_size + ky) * self.kernel_size + kx
    }

    pub fn output_dims(&self, width: usize, height: usize) -> (usize, usize) {
        ((width - 1) / self.stride + 1, (height - 1) / self.stride + 1)
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Per-output-location renormalization, shared by every output channel.
#[derive(Clone, Debug)]
pub(crate) struct WindowScale<T> {
    pub width: usize,
    pub height: usize,
    /// `window size / valid count`, or zero where the window holds no valid input.
    pub factor: Vec<T>,
}

impl<T: Real> WindowScale<T> {
    pub fn is_valid(&self, i: usize) -> bool {
        self.factor[i] > T::zero()
    }

    pub fn to_mask(&self) -> MaskImage {
        MaskImage::new(
            self.width,
            self.height,
            (0..self.factor.len()).map(|i| self.is_valid(i)).collect(),
        )
        .expect("scale dims are valid")
    }
}

pub(crate) fn window_scale<T: Real>(layer: &PConvLayer<T>, mask: &MaskImage) -> WindowScale<T> {
    let (w, h) = mask.dims();
    let (ow, oh) = layer.output_dims(w, h);
    let k = layer.kernel_size as isize;
    let pad = k / 2;
    let mut factor = Vec::with_capacity(ow * oh);
    for oy in 0..oh {
        for ox in 0..ow {
            let (cy, cx) = ((oy * layer.stride) as isize, (ox * layer.stride) as isize);
            let (mut size, mut valid) = (0usize, 0usize);
            for ky in 0..k {
                let iy = cy + ky - pad;
                if iy < 0 || iy >= h as isize {
                    continue;
                }
                for kx in 0..k {
                    let ix = cx + kx - pad;
                    if ix < 0 || ix >= w as isize {
                        continue;
                    }
                    size += 1;
                    if mask.is_valid(ix as usize, iy as usize) {
                        valid += 1;
                    }
                }
            }
            factor.push(if valid == 0 {
                T::zero()
            } else {
                T::of_usize(size) / T::of_usize(valid)
            });
        }
    }
    WindowScale {
        width: ow,
        height: oh,
        factor,
    }
}

fn check_input<T: Real>(layer: &PConvLayer<T>, x: &FeatureMap<T>, m: &MaskImage) -> Result<(), InpaintError> {
    if (x.width, x.height) != m.dims() {
        return Err(InpaintError::ShapeMismatch(format!(
            "features are {}x{}, mask is {}x{}",
            x.width,
            x.height,
            m.width(),
            m.height()
        )));
    }
    if x.channels != layer.in_channels {
        return Err(InpaintError::ShapeMismatch(format!(
            "layer expects {} input channels, got {}",
            layer.in_channels, x.channels
        )));
    }
    Ok(())
}

/// Raw layer response before activation. `x` must already be zero at invalid positions.
pub(crate) fn pconv_apply<T: Real>(
    layer: &PConvLayer<T>,
    x: &FeatureMap<T>,
    scale: &WindowScale<T>,
) -> FeatureMap<T> {
    let (w, h) = (x.width, x.height);
    let (ow, oh) = (scale.width, scale.height);
    let k = layer.kernel_size;
    let pad = (k / 2) as isize;
    let mut out = FeatureMap::zeros(ow, oh, layer.out_channels);
    for o in 0..layer.out_channels {
        for oy in 0..oh {
            for ox in 0..ow {
                let p = oy * ow + ox;
                let f = scale.factor[p];
                if f == T::zero() {
                    continue;
                }
                let (cy, cx) = ((oy * layer.stride) as isize, (ox * layer.stride) as isize);
                let mut acc = T::zero();
                for i in 0..layer.in_channels {
                    let plane = x.plane(i);
                    for ky in 0..k {
                        let iy = cy + ky as isize - pad;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let row = &plane[iy as usize * w..][..w];
                        let wrow = &layer.weights[layer.weight_index(o, i, ky, 0)..][..k];
                        for (kx, &wt) in wrow.iter().enumerate() {
                            let ix = cx + kx as isize - pad;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            acc += wt * row[ix as usize];
                        }
                    }
                }
                out.values[o * ow * oh + p] = acc * f + layer.bias[o];
            }
        }
    }
    out
}

/// Gradients of one layer application, given `grad_out` for its raw response.
/// Accumulates into `grad_w` / `grad_b` and returns the gradient w.r.t. `x`.
pub(crate) fn pconv_backward<T: Real>(
    layer: &PConvLayer<T>,
    x: &FeatureMap<T>,
    scale: &WindowScale<T>,
    grad_out: &FeatureMap<T>,
    grad_w: &mut [T],
    grad_b: &mut [T],
) -> FeatureMap<T> {
    let (w, h) = (x.width, x.height);
    let (ow, oh) = (scale.width, scale.height);
    let k = layer.kernel_size;
    let pad = (k / 2) as isize;
    let mut grad_x = FeatureMap::zeros(w, h, x.channels);
    for (o, gb) in grad_b.iter_mut().enumerate() {
        for oy in 0..oh {
            for ox in 0..ow {
                let p = oy * ow + ox;
                let f = scale.factor[p];
                let g = grad_out.values[o * ow * oh + p];
                if f == T::zero() || g == T::zero() {
                    continue;
                }
                *gb += g;
                let gf = g * f;
                let (cy, cx) = ((oy * layer.stride) as isize, (ox * layer.stride) as isize);
                for i in 0..layer.in_channels {
                    for ky in 0..k {
                        let iy = cy + ky as isize - pad;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..k {
                            let ix = cx + kx as isize - pad;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let wi = layer.weight_index(o, i, ky, kx);
                            let xi = (i * h + iy as usize) * w + ix as usize;
                            grad_w[wi] += gf * x.values[xi];
                            grad_x.values[xi] += gf * layer.weights[wi];
                        }
                    }
                }
            }
        }
    }
    grad_x
}

/// One partial-convolution layer (no activation).
///
/// Returns the response and the updated mask. Locations whose window holds
/// no valid input produce `0` and are marked invalid.
pub fn pconv_forward<T: Real>(
    layer: &PConvLayer<T>,
    x: &FeatureMap<T>,
    m: &MaskImage,
) -> Result<(FeatureMap<T>, MaskImage), InpaintError> {
    layer.validate()?;
    check_input(layer, x, m)?;
    let scale = window_scale(layer, m);
    let out = pconv_apply(layer, &x.masked(m), &scale);
    Ok((out, scale.to_mask()))
}

/// Ordinary zero-padded convolution plus bias, for comparison.
pub fn conv_forward<T: Real>(layer: &PConvLayer<T>, x: &FeatureMap<T>) -> Result<FeatureMap<T>, InpaintError> {
    layer.validate()?;
    let all = MaskImage::all_valid(x.width, x.height);
    check_input(layer, x, &all)?;
    let (ow, oh) = layer.output_dims(x.width, x.height);
    let ones = WindowScale {
        width: ow,
        height: oh,
        factor: vec![T::one(); ow * oh],
    };
    Ok(pconv_apply(layer, x, &ones))
}
