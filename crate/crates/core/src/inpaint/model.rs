//! U-shaped partial-convolution network.
//!
//! The encoder is a chain of (usually stride-2) layers. The first
//! `encoder.len()` decoder layers each upsample the running features to the
//! size of the mirrored encoder depth (nearest neighbour), concatenate that
//! depth's features, and apply a stride-1 layer; any further decoder layers
//! are plain stride-1 refinements. Depth 0 is the masked input image, so a
//! model with no encoder and a single decoder layer is a one-layer network.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::feature_map::{nearest_source, upsample_mask, FeatureMap};
use super::pconv::{pconv_apply, pconv_backward, window_scale, PConvLayer, WindowScale};
use super::{InpaintError, InpaintRequest};
use crate::imaging::{ImageBuffer, MaskImage};
use crate::scalar::{quantize, Real};

pub const LEAKY_SLOPE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    LeakyRelu,
    None,
}

impl Activation {
    #[inline]
    pub fn apply<T: Real>(self, v: T) -> T {
        match self {
            Activation::Relu => v.max(T::zero()),
            Activation::LeakyRelu if v < T::zero() => v * T::of(LEAKY_SLOPE),
            Activation::LeakyRelu | Activation::None => v,
        }
    }

    #[inline]
    pub fn derivative<T: Real>(self, pre: T) -> T {
        match self {
            Activation::None => T::one(),
            _ if pre > T::zero() => T::one(),
            Activation::Relu => T::zero(),
            Activation::LeakyRelu => T::of(LEAKY_SLOPE),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelLayer<T> {
    pub conv: PConvLayer<T>,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PConvModel<T> {
    /// Image channels consumed and produced (1 or 3).
    pub channels: usize,
    pub encoder: Vec<ModelLayer<T>>,
    pub decoder: Vec<ModelLayer<T>>,
}

/// Channel widths of the default encoder.
pub const DESK_SCALE_WIDTHS: [usize; 3] = [16, 32, 64];

impl<T: Real> PConvModel<T> {
    /// Default topology: three stride-2 encoder layers (16/32/64 channels,
    /// 3x3 kernels) and a mirrored decoder.
    pub fn desk_scale(channels: usize, seed: u64) -> Self {
        Self::with_widths(channels, &DESK_SCALE_WIDTHS, 3, seed)
    }

    /// Encoder of `widths.len()` stride-2 layers with the given channel
    /// widths, mirrored by skip-connected decoder layers. ReLU in the
    /// encoder, leaky ReLU in the decoder, linear output.
    pub fn with_widths(channels: usize, widths: &[usize], kernel_size: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut encoder = Vec::with_capacity(widths.len());
        let mut depth_channels = vec![channels];
        for &w in widths {
            let input = *depth_channels.last().expect("non-empty");
            encoder.push(ModelLayer {
                conv: PConvLayer::random(input, w, kernel_size, 2, &mut rng),
                activation: Activation::Relu,
            });
            depth_channels.push(w);
        }
        let n = widths.len();
        let mut decoder = Vec::new();
        let mut current = depth_channels[n];
        if n == 0 {
            decoder.push(ModelLayer {
                conv: PConvLayer::random(channels, channels, kernel_size, 1, &mut rng),
                activation: Activation::None,
            });
        }
        for j in 0..n {
            let skip = depth_channels[n - 1 - j];
            let last = j + 1 == n;
            let out = if last { channels } else { skip };
            decoder.push(ModelLayer {
                conv: PConvLayer::random(current + skip, out, kernel_size, 1, &mut rng),
                activation: if last {
                    Activation::None
                } else {
                    Activation::LeakyRelu
                },
            });
            current = out;
        }
        Self {
            channels,
            encoder,
            decoder,
        }
    }

    /// A single stride-1 linear layer mapping the image to itself.
    pub fn single_layer(channels: usize, kernel_size: usize, seed: u64) -> Self {
        Self::with_widths(channels, &[], kernel_size, seed)
    }

    pub fn layers(&self) -> impl Iterator<Item = &ModelLayer<T>> {
        self.encoder.iter().chain(&self.decoder)
    }

    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut ModelLayer<T>> {
        self.encoder.iter_mut().chain(self.decoder.iter_mut())
    }

    pub fn parameter_count(&self) -> usize {
        self.layers().map(|l| l.conv.parameter_count()).sum()
    }

    pub fn validate(&self) -> Result<(), InpaintError> {
        let bad = |msg: String| Err(InpaintError::InvalidModel(msg));
        if self.channels != 1 && self.channels != 3 {
            return bad(format!("model must have 1 or 3 image channels, got {}", self.channels));
        }
        let n = self.encoder.len();
        if self.decoder.len() < n.max(1) {
            return bad(format!(
                "decoder needs at least {} layers, has {}",
                n.max(1),
                self.decoder.len()
            ));
        }
        let mut depth_channels = vec![self.channels];
        for (i, l) in self.encoder.iter().enumerate() {
            l.conv.validate()?;
            if l.conv.in_channels != depth_channels[i] {
                return bad(format!(
                    "encoder layer {i} expects {} channels, previous depth has {}",
                    l.conv.in_channels, depth_channels[i]
                ));
            }
            depth_channels.push(l.conv.out_channels);
        }
        let mut current = depth_channels[n];
        for (j, l) in self.decoder.iter().enumerate() {
            l.conv.validate()?;
            if l.conv.stride != 1 {
                return bad(format!("decoder layer {j} must have stride 1"));
            }
            let expected = if j < n {
                current + depth_channels[n - 1 - j]
            } else {
                current
            };
            if l.conv.in_channels != expected {
                return bad(format!(
                    "decoder layer {j} expects {} channels, gets {expected}",
                    l.conv.in_channels
                ));
            }
            current = l.conv.out_channels;
        }
        if current != self.channels {
            return bad(format!(
                "decoder produces {current} channels, image has {}",
                self.channels
            ));
        }
        Ok(())
    }

    /// Run the network, keeping what backpropagation needs.
    pub fn forward(&self, x: &FeatureMap<T>, mask: &MaskImage) -> Result<ForwardPass<T>, InpaintError> {
        self.validate()?;
        if x.channels != self.channels {
            return Err(InpaintError::ShapeMismatch(format!(
                "model expects {} channels, image has {}",
                self.channels, x.channels
            )));
        }
        if (x.width, x.height) != mask.dims() {
            return Err(InpaintError::ShapeMismatch(format!(
                "image is {}x{}, mask is {}x{}",
                x.width,
                x.height,
                mask.width(),
                mask.height()
            )));
        }
        let n = self.encoder.len();
        let mut depths = vec![(x.masked(mask), mask.clone())];
        let mut tapes = Vec::with_capacity(n + self.decoder.len());
        for layer in &self.encoder {
            let (input, in_mask) = depths.last().expect("non-empty");
            let (tape, out_mask) = run_layer(layer, input.clone(), in_mask);
            depths.push((tape.output.clone(), out_mask));
            tapes.push(tape);
        }
        let (mut current, mut current_mask) = depths[n].clone();
        for (j, layer) in self.decoder.iter().enumerate() {
            let (input, in_mask) = if j < n {
                let (skip, skip_mask) = &depths[n - 1 - j];
                let up = current.upsample_nearest(skip.width, skip.height);
                let up_mask = upsample_mask(&current_mask, skip.width, skip.height);
                let union = MaskImage::from_fn(skip.width, skip.height, |x, y| {
                    up_mask.is_valid(x, y) || skip_mask.is_valid(x, y)
                });
                (FeatureMap::concat(&up, skip), union)
            } else {
                (current, current_mask)
            };
            let (tape, out_mask) = run_layer(layer, input, &in_mask);
            current = tape.output.clone();
            current_mask = out_mask;
            tapes.push(tape);
        }
        Ok(ForwardPass {
            tapes,
            output: current,
            output_mask: current_mask,
        })
    }

    /// Gradients of a scalar loss given its gradient w.r.t. the network output.
    pub fn backward(&self, pass: &ForwardPass<T>, grad_output: &FeatureMap<T>) -> ModelGrads<T> {
        let n = self.encoder.len();
        let mut grads = ModelGrads::zeros_like(self);
        let mut skip_grads: Vec<Option<FeatureMap<T>>> = vec![None; n];
        let mut grad = grad_output.clone();
        for j in (0..self.decoder.len()).rev() {
            let layer = &self.decoder[j];
            let tape = &pass.tapes[n + j];
            let grad_in = layer_backward(layer, tape, &grad, &mut grads.layers[n + j]);
            if j < n {
                let d = n - 1 - j;
                // Channels [0, up) came from the upsampled running features.
                let up_channels = tape.input.channels - skip_channel_count(self, d);
                let plane = grad_in.width * grad_in.height;
                let (up_part, skip_part) = grad_in.values.split_at(up_channels * plane);
                skip_grads[d] = Some(FeatureMap {
                    width: grad_in.width,
                    height: grad_in.height,
                    channels: grad_in.channels - up_channels,
                    values: skip_part.to_vec(),
                });
                let prev = if j == 0 {
                    &pass.tapes[n - 1].output
                } else {
                    &pass.tapes[n + j - 1].output
                };
                let (pw, ph) = (prev.width, prev.height);
                grad = downsample_adjoint(up_part, up_channels, grad_in.width, grad_in.height, pw, ph);
            } else {
                grad = grad_in;
            }
        }
        for i in (0..n).rev() {
            // `grad` is w.r.t. depth i + 1, the output of encoder layer i.
            if let Some(Some(skip)) = skip_grads.get(i + 1) {
                for (g, s) in grad.values.iter_mut().zip(&skip.values) {
                    *g += *s;
                }
            }
            let layer = &self.encoder[i];
            grad = layer_backward(layer, &pass.tapes[i], &grad, &mut grads.layers[i]);
        }
        grads
    }
}

fn skip_channel_count<T: Real>(model: &PConvModel<T>, depth: usize) -> usize {
    if depth == 0 {
        model.channels
    } else {
        model.encoder[depth - 1].conv.out_channels
    }
}

/// One layer's forward record.
#[derive(Clone, Debug)]
pub struct LayerTape<T> {
    /// Masked input actually convolved.
    pub input: FeatureMap<T>,
    pub(crate) scale: WindowScale<T>,
    /// Response before activation.
    pub pre: FeatureMap<T>,
    pub output: FeatureMap<T>,
}

#[derive(Clone, Debug)]
pub struct ForwardPass<T> {
    pub tapes: Vec<LayerTape<T>>,
    pub output: FeatureMap<T>,
    pub output_mask: MaskImage,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrad<T> {
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

/// Parameter gradients, encoder layers first, then decoder layers.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelGrads<T> {
    pub layers: Vec<LayerGrad<T>>,
}

impl<T: Real> ModelGrads<T> {
    pub fn zeros_like(model: &PConvModel<T>) -> Self {
        Self {
            layers: model
                .layers()
                .map(|l| LayerGrad {
                    weights: vec![T::zero(); l.conv.weights.len()],
                    bias: vec![T::zero(); l.conv.bias.len()],
                })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += *y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += *y;
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|v| *v *= s);
        }
    }
}

fn run_layer<T: Real>(layer: &ModelLayer<T>, input: FeatureMap<T>, in_mask: &MaskImage) -> (LayerTape<T>, MaskImage) {
    let scale = window_scale(&layer.conv, in_mask);
    let pre = pconv_apply(&layer.conv, &input, &scale);
    let mut output = pre.clone();
    output
        .values
        .iter_mut()
        .for_each(|v| *v = layer.activation.apply(*v));
    let mask = scale.to_mask();
    (
        LayerTape {
            input,
            scale,
            pre,
            output,
        },
        mask,
    )
}

fn layer_backward<T: Real>(
    layer: &ModelLayer<T>,
    tape: &LayerTape<T>,
    grad_output: &FeatureMap<T>,
    grad: &mut LayerGrad<T>,
) -> FeatureMap<T> {
    let mut grad_pre = grad_output.clone();
    for (g, &p) in grad_pre.values.iter_mut().zip(&tape.pre.values) {
        *g *= layer.activation.derivative(p);
    }
    pconv_backward(
        &layer.conv,
        &tape.input,
        &tape.scale,
        &grad_pre,
        &mut grad.weights,
        &mut grad.bias,
    )
}

/// Adjoint of nearest-neighbour upsampling from `(sw, sh)` to `(w, h)`.
fn downsample_adjoint<T: Real>(grad: &[T], channels: usize, w: usize, h: usize, sw: usize, sh: usize) -> FeatureMap<T> {
    let mut out = FeatureMap::zeros(sw, sh, channels);
    for c in 0..channels {
        for y in 0..h {
            let sy = nearest_source(y, sh, h);
            for x in 0..w {
                let sx = nearest_source(x, sw, w);
                out.values[(c * sh + sy) * sw + sx] += grad[(c * h + y) * w + x];
            }
        }
    }
    out
}

/// Inpaint with a partial-convolution network. Valid pixels are copied
/// verbatim; only hole pixels come from the network.
pub fn pconv_inpaint<T: Real>(req: &InpaintRequest, model: &PConvModel<T>) -> Result<ImageBuffer, InpaintError> {
    req.validate()?;
    let x = FeatureMap::<T>::from_image(&req.image);
    let pass = model.forward(&x, &req.mask)?;
    Ok(composite(&req.image, &req.mask, |c, px, py| {
        let v = pass.output.get(c, px, py).max(T::zero()).min(T::one());
        quantize(v * T::of(255.0))
    }))
}

/// Keep valid pixels of `image`; fill holes from `fill(channel, x, y)`.
pub(crate) fn composite(
    image: &ImageBuffer,
    mask: &MaskImage,
    mut fill: impl FnMut(usize, usize, usize) -> u8,
) -> ImageBuffer {
    let mut out = image.clone();
    for y in 0..image.height() {
        for x in 0..image.width() {
            if !mask.is_valid(x, y) {
                for c in 0..image.channels() {
                    out.set(x, y, c, fill(c, x, y));
                }
            }
        }
    }
    out
}
