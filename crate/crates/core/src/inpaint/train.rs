//! Desk-scale supervised training on synthetic rectangular holes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::feature_map::FeatureMap;
use super::model::{ModelGrads, PConvModel};
use super::InpaintError;
use crate::imaging::{ImageBuffer, MaskImage};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Seeds the per-sample hole placement.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            learning_rate: 0.05,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    /// Mean corpus loss before each epoch's update.
    pub epoch_losses: Vec<f64>,
    /// Mean corpus loss after the last update.
    pub final_loss: f64,
}

impl TrainReport {
    pub fn initial_loss(&self) -> f64 {
        self.epoch_losses.first().copied().unwrap_or(self.final_loss)
    }
}

/// One training example: clean target plus the hole to restore.
#[derive(Clone, Debug)]
pub struct TrainSample<T> {
    pub target: FeatureMap<T>,
    pub mask: MaskImage,
}

/// Random axis-aligned hole covering between a quarter and a half of each side.
pub fn random_rect_mask<R: Rng + ?Sized>(width: usize, height: usize, rng: &mut R) -> MaskImage {
    let hw = rng.random_range((width / 4).max(1)..=(width / 2).max(1));
    let hh = rng.random_range((height / 4).max(1)..=(height / 2).max(1));
    let x0 = rng.random_range(0..=width - hw);
    let y0 = rng.random_range(0..=height - hh);
    MaskImage::with_rect_hole(width, height, x0, y0, hw, hh)
}

/// Pair every corpus image with a seeded random rectangular hole.
pub fn make_samples<T: Real>(corpus: &[ImageBuffer], seed: u64) -> Result<Vec<TrainSample<T>>, InpaintError> {
    let first = corpus.first().ok_or(InpaintError::EmptyCorpus)?;
    let dims = (first.dims(), first.channels());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    corpus
        .iter()
        .map(|img| {
            if (img.dims(), img.channels()) != dims {
                return Err(InpaintError::ShapeMismatch(
                    "training images must share one size and channel count".into(),
                ));
            }
            Ok(TrainSample {
                target: FeatureMap::from_image(img),
                mask: random_rect_mask(img.width(), img.height(), &mut rng),
            })
        })
        .collect()
}

/// Mean absolute error over hole pixels (all channels) and its gradient
/// w.r.t. `output`. The gradient is zero at valid pixels.
pub fn hole_l1<T: Real>(output: &FeatureMap<T>, target: &FeatureMap<T>, mask: &MaskImage) -> (T, FeatureMap<T>) {
    let holes = mask.hole_count() * output.channels;
    let mut grad = FeatureMap::zeros(output.width, output.height, output.channels);
    if holes == 0 {
        return (T::zero(), grad);
    }
    let inv = T::one() / T::of_usize(holes);
    let plane = output.width * output.height;
    let mut loss = T::zero();
    for c in 0..output.channels {
        for (p, &ok) in mask.as_slice().iter().enumerate() {
            if ok {
                continue;
            }
            let i = c * plane + p;
            let d = output.values[i] - target.values[i];
            loss += d.abs();
            grad.values[i] = if d > T::zero() {
                inv
            } else if d < T::zero() {
                -inv
            } else {
                T::zero()
            };
        }
    }
    (loss * inv, grad)
}

/// Loss of `model` on one sample, with parameter gradients.
pub fn sample_loss_and_grads<T: Real>(
    model: &PConvModel<T>,
    sample: &TrainSample<T>,
) -> Result<(T, ModelGrads<T>), InpaintError> {
    let pass = model.forward(&sample.target, &sample.mask)?;
    let (loss, grad_out) = hole_l1(&pass.output, &sample.target, &sample.mask);
    Ok((loss, model.backward(&pass, &grad_out)))
}

/// Mean sample loss without gradients.
pub fn corpus_loss<T: Real>(model: &PConvModel<T>, samples: &[TrainSample<T>]) -> Result<f64, InpaintError> {
    let mut total = 0.0;
    for s in samples {
        let pass = model.forward(&s.target, &s.mask)?;
        total += hole_l1(&pass.output, &s.target, &s.mask).0.as_f64();
    }
    Ok(total / samples.len() as f64)
}

/// Per-sample losses and gradients, in sample order. Samples are spread over
/// worker threads; summation order stays fixed so results are deterministic.
fn per_sample<T: Real>(
    model: &PConvModel<T>,
    samples: &[TrainSample<T>],
) -> Vec<Result<(T, ModelGrads<T>), InpaintError>> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(samples.len()).max(1);
    let chunk = samples.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = samples
            .chunks(chunk)
            .map(|part| scope.spawn(move || part.iter().map(|s| sample_loss_and_grads(model, s)).collect::<Vec<_>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("training worker panicked"))
            .collect()
    })
}

fn apply_step<T: Real>(model: &mut PConvModel<T>, grads: &ModelGrads<T>, lr: T) {
    for (layer, g) in model.layers_mut().zip(&grads.layers) {
        for (w, d) in layer.conv.weights.iter_mut().zip(&g.weights) {
            *w -= lr * *d;
        }
        for (b, d) in layer.conv.bias.iter_mut().zip(&g.bias) {
            *b -= lr * *d;
        }
    }
}

/// Full-batch gradient descent on hole-restricted L1 loss.
pub fn train_toy<T: Real>(
    model: &PConvModel<T>,
    corpus: &[ImageBuffer],
    config: &TrainConfig,
) -> Result<(PConvModel<T>, TrainReport), InpaintError> {
    if corpus.is_empty() {
        return Err(InpaintError::EmptyCorpus);
    }
    model.validate()?;
    let samples = make_samples::<T>(corpus, config.seed)?;
    let mut model = model.clone();
    let mut report = TrainReport::default();
    let lr = T::of(config.learning_rate);
    let scale = T::one() / T::of_usize(samples.len());
    for _ in 0..config.epochs {
        let mut total = ModelGrads::zeros_like(&model);
        let mut loss = 0.0;
        for result in per_sample(&model, &samples) {
            let (l, g) = result?;
            loss += l.as_f64();
            total.add_assign(&g);
        }
        total.scale(scale);
        report.epoch_losses.push(loss / samples.len() as f64);
        apply_step(&mut model, &total, lr);
    }
    report.final_loss = corpus_loss(&model, &samples)?;
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texture(seed: u64, size: usize) -> ImageBuffer {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (fx, fy) = (rng.random_range(0.1..0.6), rng.random_range(0.1..0.6));
        let base: [f64; 3] = [rng.random_range(40.0..200.0), rng.random_range(40.0..200.0), rng.random_range(40.0..200.0)];
        ImageBuffer::rgb_from_fn(size, size, |x, y| {
            let s = ((x as f64 * fx).sin() + (y as f64 * fy).cos()) * 30.0;
            [0, 1, 2].map(|c| (base[c] + s).round().clamp(0.0, 255.0) as u8)
        })
    }

    #[test]
    fn zero_epochs_returns_same_model() {
        let model = PConvModel::<f32>::with_widths(3, &[4], 3, 1);
        let corpus = vec![texture(1, 8)];
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let (trained, report) = train_toy(&model, &corpus, &cfg).unwrap();
        assert_eq!(trained, model);
        assert!(report.epoch_losses.is_empty());
    }

    #[test]
    fn empty_corpus() {
        let model = PConvModel::<f32>::single_layer(3, 3, 1);
        assert!(matches!(
            train_toy(&model, &[], &TrainConfig::default()),
            Err(InpaintError::EmptyCorpus)
        ));
    }

    #[test]
    fn mixed_sizes_rejected() {
        let model = PConvModel::<f32>::single_layer(3, 3, 1);
        let corpus = vec![texture(1, 8), texture(2, 9)];
        assert!(matches!(
            train_toy(&model, &corpus, &TrainConfig::default()),
            Err(InpaintError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn hole_loss_ignores_valid_pixels() {
        let t = FeatureMap::<f64>::zeros(4, 4, 1);
        let mut o = t.clone();
        o.values.fill(1.0);
        let m = MaskImage::with_rect_hole(4, 4, 0, 0, 2, 1);
        let (loss, g) = hole_l1(&o, &t, &m);
        assert_eq!(loss, 1.0);
        assert_eq!(g.values.iter().filter(|&&v| v != 0.0).count(), 2);
        assert_eq!(g.values[0], 0.5);
    }

    #[test]
    fn gradient_matches_finite_differences_single_layer() {
        let corpus = [texture(3, 10)];
        let samples = make_samples::<f64>(&corpus, 7).unwrap();
        let model = PConvModel::<f64>::single_layer(3, 3, 21);
        let (_, grads) = sample_loss_and_grads(&model, &samples[0]).unwrap();
        check_gradients(&model, &samples[0], &grads, 0..1, 40);
    }

    #[test]
    fn gradient_matches_finite_differences_multi_layer() {
        let corpus = [texture(4, 12)];
        let samples = make_samples::<f64>(&corpus, 8).unwrap();
        let model = PConvModel::<f64>::with_widths(3, &[4, 6], 3, 22);
        let (_, grads) = sample_loss_and_grads(&model, &samples[0]).unwrap();
        check_gradients(&model, &samples[0], &grads, 0..model.layers().count(), 12);
    }

    /// Central differences on `per_layer` evenly spaced weights plus every bias.
    fn check_gradients(
        model: &PConvModel<f64>,
        sample: &TrainSample<f64>,
        grads: &ModelGrads<f64>,
        layers: std::ops::Range<usize>,
        per_layer: usize,
    ) {
        let eps = 1e-6;
        let loss_at = |m: &PConvModel<f64>| {
            let pass = m.forward(&sample.target, &sample.mask).unwrap();
            hole_l1(&pass.output, &sample.target, &sample.mask).0
        };
        let mut checked = 0;
        for li in layers {
            let n = model.layers().nth(li).unwrap().conv.weights.len();
            let step = (n / per_layer).max(1);
            let nb = model.layers().nth(li).unwrap().conv.bias.len();
            let picks = (0..n).step_by(step).map(|i| (false, i)).chain((0..nb).map(|i| (true, i)));
            for (is_bias, wi) in picks {
                let perturbed = |delta: f64| {
                    let mut m = model.clone();
                    let layer = m.layers_mut().nth(li).unwrap();
                    let slot = if is_bias {
                        &mut layer.conv.bias[wi]
                    } else {
                        &mut layer.conv.weights[wi]
                    };
                    *slot += delta;
                    loss_at(&m)
                };
                let numeric = (perturbed(eps) - perturbed(-eps)) / (2.0 * eps);
                let analytic = if is_bias {
                    grads.layers[li].bias[wi]
                } else {
                    grads.layers[li].weights[wi]
                };
                let denom = numeric.abs().max(analytic.abs()).max(1e-8);
                assert!(
                    (numeric - analytic).abs() / denom < 1e-4,
                    "layer {li} {} {wi}: analytic {analytic} numeric {numeric}",
                    if is_bias { "bias" } else { "weight" }
                );
                checked += 1;
            }
        }
        assert!(checked > 0);
    }
}
