//! Hole restoration. Two engines share one request type: a partial-convolution
//! network (masked, renormalized convolutions in an encoder/decoder) and a
//! deterministic harmonic diffusion fill that needs no weights.

mod diffusion;
mod feature_map;
mod model;
mod pconv;
mod persist;
mod train;

pub use diffusion::{diffusion_inpaint, diffusion_inpaint_traced, DiffusionTrace};
pub use feature_map::{upsample_mask, FeatureMap};
pub use model::{
    pconv_inpaint, Activation, ForwardPass, LayerGrad, LayerTape, ModelGrads, ModelLayer, PConvModel,
    DESK_SCALE_WIDTHS, LEAKY_SLOPE,
};
pub use pconv::{conv_forward, pconv_forward, PConvLayer};
pub use persist::{load_model, read_model, save_model, write_model, MODEL_FORMAT, MODEL_VERSION};
pub use train::{
    corpus_loss, hole_l1, make_samples, random_rect_mask, sample_loss_and_grads, train_toy, TrainConfig,
    TrainReport, TrainSample,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imaging::{ImageBuffer, MaskImage};
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum InpaintError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("mask has no valid pixels")]
    EmptyMask,
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Pconv,
    #[default]
    Diffusion,
}

impl Engine {
    pub fn as_str(self) -> &'static str {
        match self {
            Engine::Pconv => "pconv",
            Engine::Diffusion => "diffusion",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Engine {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pconv" => Ok(Engine::Pconv),
            "diffusion" => Ok(Engine::Diffusion),
            other => Err(format!("unknown engine {other:?} (expected pconv or diffusion)")),
        }
    }
}

pub const DEFAULT_DIFFUSION_ITERS: usize = 2000;
/// Mean absolute change, in gray levels, below which diffusion stops.
pub const DEFAULT_DIFFUSION_TOL: f64 = 0.05;
/// Seed of the untrained network used when no weights are supplied.
pub const DEFAULT_MODEL_SEED: u64 = 0;

#[derive(Clone, Debug)]
pub struct InpaintRequest {
    pub image: ImageBuffer,
    pub mask: MaskImage,
    pub engine: Engine,
    pub diffusion_iters: usize,
    pub diffusion_tol: f64,
}

impl InpaintRequest {
    pub fn new(image: ImageBuffer, mask: MaskImage) -> Self {
        Self {
            image,
            mask,
            engine: Engine::default(),
            diffusion_iters: DEFAULT_DIFFUSION_ITERS,
            diffusion_tol: DEFAULT_DIFFUSION_TOL,
        }
    }

    pub fn with_engine(mut self, engine: Engine) -> Self {
        self.engine = engine;
        self
    }

    pub fn validate(&self) -> Result<(), InpaintError> {
        if self.image.dims() != self.mask.dims() {
            let (iw, ih) = self.image.dims();
            let (mw, mh) = self.mask.dims();
            return Err(InpaintError::ShapeMismatch(format!("image is {iw}x{ih}, mask is {mw}x{mh}")));
        }
        if self.mask.valid_count() == 0 {
            return Err(InpaintError::EmptyMask);
        }
        Ok(())
    }
}

/// Fraction of valid pixels.
pub fn mask_coverage(mask: &MaskImage) -> f64 {
    mask.coverage()
}

/// Run the engine named in the request. The pconv engine uses `model` when
/// given, otherwise a seeded untrained desk-scale network.
pub fn inpaint<T: Real>(req: &InpaintRequest, model: Option<&PConvModel<T>>) -> Result<ImageBuffer, InpaintError> {
    match req.engine {
        Engine::Diffusion => diffusion_inpaint(req),
        Engine::Pconv => match model {
            Some(m) => pconv_inpaint(req, m),
            None => pconv_inpaint(req, &PConvModel::<T>::desk_scale(req.image.channels(), DEFAULT_MODEL_SEED)),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coverage_counts() {
        assert_eq!(mask_coverage(&MaskImage::all_valid(4, 4)), 1.0);
        assert_eq!(mask_coverage(&MaskImage::all_holes(4, 4)), 0.0);
        assert_eq!(mask_coverage(&MaskImage::with_rect_hole(10, 10, 2, 2, 5, 5)), 0.75);
    }

    #[test]
    fn request_validation() {
        let img = ImageBuffer::filled(4, 3, 1, 9);
        assert!(matches!(
            InpaintRequest::new(img.clone(), MaskImage::all_valid(3, 4)).validate(),
            Err(InpaintError::ShapeMismatch(_))
        ));
        assert!(matches!(
            InpaintRequest::new(img.clone(), MaskImage::all_holes(4, 3)).validate(),
            Err(InpaintError::EmptyMask)
        ));
        for engine in [Engine::Pconv, Engine::Diffusion] {
            let req = InpaintRequest::new(img.clone(), MaskImage::all_holes(4, 3)).with_engine(engine);
            assert!(matches!(inpaint::<f32>(&req, None), Err(InpaintError::EmptyMask)));
        }
    }

    #[test]
    fn engine_names() {
        assert_eq!("PCONV".parse::<Engine>().unwrap(), Engine::Pconv);
        assert_eq!(Engine::default().to_string(), "diffusion");
        assert!("gan".parse::<Engine>().is_err());
    }

    #[test]
    fn all_valid_mask_is_identity_for_both_engines() {
        let img = ImageBuffer::rgb_from_fn(9, 7, |x, y| [(x * 20) as u8, (y * 30) as u8, 99]);
        for engine in [Engine::Pconv, Engine::Diffusion] {
            let req = InpaintRequest::new(img.clone(), MaskImage::all_valid(9, 7)).with_engine(engine);
            assert_eq!(inpaint::<f32>(&req, None).unwrap(), img);
        }
    }
}
