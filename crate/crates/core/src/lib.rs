//! Occlusion-aware product image search.
//!
//! The pipeline pre-processes a query image (luminance equalization for
//! color input, unsharp masking plus histogram stretching for gray input),
//! restores masked holes by inpainting, describes the result with color and
//! edge-orientation histograms, assigns it to the nearest category centroid
//! and ranks catalog products by weighted cosine similarity.
//!
//! Numeric kernels are generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix the precision used by the service and CLI.

pub mod features;
pub mod imaging;
pub mod inpaint;
pub mod preprocess;
pub mod retrieval;
pub mod scalar;
pub mod store;
pub mod synth;

pub use features::{generate_metadata, similarity, Metadata, SimilarityWeights};
pub use imaging::{decode_image, decode_mask, encode_mask_png, encode_png, ImageBuffer, ImageError, MaskImage};
pub use inpaint::{Engine, InpaintError, InpaintRequest};
pub use preprocess::{ModeChoice, PreprocessError, PreprocessMode};
pub use retrieval::{CategoryChoice, RetrievalError};
pub use scalar::Real;
pub use store::{CatalogStore, ProductRecord, StoreError};

/// Scalar used for network inference and training.
pub type Scalar = f32;

pub type Kernel = preprocess::GaussianKernel<f64>;
pub type Gradient = preprocess::GradientField<f64>;
pub type Canny = preprocess::CannyParams<f64>;
pub type Features = inpaint::FeatureMap<Scalar>;
pub type Layer = inpaint::PConvLayer<Scalar>;
pub type Model = inpaint::PConvModel<Scalar>;
pub type Options = retrieval::PipelineOptions<Scalar>;
