//! Model files.
//!
//! A model is stored as one UTF-8 JSON document:
//!
//! ```json
//! {
//!   "format": "occu-pconv",
//!   "version": 1,
//!   "dtype": "f32",
//!   "channels": 3,
//!   "encoder": [
//!     {"in": 3, "out": 16, "kernel": 3, "stride": 2, "activation": "relu",
//!      "weights": [...], "bias": [...]}
//!   ],
//!   "decoder": [...]
//! }
//! ```
//!
//! `weights` is the flat `[out][in][ky][kx]` array. Numbers are written with
//! shortest round-trip formatting, so a save/load cycle is bit-exact for the
//! stored `dtype`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Activation, ModelLayer, PConvModel};
use super::pconv::PConvLayer;
use super::InpaintError;
use crate::scalar::Real;

pub const MODEL_FORMAT: &str = "occu-pconv";
pub const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct FileLayer {
    #[serde(rename = "in")]
    in_channels: usize,
    #[serde(rename = "out")]
    out_channels: usize,
    kernel: usize,
    stride: usize,
    activation: Activation,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct FileModel {
    format: String,
    version: u32,
    dtype: String,
    channels: usize,
    encoder: Vec<FileLayer>,
    decoder: Vec<FileLayer>,
}

fn to_file<T: Real>(l: &ModelLayer<T>) -> FileLayer {
    FileLayer {
        in_channels: l.conv.in_channels,
        out_channels: l.conv.out_channels,
        kernel: l.conv.kernel_size,
        stride: l.conv.stride,
        activation: l.activation,
        weights: l.conv.weights.iter().map(|w| w.as_f64()).collect(),
        bias: l.conv.bias.iter().map(|w| w.as_f64()).collect(),
    }
}

fn from_file<T: Real>(l: FileLayer) -> ModelLayer<T> {
    ModelLayer {
        conv: PConvLayer {
            in_channels: l.in_channels,
            out_channels: l.out_channels,
            kernel_size: l.kernel,
            stride: l.stride,
            weights: l.weights.into_iter().map(T::of).collect(),
            bias: l.bias.into_iter().map(T::of).collect(),
        },
        activation: l.activation,
    }
}

pub fn write_model<T: Real, W: Write>(model: &PConvModel<T>, writer: W) -> Result<(), InpaintError> {
    let file = FileModel {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        dtype: T::NAME.into(),
        channels: model.channels,
        encoder: model.encoder.iter().map(to_file).collect(),
        decoder: model.decoder.iter().map(to_file).collect(),
    };
    serde_json::to_writer(writer, &file).map_err(|e| InpaintError::ModelFormat(e.to_string()))
}

/// Parse and validate a model. Files of either dtype load into any `T`.
pub fn read_model<T: Real, R: Read>(reader: R) -> Result<PConvModel<T>, InpaintError> {
    let file: FileModel = serde_json::from_reader(reader).map_err(|e| InpaintError::ModelFormat(e.to_string()))?;
    if file.format != MODEL_FORMAT {
        return Err(InpaintError::ModelFormat(format!("unexpected format tag {:?}", file.format)));
    }
    if file.version != MODEL_VERSION {
        return Err(InpaintError::ModelFormat(format!("unsupported version {}", file.version)));
    }
    let model = PConvModel {
        channels: file.channels,
        encoder: file.encoder.into_iter().map(from_file).collect(),
        decoder: file.decoder.into_iter().map(from_file).collect(),
    };
    model.validate()?;
    Ok(model)
}

pub fn save_model<T: Real>(model: &PConvModel<T>, path: &Path) -> Result<(), InpaintError> {
    let mut buf = Vec::new();
    write_model(model, &mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_model<T: Real>(path: &Path) -> Result<PConvModel<T>, InpaintError> {
    read_model(fs::File::open(path)?)
}
