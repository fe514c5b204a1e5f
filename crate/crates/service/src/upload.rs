use std::collections::HashMap;

use axum::extract::multipart::{Multipart, MultipartError};
use axum::http::StatusCode;

use occu_core::{decode_image, decode_mask, Engine, ImageBuffer, MaskImage};

use crate::error::ApiError;

/// Largest accepted width or height.
pub const MAX_DIMENSION: u32 = 4096;

/// Fields of a multipart form, read fully into memory.
#[derive(Debug, Default)]
pub struct Upload {
    files: HashMap<String, Vec<u8>>,
    text: HashMap<String, String>,
}

fn multipart_error(e: MultipartError) -> ApiError {
    let status = e.status();
    let err = ApiError::malformed(format!("invalid multipart body: {}", e.body_text()));
    if status == StatusCode::PAYLOAD_TOO_LARGE {
        err.with_status(status)
    } else {
        err
    }
}

impl Upload {
    pub async fn read(mut form: Multipart) -> Result<Self, ApiError> {
        let mut up = Upload::default();
        while let Some(field) = form.next_field().await.map_err(multipart_error)? {
            let Some(name) = field.name().map(str::to_owned) else {
                continue;
            };
            let is_file = field.file_name().is_some() || matches!(name.as_str(), "image" | "mask");
            let bytes = field.bytes().await.map_err(multipart_error)?;
            if is_file {
                up.files.insert(name, bytes.to_vec());
            } else {
                let text = String::from_utf8(bytes.to_vec())
                    .map_err(|_| ApiError::malformed(format!("field {name:?} is not UTF-8 text")))?;
                up.text.insert(name, text.trim().to_owned());
            }
        }
        Ok(up)
    }

    pub fn text(&self, name: &str) -> Option<&str> {
        self.text.get(name).map(String::as_str).filter(|s| !s.is_empty())
    }

    pub fn image(&self) -> Result<ImageBuffer, ApiError> {
        let bytes = self
            .files
            .get("image")
            .ok_or_else(|| ApiError::malformed("missing form field \"image\""))?;
        check_dimensions(bytes)?;
        Ok(decode_image(bytes)?)
    }

    /// The optional mask, checked against `image`.
    pub fn mask_for(&self, image: &ImageBuffer) -> Result<Option<MaskImage>, ApiError> {
        let Some(bytes) = self.files.get("mask").filter(|b| !b.is_empty()) else {
            return Ok(None);
        };
        check_dimensions(bytes)?;
        let mask = decode_mask(bytes)?;
        mask.check_pairs_with(image)?;
        Ok(Some(mask))
    }

    pub fn engine(&self, default: Engine) -> Result<Engine, ApiError> {
        match self.text("engine") {
            None => Ok(default),
            Some(s) => s.parse().map_err(ApiError::malformed),
        }
    }

    pub fn k(&self, default: usize) -> Result<usize, ApiError> {
        match self.text("k") {
            None => Ok(default),
            Some(s) => match s.parse::<usize>() {
                Ok(k) if k >= 1 => Ok(k),
                _ => Err(ApiError::malformed(format!("k must be a positive integer, got {s:?}"))),
            },
        }
    }
}

/// Reject oversized PNGs from their header before decoding.
fn check_dimensions(bytes: &[u8]) -> Result<(), ApiError> {
    const SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";
    if bytes.len() >= 24 && bytes.starts_with(SIGNATURE) && &bytes[12..16] == b"IHDR" {
        let w = u32::from_be_bytes(bytes[16..20].try_into().expect("4 bytes"));
        let h = u32::from_be_bytes(bytes[20..24].try_into().expect("4 bytes"));
        if w > MAX_DIMENSION || h > MAX_DIMENSION {
            return Err(ApiError::malformed(format!(
                "image is {w}x{h}; the limit is {MAX_DIMENSION}x{MAX_DIMENSION}"
            )));
        }
    }
    Ok(())
}
