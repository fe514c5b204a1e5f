use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

use occu_core::inpaint::InpaintError;
use occu_core::retrieval::RetrievalError;
use occu_core::{ImageError, PreprocessError, StoreError};

/// Machine-readable error class carried in every error body.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    MalformedImage,
    DimMismatch,
    EmptyStore,
    UnknownCategory,
    NotFound,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::MalformedImage | ErrorCode::DimMismatch => StatusCode::BAD_REQUEST,
            ErrorCode::EmptyStore => StatusCode::CONFLICT,
            ErrorCode::UnknownCategory => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::NotFound => StatusCode::NOT_FOUND,
            ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

/// `{"code": ..., "message": ...}` with the code's HTTP status.
#[derive(Debug, Serialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(skip)]
    pub status: StatusCode,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            status: code.status(),
        }
    }

    pub fn malformed(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::MalformedImage, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Internal, message)
    }

    /// Keep the code but answer with a different status (oversized bodies).
    pub fn with_status(mut self, status: StatusCode) -> Self {
        self.status = status;
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.code == ErrorCode::Internal {
            tracing::error!(message = %self.message, "internal error");
        }
        (self.status, Json(self)).into_response()
    }
}

impl From<ImageError> for ApiError {
    fn from(e: ImageError) -> Self {
        match e {
            ImageError::DimMismatch { .. } => ApiError::new(ErrorCode::DimMismatch, e.to_string()),
            _ => ApiError::malformed(e.to_string()),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownCategory(_) => ApiError::new(ErrorCode::UnknownCategory, e.to_string()),
            StoreError::NotFound(_) => ApiError::new(ErrorCode::NotFound, e.to_string()),
            StoreError::InvalidId(_) => ApiError::new(ErrorCode::NotFound, e.to_string()),
            _ => ApiError::internal(e.to_string()),
        }
    }
}

impl From<InpaintError> for ApiError {
    fn from(e: InpaintError) -> Self {
        match e {
            InpaintError::ShapeMismatch(_) => ApiError::new(ErrorCode::DimMismatch, e.to_string()),
            InpaintError::EmptyMask => ApiError::malformed(e.to_string()),
            _ => ApiError::internal(e.to_string()),
        }
    }
}

impl From<PreprocessError> for ApiError {
    fn from(e: PreprocessError) -> Self {
        ApiError::internal(e.to_string())
    }
}

impl From<RetrievalError> for ApiError {
    fn from(e: RetrievalError) -> Self {
        match e {
            RetrievalError::EmptyStore | RetrievalError::EmptyCentroids => {
                ApiError::new(ErrorCode::EmptyStore, e.to_string())
            }
            RetrievalError::InvalidK => ApiError::malformed(e.to_string()),
            RetrievalError::Image(e) => e.into(),
            RetrievalError::Preprocess(e) => e.into(),
            RetrievalError::Inpaint(e) => e.into(),
            RetrievalError::Store(e) => e.into(),
        }
    }
}
