use std::sync::Arc;

use axum::body::Body;
use axum::extract::{Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use occu_core::features::Centroid;
use occu_core::preprocess::PreprocessStep;
use occu_core::retrieval::{register_product, restore, search, CategoryChoice};
use occu_core::{encode_png, ImageBuffer, MaskImage, PreprocessMode, ProductRecord};

use crate::error::ApiError;
use crate::upload::Upload;
use crate::AppState;

pub const DEFAULT_K: usize = 10;

/// Run CPU-bound work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

fn png_base64(img: &ImageBuffer) -> String {
    BASE64.encode(encode_png(img))
}

pub fn image_url(id: &str) -> String {
    format!("/api/v1/products/{id}/image")
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MatchView {
    pub product_id: String,
    pub name: String,
    pub category: String,
    pub score: f64,
    pub category_score: f64,
    pub image_url: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchResponse {
    pub restored_image: String,
    pub preproc_mode: PreprocessMode,
    pub category: String,
    pub matches: Vec<MatchView>,
    pub potential_id: String,
}

pub async fn search_handler(State(state): State<Arc<AppState>>, form: Multipart) -> Result<Json<SearchResponse>, ApiError> {
    let up = Upload::read(form).await?;
    let image = up.image()?;
    let mask = up.mask_for(&image)?;
    let k = up.k(DEFAULT_K)?;
    let mut options = state.options.clone();
    options.engine = up.engine(options.engine)?;
    let response = blocking(move || {
        let out = search(&state.store, &image, mask.as_ref(), k, &options)?;
        Ok(SearchResponse {
            restored_image: png_base64(&out.restored),
            preproc_mode: out.mode,
            category: out.category,
            matches: out
                .matches
                .into_iter()
                .map(|m| MatchView {
                    image_url: image_url(&m.product.id),
                    product_id: m.product.id,
                    name: m.product.name,
                    category: m.product.category,
                    score: m.score,
                    category_score: m.category_score,
                })
                .collect(),
            potential_id: out.potential_id,
        })
    })
    .await?;
    Ok(Json(response))
}

pub async fn register_handler(
    State(state): State<Arc<AppState>>,
    form: Multipart,
) -> Result<(StatusCode, Json<ProductRecord>), ApiError> {
    let up = Upload::read(form).await?;
    let image = up.image()?;
    let name = up
        .text("name")
        .ok_or_else(|| ApiError::malformed("missing form field \"name\""))?
        .to_owned();
    let category = CategoryChoice::parse(up.text("category").unwrap_or("auto"));
    let rec = blocking(move || Ok(register_product(&state.store, &image, &name, category, &state.options)?)).await?;
    Ok((StatusCode::CREATED, Json(rec)))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RestoreResponse {
    pub preprocessed: String,
    pub restored: String,
    pub edges: String,
    pub mode: PreprocessMode,
    pub steps: Vec<PreprocessStep>,
    pub mask_coverage: f64,
}

pub async fn restore_handler(State(state): State<Arc<AppState>>, form: Multipart) -> Result<Json<RestoreResponse>, ApiError> {
    let up = Upload::read(form).await?;
    let image = up.image()?;
    let mask = up.mask_for(&image)?;
    let mut options = state.options.clone();
    options.engine = up.engine(options.engine)?;
    let response = blocking(move || {
        let r = restore(&image, mask.as_ref(), &options)?;
        let (w, h) = image.dims();
        let edges = r.report.edges.as_ref().map_or_else(|| ImageBuffer::filled(w, h, 1, 0), |e| e.to_image());
        Ok(RestoreResponse {
            preprocessed: png_base64(&r.report.output),
            restored: png_base64(&r.restored),
            edges: png_base64(&edges),
            mode: r.report.mode,
            steps: r.report.steps,
            mask_coverage: mask.as_ref().map_or(1.0, MaskImage::coverage),
        })
    })
    .await?;
    Ok(Json(response))
}

#[derive(Debug, Deserialize)]
pub struct ListQuery {
    pub category: Option<String>,
}

pub async fn list_products(
    State(state): State<Arc<AppState>>,
    Query(q): Query<ListQuery>,
) -> Result<Json<Vec<ProductRecord>>, ApiError> {
    Ok(Json(match q.category {
        Some(c) => state.store.list_by_category(&c)?,
        None => state.store.list_products(),
    }))
}

pub async fn get_product(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Json<ProductRecord>, ApiError> {
    Ok(Json(state.store.get_product(&id)?))
}

pub async fn product_image(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let bytes = state.store.image_bytes(&id)?;
    Ok(([(header::CONTENT_TYPE, "image/png")], Body::from(bytes)).into_response())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CategoryView {
    pub id: String,
    pub name: String,
    pub product_count: usize,
    pub centroid: Option<Centroid>,
}

pub async fn list_categories(State(state): State<Arc<AppState>>) -> Json<Vec<CategoryView>> {
    Json(
        state
            .store
            .list_categories()
            .into_iter()
            .map(|c| CategoryView {
                product_count: c.centroid.as_ref().map_or(0, |x| x.members),
                id: c.id,
                name: c.name,
                centroid: c.centroid,
            })
            .collect(),
    )
}

pub async fn healthz() -> &'static str {
    "ok"
}

pub async fn not_found() -> ApiError {
    ApiError::new(crate::error::ErrorCode::NotFound, "no such endpoint")
}
