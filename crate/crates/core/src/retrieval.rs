//! Category assignment by nearest centroid and category-first product search.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::features::{generate_metadata, Centroid, Metadata, SimilarityWeights};
use crate::imaging::{ImageBuffer, ImageError, MaskImage};
use crate::inpaint::{inpaint, Engine, InpaintError, InpaintRequest, PConvModel, DEFAULT_DIFFUSION_ITERS, DEFAULT_DIFFUSION_TOL};
use crate::preprocess::{preprocess, preprocess_masked, ModeChoice, PreprocessError, PreprocessMode, PreprocessReport};
use crate::scalar::Real;
use crate::store::{CatalogStore, ProductRecord, Snapshot, StoreError};

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("the catalog has no products")]
    EmptyStore,
    #[error("no category centroids to compare against")]
    EmptyCentroids,
    #[error("k must be at least 1")]
    InvalidK,
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Inpaint(#[from] InpaintError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Per-category centroids, keyed and iterated in category id order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CentroidSet {
    pub centroids: BTreeMap<String, Centroid>,
}

impl CentroidSet {
    pub fn is_empty(&self) -> bool {
        self.centroids.is_empty()
    }

    pub fn get(&self, category: &str) -> Option<&Centroid> {
        self.centroids.get(category)
    }
}

/// Mean histograms of every category that has members.
pub fn build_centroids(snap: &Snapshot) -> Result<CentroidSet, RetrievalError> {
    if snap.product_count() == 0 {
        return Err(RetrievalError::EmptyStore);
    }
    let mut groups: BTreeMap<&str, Vec<&Metadata>> = BTreeMap::new();
    for p in snap.products() {
        groups.entry(p.category.as_str()).or_default().push(&p.metadata);
    }
    let centroids = groups
        .into_iter()
        .filter_map(|(c, ms)| Some((c.to_string(), Centroid::mean_of(ms)?)))
        .collect();
    Ok(CentroidSet { centroids })
}

/// Most similar centroid and its score. Ties go to the smallest id.
pub fn classify_category(
    m: &Metadata,
    centroids: &CentroidSet,
    weights: &SimilarityWeights,
) -> Result<(String, f64), RetrievalError> {
    let mut best: Option<(&String, f64)> = None;
    for (id, c) in &centroids.centroids {
        let s = weights.score_centroid(m, c);
        // strict > keeps the first (smallest) id on ties
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((id, s));
        }
    }
    best.map(|(id, s)| (id.clone(), s)).ok_or(RetrievalError::EmptyCentroids)
}

/// Knobs shared by registration, restoration and search.
#[derive(Clone, Debug)]
pub struct PipelineOptions<T: Real = f32> {
    pub mode: ModeChoice,
    pub engine: Engine,
    /// Network for the pconv engine; a seeded untrained one when absent.
    pub model: Option<Arc<PConvModel<T>>>,
    pub diffusion_iters: usize,
    pub diffusion_tol: f64,
    pub weights: SimilarityWeights,
}

impl<T: Real> Default for PipelineOptions<T> {
    fn default() -> Self {
        Self {
            mode: ModeChoice::Auto,
            engine: Engine::Diffusion,
            model: None,
            diffusion_iters: DEFAULT_DIFFUSION_ITERS,
            diffusion_tol: DEFAULT_DIFFUSION_TOL,
            weights: SimilarityWeights::default(),
        }
    }
}

/// Result of pre-processing and (optional) inpainting.
#[derive(Clone, Debug)]
pub struct Restoration {
    pub report: PreprocessReport,
    /// Equal to `report.output` when no mask was given.
    pub restored: ImageBuffer,
}

/// Pre-process, then inpaint the holes of `mask` if one is given.
pub fn restore<T: Real>(
    image: &ImageBuffer,
    mask: Option<&MaskImage>,
    options: &PipelineOptions<T>,
) -> Result<Restoration, RetrievalError> {
    if let Some(m) = mask {
        m.check_pairs_with(image)?;
    }
    let report = preprocess_masked(image, options.mode, mask)?;
    let restored = match mask {
        None => report.output.clone(),
        Some(m) => {
            let req = InpaintRequest {
                image: report.output.clone(),
                mask: m.clone(),
                engine: options.engine,
                diffusion_iters: options.diffusion_iters,
                diffusion_tol: options.diffusion_tol,
            };
            inpaint(&req, options.model.as_deref())?
        }
    };
    Ok(Restoration { report, restored })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CategoryChoice {
    Explicit(String),
    Auto,
}

impl CategoryChoice {
    /// `"auto"` selects automatic classification.
    pub fn parse(s: &str) -> Self {
        if s.eq_ignore_ascii_case("auto") {
            CategoryChoice::Auto
        } else {
            CategoryChoice::Explicit(s.to_string())
        }
    }
}

/// Pre-process, describe, classify if asked, and store a product.
pub fn register_product<T: Real>(
    store: &CatalogStore,
    image: &ImageBuffer,
    name: &str,
    category: CategoryChoice,
    options: &PipelineOptions<T>,
) -> Result<ProductRecord, RetrievalError> {
    let report = preprocess(image, options.mode)?;
    let metadata = generate_metadata(&report.output);
    let category = match category {
        CategoryChoice::Explicit(c) => {
            if !store.snapshot().has_category(&c) {
                return Err(StoreError::UnknownCategory(c).into());
            }
            c
        }
        CategoryChoice::Auto => {
            let centroids = build_centroids(&store.snapshot())?;
            classify_category(&metadata, &centroids, &options.weights)?.0
        }
    };
    Ok(store.put_product(ProductRecord::new(name, category, metadata), image)?)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProductMatch {
    pub product: ProductRecord,
    pub score: f64,
    /// Similarity of the query to the product's category centroid.
    pub category_score: f64,
}

#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub matches: Vec<ProductMatch>,
    pub mode: PreprocessMode,
    pub preprocessed: ImageBuffer,
    pub restored: ImageBuffer,
    /// Query metadata, as stored in the potential record.
    pub metadata: Metadata,
    pub category: String,
    pub potential_id: String,
}

/// Rank products against a query image.
///
/// The query is pre-processed, inpainted when a mask is given, described and
/// assigned to the nearest category. That category's products come first,
/// then, if fewer than `k`, the best products of other categories. Within
/// each group order is score descending, then id ascending. The query's
/// metadata is appended to the store as a potential record.
pub fn search<T: Real>(
    store: &CatalogStore,
    image: &ImageBuffer,
    mask: Option<&MaskImage>,
    k: usize,
    options: &PipelineOptions<T>,
) -> Result<SearchOutcome, RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::InvalidK);
    }
    if let Some(m) = mask {
        m.check_pairs_with(image)?;
    }
    let snap = store.snapshot();
    let centroids = build_centroids(&snap)?;
    let restoration = restore(image, mask, options)?;
    let metadata = generate_metadata(&restoration.restored);
    let (category, _) = classify_category(&metadata, &centroids, &options.weights)?;

    let mut scored: Vec<(bool, ProductMatch)> = snap
        .products()
        .map(|p| {
            let category_score = centroids
                .get(&p.category)
                .map_or(0.0, |c| options.weights.score_centroid(&metadata, c));
            let m = ProductMatch {
                score: options.weights.score(&metadata, &p.metadata),
                category_score,
                product: p.clone(),
            };
            (p.category == category, m)
        })
        .collect();
    scored.sort_by(|(ia, a), (ib, b)| {
        ib.cmp(ia)
            .then(b.score.total_cmp(&a.score))
            .then_with(|| a.product.id.cmp(&b.product.id))
    });
    let matches: Vec<ProductMatch> = scored.into_iter().take(k).map(|(_, m)| m).collect();

    let top = matches.first().map(|m| m.product.id.clone());
    let potential = store.put_potential(metadata.clone(), top)?;
    Ok(SearchOutcome {
        matches,
        mode: restoration.report.mode,
        preprocessed: restoration.report.output,
        restored: restoration.restored,
        metadata,
        category,
        potential_id: potential.id,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::generate_metadata_at;
    use chrono::Utc;

    fn solid(rgb: [u8; 3]) -> ImageBuffer {
        ImageBuffer::rgb_from_fn(16, 16, move |_, _| rgb)
    }

    fn open() -> (tempfile::TempDir, CatalogStore) {
        let dir = tempfile::tempdir().unwrap();
        let store = CatalogStore::open(dir.path()).unwrap();
        (dir, store)
    }

    fn opts() -> PipelineOptions<f32> {
        PipelineOptions::default()
    }

    #[test]
    fn empty_store_errors() {
        let (_d, store) = open();
        assert!(matches!(build_centroids(&store.snapshot()), Err(RetrievalError::EmptyStore)));
        assert!(matches!(
            search(&store, &solid([1, 2, 3]), None, 3, &opts()),
            Err(RetrievalError::EmptyStore)
        ));
        assert!(store.list_potentials().is_empty());
        let none = CentroidSet::default();
        let m = generate_metadata(&solid([0, 0, 0]));
        assert!(matches!(
            classify_category(&m, &none, &SimilarityWeights::default()),
            Err(RetrievalError::EmptyCentroids)
        ));
    }

    #[test]
    fn classify_red_vs_blue_and_ties() {
        let red = generate_metadata(&solid([250, 10, 10]));
        let blue = generate_metadata(&solid([10, 10, 250]));
        let mut set = CentroidSet::default();
        set.centroids.insert("blue".into(), Centroid::mean_of([&blue]).unwrap());
        set.centroids.insert("red".into(), Centroid::mean_of([&red]).unwrap());
        let w = SimilarityWeights::default();
        let (c, s) = classify_category(&generate_metadata(&solid([200, 30, 20])), &set, &w).unwrap();
        assert_eq!(c, "red");
        assert!((s - 1.0).abs() < 1e-12);
        // identical centroids tie: smallest id wins
        set.centroids.insert("aaa".into(), Centroid::mean_of([&red]).unwrap());
        assert_eq!(classify_category(&red, &set, &w).unwrap().0, "aaa");
    }

    #[test]
    fn single_category_always_chosen() {
        let mut set = CentroidSet::default();
        let m = generate_metadata(&solid([0, 255, 0]));
        set.centroids.insert("only".into(), Centroid::mean_of([&m]).unwrap());
        let q = generate_metadata(&solid([255, 0, 255]));
        assert_eq!(classify_category(&q, &set, &SimilarityWeights::default()).unwrap().0, "only");
    }

    #[test]
    fn duplicate_members_leave_centroid_unchanged() {
        let m = generate_metadata_at(&solid([10, 200, 30]), Utc::now());
        assert_eq!(
            Centroid::mean_of([&m]).unwrap().color_hist,
            Centroid::mean_of([&m, &m, &m]).unwrap().color_hist
        );
    }

    #[test]
    fn registration_explicit_and_auto() {
        let (_d, store) = open();
        store.ensure_category("red").unwrap();
        store.ensure_category("blue").unwrap();
        let o = opts();
        assert!(matches!(
            register_product(&store, &solid([1, 1, 1]), "x", CategoryChoice::Auto, &o),
            Err(RetrievalError::EmptyStore)
        ));
        register_product(&store, &solid([240, 20, 20]), "r", CategoryChoice::parse("red"), &o).unwrap();
        register_product(&store, &solid([20, 20, 240]), "b", CategoryChoice::parse("blue"), &o).unwrap();
        assert!(matches!(
            register_product(&store, &solid([1, 1, 1]), "x", CategoryChoice::parse("green"), &o),
            Err(RetrievalError::Store(StoreError::UnknownCategory(_)))
        ));
        let before = store.snapshot().product_count();
        let rec = register_product(&store, &solid([20, 20, 240]), "b2", CategoryChoice::parse("AUTO"), &o).unwrap();
        assert_eq!(rec.category, "blue");
        assert_eq!(store.snapshot().product_count(), before + 1);
    }

    #[test]
    fn search_ranks_duplicate_first_and_spills_over() {
        let (_d, store) = open();
        let o = opts();
        let imgs = [
            ("red", solid([240, 20, 20])),
            ("red", ImageBuffer::rgb_from_fn(16, 16, |x, _| if x < 8 { [240, 20, 20] } else { [240, 240, 240] })),
            ("blue", solid([20, 20, 240])),
        ];
        for (i, (c, img)) in imgs.iter().enumerate() {
            store.ensure_category(c).unwrap();
            register_product(&store, img, &format!("p{i}"), CategoryChoice::Explicit(c.to_string()), &o).unwrap();
        }
        let products_before = store.list_products();
        let out = search(&store, &imgs[0].1, None, 10, &o).unwrap();
        assert_eq!(out.category, "red");
        assert_eq!(out.matches.len(), 3);
        assert_eq!(out.matches[0].product.name, "p0");
        assert!((out.matches[0].score - 1.0).abs() < 1e-9);
        assert_eq!(out.matches[2].product.category, "blue");
        assert!(out.matches[..2].windows(2).all(|w| w[0].score >= w[1].score));
        assert_eq!(store.list_products(), products_before);
        let pots = store.list_potentials();
        assert_eq!(pots.len(), 1);
        assert_eq!(pots[0].matched_product.as_deref(), Some(out.matches[0].product.id.as_str()));
        assert!(matches!(search(&store, &imgs[0].1, None, 0, &o), Err(RetrievalError::InvalidK)));
    }

    #[test]
    fn search_with_hole_restores_and_matches() {
        let (_d, store) = open();
        let o = opts();
        store.ensure_category("red").unwrap();
        store.ensure_category("blue").unwrap();
        let red = solid([230, 30, 30]);
        register_product(&store, &red, "red", CategoryChoice::parse("red"), &o).unwrap();
        register_product(&store, &solid([30, 30, 230]), "blue", CategoryChoice::parse("blue"), &o).unwrap();
        let mask = MaskImage::with_rect_hole(16, 16, 4, 4, 8, 6);
        let mut damaged = red.clone();
        for y in 4..10 {
            for x in 4..12 {
                for c in 0..3 {
                    damaged.set(x, y, c, 0);
                }
            }
        }
        let out = search(&store, &damaged, Some(&mask), 1, &o).unwrap();
        assert_eq!(out.matches[0].product.name, "red");
        assert_eq!(out.restored.dims(), (16, 16));
        let bad = MaskImage::all_valid(3, 3);
        assert!(matches!(
            search(&store, &damaged, Some(&bad), 1, &o),
            Err(RetrievalError::Image(ImageError::DimMismatch { .. }))
        ));
    }

    #[test]
    fn restore_with_full_mask_equals_preprocessed() {
        let img = ImageBuffer::rgb_from_fn(12, 12, |x, y| [(x * 20) as u8, (y * 20) as u8, 60]);
        let r = restore(&img, Some(&MaskImage::all_valid(12, 12)), &opts()).unwrap();
        assert_eq!(r.restored, r.report.output);
    }
}
