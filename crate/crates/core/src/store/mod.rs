//! Durable product catalog rooted at one directory:
//!
//! ```text
//! <root>/
//!   categories.json    {"version": 1, "categories": [{"id": ..., "name": ...}]}
//!   products.jsonl     one ProductRecord per line, append-only
//!   potentials.jsonl   one PotentialRecord per line, append-only
//!   images/<id>.png    product images
//!   .lock              advisory lock held while the store is open
//! ```
//!
//! One process owns a directory at a time. Within it, writes are serialized
//! and readers work on immutable snapshots of the index.

mod ids;
mod jsonl;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{Centroid, Metadata};
use crate::imaging::{decode_image, encode_png, ImageBuffer, ImageError};
use ids::{is_valid_id, IdGen};

pub const STORE_VERSION: u32 = 1;
pub const CATEGORIES_FILE: &str = "categories.json";
pub const PRODUCTS_FILE: &str = "products.jsonl";
pub const POTENTIALS_FILE: &str = "potentials.jsonl";
pub const IMAGES_DIR: &str = "images";
pub const LOCK_FILE: &str = ".lock";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("duplicate id {0:?}")]
    DuplicateId(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("invalid id {0:?}: use ASCII letters, digits, '-', '_' or '.'")]
    InvalidId(String),
    #[error("store at {0} is locked by another process")]
    Locked(PathBuf),
    #[error("{file} line {line}: {message}")]
    Corrupt { file: String, line: usize, message: String },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProductRecord {
    pub id: String,
    pub name: String,
    pub category: String,
    pub metadata: Metadata,
    /// Relative to the store root.
    pub image_path: String,
    pub registered_at: DateTime<Utc>,
}

impl ProductRecord {
    /// A record with no id yet; [`CatalogStore::put_product`] assigns one.
    pub fn new(name: impl Into<String>, category: impl Into<String>, metadata: Metadata) -> Self {
        Self {
            id: String::new(),
            name: name.into(),
            category: category.into(),
            metadata,
            image_path: String::new(),
            registered_at: Utc::now(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CategoryRecord {
    pub id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centroid: Option<Centroid>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PotentialRecord {
    pub id: String,
    pub metadata: Metadata,
    pub matched_product: Option<String>,
    pub stored_at: DateTime<Utc>,
}

#[derive(Serialize, Deserialize)]
struct CategoriesFile {
    version: u32,
    categories: Vec<CategoryRecord>,
}

/// Immutable view of the index at one point in time.
#[derive(Clone, Debug, Default)]
pub struct Snapshot {
    categories: BTreeMap<String, CategoryRecord>,
    products: BTreeMap<String, ProductRecord>,
    potentials: Vec<PotentialRecord>,
}

impl Snapshot {
    pub fn product_count(&self) -> usize {
        self.products.len()
    }

    pub fn products(&self) -> impl Iterator<Item = &ProductRecord> {
        self.products.values()
    }

    pub fn product(&self, id: &str) -> Option<&ProductRecord> {
        self.products.get(id)
    }

    pub fn category_ids(&self) -> impl Iterator<Item = &str> {
        self.categories.keys().map(String::as_str)
    }

    pub fn has_category(&self, id: &str) -> bool {
        self.categories.contains_key(id)
    }

    pub fn potentials(&self) -> &[PotentialRecord] {
        &self.potentials
    }
}

struct Writer {
    products: File,
    potentials: File,
}

pub struct CatalogStore {
    root: PathBuf,
    snapshot: RwLock<Arc<Snapshot>>,
    writer: Mutex<Writer>,
    ids: IdGen,
    recovered: bool,
    _lock: File,
}

impl std::fmt::Debug for CatalogStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CatalogStore").field("root", &self.root).finish_non_exhaustive()
    }
}

impl CatalogStore {
    /// Open the store at `root`, creating an empty one if needed.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, StoreError> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(root.join(IMAGES_DIR))?;
        let lock = File::options().create(true).truncate(false).write(true).open(root.join(LOCK_FILE))?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(fs::TryLockError::WouldBlock) => return Err(StoreError::Locked(root)),
            Err(fs::TryLockError::Error(e)) => return Err(e.into()),
        }

        let categories = match fs::read(root.join(CATEGORIES_FILE)) {
            Ok(bytes) => {
                let file: CategoriesFile = serde_json::from_slice(&bytes).map_err(|e| StoreError::Corrupt {
                    file: CATEGORIES_FILE.into(),
                    line: e.line(),
                    message: e.to_string(),
                })?;
                file.categories.into_iter().map(|c| (c.id.clone(), c)).collect()
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(e.into()),
        };
        let (products, cut_p) = jsonl::load::<ProductRecord>(&root.join(PRODUCTS_FILE))?;
        let (potentials, cut_q) = jsonl::load::<PotentialRecord>(&root.join(POTENTIALS_FILE))?;
        let products: BTreeMap<_, _> = products.into_iter().map(|p| (p.id.clone(), p)).collect();

        let ids = IdGen::after(products.keys().map(String::as_str).chain(potentials.iter().map(|p| p.id.as_str())));
        let writer = Writer {
            products: jsonl::open_append(&root.join(PRODUCTS_FILE))?,
            potentials: jsonl::open_append(&root.join(POTENTIALS_FILE))?,
        };
        Ok(Self {
            root,
            snapshot: RwLock::new(Arc::new(Snapshot {
                categories,
                products,
                potentials,
            })),
            writer: Mutex::new(writer),
            ids,
            recovered: cut_p || cut_q,
            _lock: lock,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Whether opening discarded an interrupted trailing index line.
    pub fn recovered_on_open(&self) -> bool {
        self.recovered
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("store snapshot poisoned").clone()
    }

    fn update(&self, f: impl FnOnce(&mut Snapshot)) {
        let mut guard = self.snapshot.write().expect("store snapshot poisoned");
        f(Arc::make_mut(&mut guard));
    }

    fn lock_writer(&self) -> std::sync::MutexGuard<'_, Writer> {
        self.writer.lock().expect("store writer poisoned")
    }

    /// Create or rename a category.
    pub fn put_category(&self, id: &str, name: &str) -> Result<CategoryRecord, StoreError> {
        if !is_valid_id(id) {
            return Err(StoreError::InvalidId(id.into()));
        }
        let _w = self.lock_writer();
        let mut next = (*self.snapshot()).clone();
        let rec = CategoryRecord {
            id: id.into(),
            name: name.into(),
            centroid: None,
        };
        next.categories.insert(id.into(), rec.clone());
        self.write_categories(&next)?;
        self.update(|s| s.categories = next.categories);
        Ok(rec)
    }

    /// Create the category with its id as name unless it exists.
    pub fn ensure_category(&self, id: &str) -> Result<(), StoreError> {
        if self.snapshot().has_category(id) {
            return Ok(());
        }
        self.put_category(id, id).map(|_| ())
    }

    fn write_categories(&self, snap: &Snapshot) -> Result<(), StoreError> {
        let file = CategoriesFile {
            version: STORE_VERSION,
            categories: snap.categories.values().cloned().collect(),
        };
        let bytes = serde_json::to_vec_pretty(&file).map_err(|e| StoreError::Io(e.into()))?;
        write_atomic(&self.root, &self.root.join(CATEGORIES_FILE), &bytes)
    }

    /// Persist the image and append the record. An empty `rec.id` gets a
    /// fresh id; `image_path` and `metadata.category` are filled in.
    pub fn put_product(&self, mut rec: ProductRecord, image: &ImageBuffer) -> Result<ProductRecord, StoreError> {
        let mut w = self.lock_writer();
        let snap = self.snapshot();
        if rec.category.is_empty() || !snap.has_category(&rec.category) {
            return Err(StoreError::UnknownCategory(rec.category));
        }
        if rec.id.is_empty() {
            rec.id = self.ids.next();
        } else if !is_valid_id(&rec.id) {
            return Err(StoreError::InvalidId(rec.id));
        }
        if snap.products.contains_key(&rec.id) {
            return Err(StoreError::DuplicateId(rec.id));
        }
        rec.image_path = format!("{IMAGES_DIR}/{}.png", rec.id);
        rec.metadata.category = Some(rec.category.clone());

        write_atomic(&self.root.join(IMAGES_DIR), &self.root.join(&rec.image_path), &encode_png(image))?;
        jsonl::append(&mut w.products, &rec)?;
        self.update(|s| {
            s.products.insert(rec.id.clone(), rec.clone());
        });
        Ok(rec)
    }

    pub fn get_product(&self, id: &str) -> Result<ProductRecord, StoreError> {
        self.snapshot()
            .product(id)
            .cloned()
            .ok_or_else(|| StoreError::NotFound(format!("product {id}")))
    }

    /// Products in ascending id order.
    pub fn list_products(&self) -> Vec<ProductRecord> {
        self.snapshot().products().cloned().collect()
    }

    /// Products of one category in ascending id order.
    pub fn list_by_category(&self, category: &str) -> Result<Vec<ProductRecord>, StoreError> {
        let snap = self.snapshot();
        if !snap.has_category(category) {
            return Err(StoreError::NotFound(format!("category {category}")));
        }
        Ok(snap.products().filter(|p| p.category == category).cloned().collect())
    }

    /// Categories in id order, each with the mean of its members' histograms.
    pub fn list_categories(&self) -> Vec<CategoryRecord> {
        let snap = self.snapshot();
        snap.categories
            .values()
            .map(|c| CategoryRecord {
                centroid: Centroid::mean_of(snap.products().filter(|p| p.category == c.id).map(|p| &p.metadata)),
                ..c.clone()
            })
            .collect()
    }

    pub fn image_file(&self, id: &str) -> Result<PathBuf, StoreError> {
        let rec = self.get_product(id)?;
        Ok(self.root.join(rec.image_path))
    }

    /// Stored PNG bytes, unmodified.
    pub fn image_bytes(&self, id: &str) -> Result<Vec<u8>, StoreError> {
        Ok(fs::read(self.image_file(id)?)?)
    }

    pub fn read_image(&self, id: &str) -> Result<ImageBuffer, StoreError> {
        Ok(decode_image(&self.image_bytes(id)?)?)
    }

    pub fn put_potential(&self, metadata: Metadata, matched: Option<String>) -> Result<PotentialRecord, StoreError> {
        let mut w = self.lock_writer();
        let rec = PotentialRecord {
            id: self.ids.next(),
            metadata,
            matched_product: matched,
            stored_at: Utc::now(),
        };
        jsonl::append(&mut w.potentials, &rec)?;
        self.update(|s| s.potentials.push(rec.clone()));
        Ok(rec)
    }

    /// Stored query metadata, oldest first. Not used for ranking.
    pub fn list_potentials(&self) -> Vec<PotentialRecord> {
        self.snapshot().potentials.clone()
    }
}

/// Write via a temporary sibling, fsync, rename, then fsync the directory.
fn write_atomic(dir: &Path, path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    sync_dir(dir)?;
    Ok(())
}

#[cfg(unix)]
fn sync_dir(dir: &Path) -> std::io::Result<()> {
    File::open(dir)?.sync_all()
}

#[cfg(not(unix))]
fn sync_dir(_dir: &Path) -> std::io::Result<()> {
    Ok(())
}
