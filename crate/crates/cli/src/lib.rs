//! Implementation of the `occu` command-line tool.

pub mod args;
pub mod bench;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use occu_core::inpaint::{load_model, save_model, train_toy, TrainConfig, DEFAULT_MODEL_SEED};
use occu_core::preprocess::{canny, preprocess};
use occu_core::retrieval::{register_product, restore, search, CategoryChoice};
use occu_core::synth::{synth_corpus, synth_textures};
use occu_core::{
    decode_image, decode_mask, encode_png, generate_metadata, CatalogStore, Canny, ImageBuffer, MaskImage, Model,
    Options,
};

pub use args::{Cli, Command};
use args::{BenchArgs, EngineArgs};
use bench::{render_table, run_bench, DamageSpec};

pub fn read_image(path: &Path) -> Result<ImageBuffer> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode_image(&bytes).with_context(|| format!("decoding {}", path.display()))
}

pub fn read_mask(path: &Path) -> Result<MaskImage> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    decode_mask(&bytes).with_context(|| format!("decoding mask {}", path.display()))
}

pub fn write_image(path: &Path, img: &ImageBuffer) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, encode_png(img)).with_context(|| format!("writing {}", path.display()))
}

/// Pipeline options for the engine flags, loading the model file if named.
pub fn options_from(engine: &EngineArgs) -> Result<Options> {
    let model = match &engine.model {
        Some(p) => Some(Arc::new(
            load_model(p).with_context(|| format!("loading model {}", p.display()))?,
        )),
        None => None,
    };
    Ok(Options {
        engine: engine.engine,
        model,
        diffusion_iters: engine.iters,
        diffusion_tol: engine.tol,
        ..Options::default()
    })
}

/// PNG files directly inside `dir`, sorted by name.
pub fn png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        let is_png = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if path.is_file() && is_png {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

#[derive(Debug, Default, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct IndexSummary {
    pub registered: usize,
    pub categories: Vec<String>,
}

/// Register `dir/<category>/*.png`, categories and files in name order.
/// The product name is the file stem.
pub fn index_dir(store: &CatalogStore, dir: &Path, options: &Options) -> Result<IndexSummary> {
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    let mut summary = IndexSummary::default();
    for sub in subdirs {
        let category = sub
            .file_name()
            .and_then(|n| n.to_str())
            .with_context(|| format!("category directory name is not UTF-8: {}", sub.display()))?
            .to_string();
        let files = png_files(&sub)?;
        if files.is_empty() {
            continue;
        }
        store.ensure_category(&category)?;
        for file in files {
            let image = read_image(&file)?;
            let name = file.file_stem().and_then(|s| s.to_str()).unwrap_or("product");
            register_product(store, &image, name, CategoryChoice::Explicit(category.clone()), options)
                .with_context(|| format!("registering {}", file.display()))?;
            summary.registered += 1;
        }
        summary.categories.push(category);
    }
    if summary.registered == 0 {
        bail!("no PNG files found under {}/<category>/", dir.display());
    }
    Ok(summary)
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchHit {
    pub product_id: String,
    pub name: String,
    pub category: String,
    pub score: f64,
    pub category_score: f64,
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SearchSummary {
    pub category: String,
    pub preproc_mode: String,
    pub potential_id: String,
    pub matches: Vec<SearchHit>,
}

/// Train the default network on every PNG in `corpus`.
pub fn train_on_dir(corpus: &Path, config: &TrainConfig) -> Result<(Model, occu_core::inpaint::TrainReport)> {
    let files = png_files(corpus)?;
    if files.is_empty() {
        bail!("no PNG files in {}", corpus.display());
    }
    let images = files.iter().map(|f| read_image(f)).collect::<Result<Vec<_>>>()?;
    let channels = images[0].channels();
    let model = Model::desk_scale(channels, DEFAULT_MODEL_SEED);
    Ok(train_toy(&model, &images, config)?)
}

/// Pretty JSON on stdout; a closed pipe is not an error.
fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{}", serde_json::to_string_pretty(value)?) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Preprocess {
            input,
            output,
            mode,
            edges,
        } => {
            let img = read_image(&input)?;
            let report = preprocess(&img, mode.into())?;
            write_image(&output, &report.output)?;
            if let Some(path) = edges {
                let map = canny(&report.output, &Canny::default())?;
                write_image(&path, &map.to_image())?;
            }
            eprintln!("mode {}", report.mode.as_str());
        }
        Command::Inpaint {
            input,
            mask,
            output,
            engine,
        } => {
            let img = read_image(&input)?;
            let mask = read_mask(&mask)?;
            let options = options_from(&engine)?;
            let req = occu_core::InpaintRequest {
                image: img,
                mask,
                engine: options.engine,
                diffusion_iters: options.diffusion_iters,
                diffusion_tol: options.diffusion_tol,
            };
            let restored = occu_core::inpaint::inpaint(&req, options.model.as_deref())?;
            write_image(&output, &restored)?;
        }
        Command::Edges {
            input,
            output,
            tlow,
            thigh,
            sigma,
        } => {
            let img = read_image(&input)?;
            let params = Canny::new(sigma, tlow, thigh)?;
            let map = canny(&img, &params)?;
            write_image(&output, &map.to_image())?;
            eprintln!("{} edge pixels", map.count());
        }
        Command::Metadata { input, preprocess: pre } => {
            let img = read_image(&input)?;
            let img = if pre {
                restore(&img, None, &Options::default())?.restored
            } else {
                img
            };
            print_json(&generate_metadata(&img))?;
        }
        Command::Index { dir, store } => {
            let store = CatalogStore::open(&store.path)?;
            let summary = index_dir(&store, &dir, &Options::default())?;
            print_json(&summary)?;
        }
        Command::Search {
            input,
            store,
            mask,
            k,
            restored,
            engine,
        } => {
            let store = CatalogStore::open(&store.path)?;
            let img = read_image(&input)?;
            let mask = mask.as_deref().map(read_mask).transpose()?;
            let options = options_from(&engine)?;
            let outcome = search(&store, &img, mask.as_ref(), k, &options)?;
            if let Some(path) = restored {
                write_image(&path, &outcome.restored)?;
            }
            print_json(&SearchSummary {
                category: outcome.category,
                preproc_mode: outcome.mode.as_str().to_string(),
                potential_id: outcome.potential_id,
                matches: outcome
                    .matches
                    .into_iter()
                    .map(|m| SearchHit {
                        product_id: m.product.id,
                        name: m.product.name,
                        category: m.product.category,
                        score: m.score,
                        category_score: m.category_score,
                    })
                    .collect(),
            })?;
        }
        Command::Serve {
            addr,
            store,
            model,
            engine,
            ui,
        } => {
            let config = occu_service::Config {
                addr,
                store: store.path,
                model,
                engine,
                ui_dir: ui,
            };
            let runtime = tokio::runtime::Runtime::new()?;
            runtime
                .block_on(occu_service::serve(config))
                .map_err(|e| anyhow::anyhow!(e))?;
        }
        Command::Bench(BenchArgs {
            store,
            hole_frac,
            seed,
            engine,
        }) => {
            if !(0.0..1.0).contains(&hole_frac) {
                bail!("--hole-frac must be in [0, 1), got {hole_frac}");
            }
            let store = CatalogStore::open(&store.path)?;
            let options = options_from(&engine)?;
            let damage = DamageSpec {
                hole_fraction: hole_frac,
                seed,
            };
            let report = run_bench(&store, &damage, &options)?;
            eprint!("{}", render_table(&report));
            print_json(&report)?;
        }
        Command::TrainToy {
            corpus,
            out,
            epochs,
            lr,
            seed,
        } => {
            let config = TrainConfig {
                epochs,
                learning_rate: lr,
                seed,
            };
            let (model, report) = train_on_dir(&corpus, &config)?;
            save_model(&model, &out).with_context(|| format!("writing {}", out.display()))?;
            eprintln!(
                "loss {:.4} -> {:.4} over {} epochs",
                report.initial_loss(),
                report.final_loss,
                epochs
            );
        }
        Command::SynthCorpus {
            dir,
            per_category,
            size,
            seed,
            textures,
        } => {
            if size < 8 {
                bail!("--size must be at least 8");
            }
            if textures {
                for (i, img) in synth_textures(per_category, size, seed).iter().enumerate() {
                    write_image(&dir.join(format!("texture-{i:03}.png")), img)?;
                }
            } else {
                for item in synth_corpus(per_category, size, seed) {
                    write_image(&dir.join(item.category).join(format!("{}.png", item.name)), &item.image)?;
                }
            }
        }
    }
    Ok(())
}
