//! Degradation benchmark: damage each catalog image with a seeded
//! rectangle and compare top-1 category accuracy of raw queries against the
//! full pre-process + inpaint pipeline.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use occu_core::retrieval::{build_centroids, classify_category, restore, RetrievalError};
use occu_core::synth::{damage_mask, occlude};
use occu_core::{generate_metadata, CatalogStore, Options};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DamageSpec {
    pub hole_fraction: f64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchRow {
    pub product_id: String,
    pub name: String,
    pub category: String,
    /// Measured hole fraction of this query's mask.
    pub hole_fraction: f64,
    pub raw_category: String,
    pub pipeline_category: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchReport {
    pub corpus_size: usize,
    pub damage: DamageSpec,
    pub engine: String,
    pub pipeline_accuracy: f64,
    pub raw_accuracy: f64,
    pub rows: Vec<BenchRow>,
}

/// Query `i` uses seed `damage.seed + i` for both mask and occluder.
pub fn run_bench(store: &CatalogStore, damage: &DamageSpec, options: &Options) -> Result<BenchReport, RetrievalError> {
    let snap = store.snapshot();
    let centroids = build_centroids(&snap)?;
    let mut rows = Vec::with_capacity(snap.product_count());
    for (i, product) in snap.products().enumerate() {
        let image = store.read_image(&product.id)?;
        let seed = damage.seed.wrapping_add(i as u64);
        let mask = damage_mask(image.width(), image.height(), damage.hole_fraction, seed);
        let damaged = occlude(&image, &mask, seed);

        let raw = generate_metadata(&damaged);
        let (raw_category, _) = classify_category(&raw, &centroids, &options.weights)?;
        let restored = restore(&damaged, Some(&mask), options)?.restored;
        let (pipeline_category, _) = classify_category(&generate_metadata(&restored), &centroids, &options.weights)?;

        rows.push(BenchRow {
            product_id: product.id.clone(),
            name: product.name.clone(),
            category: product.category.clone(),
            hole_fraction: 1.0 - mask.coverage(),
            raw_category,
            pipeline_category,
        });
    }
    let n = rows.len() as f64;
    let hits = |f: fn(&BenchRow) -> &str| rows.iter().filter(|r| f(r) == r.category).count() as f64 / n;
    Ok(BenchReport {
        corpus_size: rows.len(),
        damage: damage.clone(),
        engine: options.engine.to_string(),
        pipeline_accuracy: hits(|r| &r.pipeline_category),
        raw_accuracy: hits(|r| &r.raw_category),
        rows,
    })
}

/// Aligned text table of the per-query rows and the two accuracies.
pub fn render_table(report: &BenchReport) -> String {
    let headers = ["product", "category", "hole", "raw", "pipeline"];
    let cells: Vec<[String; 5]> = report
        .rows
        .iter()
        .map(|r| {
            [
                r.name.clone(),
                r.category.clone(),
                format!("{:.3}", r.hole_fraction),
                mark(&r.raw_category, &r.category),
                mark(&r.pipeline_category, &r.category),
            ]
        })
        .collect();
    let mut widths = headers.map(str::len);
    for row in &cells {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, row: &[&str]| {
        let parts: Vec<String> = row.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &headers);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    let _ = writeln!(out, "{}", rule.join("  "));
    for row in &cells {
        line(&mut out, &row.each_ref().map(String::as_str));
    }
    let _ = writeln!(
        out,
        "\nqueries {}  hole {:.2}  seed {}  engine {}\nraw accuracy      {:.3}\npipeline accuracy {:.3}",
        report.corpus_size,
        report.damage.hole_fraction,
        report.damage.seed,
        report.engine,
        report.raw_accuracy,
        report.pipeline_accuracy
    );
    out
}

fn mark(predicted: &str, truth: &str) -> String {
    if predicted == truth {
        format!("ok {predicted}")
    } else {
        format!("x  {predicted}")
    }
}
