use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use occu_core::{Engine, ModeChoice};

/// Occlusion-aware product image search: run pipeline stages on single
/// images, build and query a catalog, benchmark, and serve the HTTP API.
///
/// Images are 8-bit PNG (gray, RGB, or RGBA with alpha discarded). Masks are
/// 8-bit gray PNGs of the same size: samples >= 128 are valid pixels, < 128
/// are holes to restore.
#[derive(Debug, Parser)]
#[command(name = "occu", version, propagate_version = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Enhance an image (color: luminance equalization; gray: unsharp mask + stretch).
    Preprocess {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
        mode: ModeArg,
        /// Also write the Canny edge map of the result.
        #[arg(long)]
        edges: Option<PathBuf>,
    },
    /// Fill the holes of MASK in INPUT.
    Inpaint {
        input: PathBuf,
        mask: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Canny edge map as a black/white PNG.
    Edges {
        input: PathBuf,
        output: PathBuf,
        #[arg(long, default_value_t = 80.0)]
        tlow: f64,
        #[arg(long, default_value_t = 140.0)]
        thigh: f64,
        #[arg(long, default_value_t = 1.4)]
        sigma: f64,
    },
    /// Print the metadata JSON of an image.
    Metadata {
        input: PathBuf,
        /// Describe the pre-processed image instead of the raw one.
        #[arg(long)]
        preprocess: bool,
    },
    /// Register every PNG under DIR; each subdirectory name is a category.
    Index {
        dir: PathBuf,
        #[command(flatten)]
        store: StoreArg,
    },
    /// Rank catalog products against a query image.
    Search {
        input: PathBuf,
        #[command(flatten)]
        store: StoreArg,
        /// Hole mask; when given, holes are inpainted before describing.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Write the restored query image here.
        #[arg(long)]
        restored: Option<PathBuf>,
        #[command(flatten)]
        engine: EngineArgs,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, env = "OCCU_ADDR", default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[command(flatten)]
        store: StoreArg,
        #[arg(long, env = "OCCU_MODEL")]
        model: Option<PathBuf>,
        #[arg(long, env = "OCCU_ENGINE", default_value_t = Engine::Diffusion)]
        engine: Engine,
        /// Directory with a built web UI to serve under /.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
    /// Damage every catalog image and compare category accuracy with and
    /// without pre-processing + inpainting. Prints JSON on stdout and a
    /// table on stderr.
    Bench(BenchArgs),
    /// Train the default network on rectangular holes over a PNG corpus.
    TrainToy {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 0.05)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a seeded synthetic corpus as DIR/<category>/<name>.png.
    SynthCorpus {
        dir: PathBuf,
        #[arg(long, default_value_t = 10)]
        per_category: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Write smooth training textures (no categories) instead.
        #[arg(long)]
        textures: bool,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Auto,
    Color,
    #[value(alias = "grayscale")]
    Gray,
}

impl From<ModeArg> for ModeChoice {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Auto => ModeChoice::Auto,
            ModeArg::Color => ModeChoice::Color,
            ModeArg::Gray => ModeChoice::Grayscale,
        }
    }
}

#[derive(Debug, Args)]
pub struct StoreArg {
    /// Catalog store directory.
    #[arg(long = "store", env = "OCCU_STORE")]
    pub path: PathBuf,
}

#[derive(Debug, Args)]
pub struct EngineArgs {
    #[arg(long, env = "OCCU_ENGINE", default_value_t = Engine::Diffusion)]
    pub engine: Engine,
    /// Network weights for the pconv engine (default: seeded untrained network).
    #[arg(long, env = "OCCU_MODEL")]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = occu_core::inpaint::DEFAULT_DIFFUSION_ITERS)]
    pub iters: usize,
    #[arg(long, default_value_t = occu_core::inpaint::DEFAULT_DIFFUSION_TOL)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub store: StoreArg,
    /// Area fraction of the damage rectangle.
    #[arg(long, default_value_t = 0.2)]
    pub hole_frac: f64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[command(flatten)]
    pub engine: EngineArgs,
}
