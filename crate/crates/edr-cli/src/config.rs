//! JSON run configuration: schema-validated (unknown keys rejected), with a
//! small set of command-line overrides applied after parsing.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use edr_core::error::{EdrError, Result};

fn default_seed() -> u64 {
    0
}

fn default_oracle_tol() -> f64 {
    1e-6
}

/// Top-level run configuration. Every command reads the same schema and
/// uses the subset of keys it needs; unknown keys are rejected so typos
/// surface immediately.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// method id for `fit`/`eval`, e.g. "pca-e", "olpp-e", "lle-e"
    pub method: Option<String>,
    /// method list for `sweep`/`oracle-check`; falls back to `method`
    pub methods: Option<Vec<String>>,
    /// target dimension for `fit`/`eval`/`oracle-check`
    pub d: Option<usize>,
    /// strictly increasing dimension list for `sweep`
    pub dims: Option<Vec<usize>>,
    #[serde(default)]
    pub graph: GraphConfig,
    /// use class labels when building affinity graphs / neighbor searches
    #[serde(default)]
    pub supervised: bool,
    /// β for the class-repulsion term; absent = no repulsion
    pub repulsion_beta: Option<f64>,
    /// fit one projection per slice of the last feature mode
    #[serde(default)]
    pub multiweight: bool,
    /// kernel selection; consumed by the library-level kernel fits and
    /// echoed into artifacts
    pub kernel: Option<KernelConfig>,
    /// override the per-method default for skipping the trivial eigenpair
    pub skip_first: Option<bool>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// sweep-internal thread count; default = available cores
    pub threads: Option<usize>,
    /// write measured wall-clock seconds into sweep CSVs (off by default so
    /// reruns with the same seed are byte-identical)
    #[serde(default)]
    pub record_timing: bool,
    pub data: Option<DataConfig>,
    pub out_dir: Option<PathBuf>,
    /// oracle-check failure threshold on subspace / embedding distances
    #[serde(default = "default_oracle_tol")]
    pub oracle_tol: f64,
}

/// Affinity-graph settings shared by the graph-based methods.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    /// Gaussian width; absent = auto (half the median pairwise distance)
    pub sigma: Option<f64>,
    /// neighbor count for k-NN sparsification and reconstruction weights
    pub k: Option<usize>,
    /// "union" (default), "mutual", or "none"
    pub knn: Option<String>,
    /// drop affinities below this value; absent = off
    pub threshold: Option<f64>,
    /// local Grammian regularizer for LLE reconstruction weights
    pub lle_reg: Option<f64>,
    /// supervised distance penalty: d² + μ·[class differs]·max(d²)
    pub mu: Option<f64>,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig { sigma: None, k: None, knn: None, threshold: None, lle_reg: None, mu: None }
    }
}

impl GraphConfig {
    pub fn k(&self) -> usize {
        self.k.unwrap_or(7)
    }

    pub fn lle_reg(&self) -> f64 {
        self.lle_reg.unwrap_or(1e-3)
    }

    pub fn mu(&self) -> f64 {
        self.mu.unwrap_or(0.2)
    }
}

/// Kernel selection mirroring the library's kernel set; validated here and
/// echoed into artifacts, consumed by the library-level kernel fits.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelConfig {
    Gaussian { sigma: Option<f64> },
    Polynomial { degree: u32, offset: f64 },
    Linear,
    Laplacian { sigma: f64 },
    Sigmoid { slope: f64, offset: f64 },
}

/// Dataset source and optional per-class split.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// "idx" | "images" | "eten" | "synthetic"
    pub format: String,
    /// idx: image file path
    pub images: Option<PathBuf>,
    /// idx: label file path; eten: JSON label array path
    pub labels: Option<PathBuf>,
    /// images: directory with one subdirectory per class
    pub root: Option<PathBuf>,
    /// images: "gray" (default) or "rgb"
    pub color: Option<String>,
    /// images: [height, width] to resize to
    pub resize: Option<[usize; 2]>,
    /// eten: tensor file path
    pub tensor: Option<PathBuf>,
    /// synthetic: generator settings
    pub synthetic: Option<SyntheticConfig>,
    pub train_per_class: Option<usize>,
    pub test_per_class: Option<usize>,
}

/// Deterministic synthetic dataset: one random base pattern per class plus
/// per-sample noise; useful for smoke tests and self-contained sweeps.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub per_class: usize,
    pub height: usize,
    pub width: usize,
    #[serde(default = "default_channels")]
    pub channels: usize,
    #[serde(default = "default_noise")]
    pub noise: f64,
}

fn default_channels() -> usize {
    1
}

fn default_noise() -> f64 {
    0.3
}

/// Command-line overrides applied on top of the parsed file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub method: Option<String>,
    pub d: Option<usize>,
}

pub fn load_config(path: &Path, ov: &Overrides) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| EdrError::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut cfg: RunConfig = serde_json::from_str(&text)
        .map_err(|e| EdrError::Config(format!("invalid config {}: {e}", path.display())))?;
    if let Some(out) = &ov.out {
        cfg.out_dir = Some(out.clone());
    }
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = ov.threads {
        cfg.threads = Some(threads);
    }
    if let Some(method) = &ov.method {
        cfg.method = Some(method.clone());
    }
    if let Some(d) = ov.d {
        cfg.d = Some(d);
    }
    Ok(cfg)
}
