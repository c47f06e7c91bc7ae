//! Shared experiment plumbing: dataset loading, graph construction per
//! method, fit/transform/evaluate cells, and model serialization.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use edr_core::data::{load_eten, load_idx, load_image_dir, split, ColorMode, DataSet, SplitPlan};
use edr_core::dr_linear::{
    delta_kernel, fit_lpp, fit_multiweight, fit_npp, fit_olpp, fit_onpp, fit_pca, fit_spca,
    projection_matrix, transform, Embedding, FitOptions, LinearMethod, Projection,
    ProjectionModel,
};
use edr_core::dr_nonlinear::{
    fit_le, fit_lle_with_weights, le_test_affinity, oos_le, oos_lle, EmbeddingModel,
};
use edr_core::error::{EdrError, Result};
use edr_core::eval::{nn_classify, recognition_rate};
use edr_core::graph::{
    combine_repulsion, gaussian_weights, knn_sparsify, lle_weights, lle_weights_with_dists,
    pairwise_sq_dists, repulsion_weights, supervised_distances, supervised_weights,
    threshold_sparsify, KnnMode, RepulsionEdges, WeightGraph,
};
use edr_core::oracle::{compare, matrix_method, OracleReport};
use edr_core::tensor::{DenseTensor, Shape};

use crate::config::{RunConfig, SyntheticConfig};

/// A method id split into its base name and variant flags. Accepted forms:
/// `pca`, `pca-e`, `onpp-e-mw`, `olpp-mw`, …
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodId {
    pub base: String,
    pub multiweight: bool,
}

pub fn parse_method(id: &str) -> Result<MethodId> {
    let mut rest = id.to_ascii_lowercase();
    let mut multiweight = false;
    loop {
        if let Some(s) = rest.strip_suffix("-mw") {
            multiweight = true;
            rest = s.to_string();
        } else if let Some(s) = rest.strip_suffix("-e") {
            rest = s.to_string();
        } else {
            break;
        }
    }
    match rest.as_str() {
        "pca" | "spca" | "onpp" | "olpp" | "lpp" | "npp" | "le" | "lle" => {
            Ok(MethodId { base: rest, multiweight })
        }
        other => Err(EdrError::Config(format!("unknown method '{other}' in id '{id}'"))),
    }
}

// ---------------------------------------------------------------------------
// dataset loading
// ---------------------------------------------------------------------------

fn need<'a, T>(v: &'a Option<T>, key: &str, format: &str) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| {
        EdrError::Config(format!("data.{key} is required for format '{format}'"))
    })
}

/// Builds the full dataset described by the config.
pub fn load_dataset(cfg: &RunConfig) -> Result<DataSet> {
    let data = cfg
        .data
        .as_ref()
        .ok_or_else(|| EdrError::Config("config has no 'data' section".into()))?;
    match data.format.as_str() {
        "idx" => load_idx(need(&data.images, "images", "idx")?, need(&data.labels, "labels", "idx")?),
        "images" => {
            let color = match data.color.as_deref().unwrap_or("gray") {
                "gray" => ColorMode::Gray,
                "rgb" => ColorMode::Rgb,
                other => {
                    return Err(EdrError::Config(format!("unknown color mode '{other}'")))
                }
            };
            let resize = data.resize.ok_or_else(|| {
                EdrError::Config("data.resize is required for format 'images'".into())
            })?;
            load_image_dir(need(&data.root, "root", "images")?, color, (resize[0], resize[1]))
        }
        "eten" => load_eten(need(&data.tensor, "tensor", "eten")?, data.labels.as_deref()),
        "synthetic" => {
            let spec = need(&data.synthetic, "synthetic", "synthetic")?;
            synthetic_dataset(spec, cfg.seed)
        }
        other => Err(EdrError::Config(format!("unknown data format '{other}'"))),
    }
}

/// Deterministic synthetic dataset: each class gets a random base pattern,
/// samples add uniform noise. Gray data is `h×w×n`, color `h×w×3×n`.
pub fn synthetic_dataset(spec: &SyntheticConfig, seed: u64) -> Result<DataSet> {
    if spec.classes == 0 || spec.per_class == 0 {
        return Err(EdrError::Config("synthetic: classes and per_class must be > 0".into()));
    }
    if spec.channels != 1 && spec.channels != 3 {
        return Err(EdrError::Config("synthetic: channels must be 1 or 3".into()));
    }
    let feat = spec.height * spec.width * spec.channels;
    let n = spec.classes * spec.per_class;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5f3759df);
    let mut data = Vec::with_capacity(feat * n);
    let mut labels = Vec::with_capacity(n);
    for c in 0..spec.classes {
        let base: Vec<f64> = (0..feat).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for _ in 0..spec.per_class {
            for &b in &base {
                data.push(b + rng.gen_range(-spec.noise..spec.noise));
            }
            labels.push(c);
        }
    }
    let mut dims = vec![spec.height, spec.width];
    if spec.channels == 3 {
        dims.push(3);
    }
    dims.push(n);
    let t = DenseTensor::new(Shape::new(dims)?, data)?;
    DataSet::new(t, Some(labels), "synthetic")
}

/// Loads the dataset and applies the per-class split if one is configured.
pub fn prepare(cfg: &RunConfig) -> Result<(DataSet, Option<DataSet>)> {
    let full = load_dataset(cfg)?;
    let data = cfg.data.as_ref().unwrap();
    match (data.train_per_class, data.test_per_class) {
        (Some(tr), te) => {
            let plan = SplitPlan {
                train_per_class: tr,
                test_per_class: te.unwrap_or(0),
                seed: cfg.seed,
            };
            let (train, test) = split(&full, &plan)?;
            let test = if test.n_samples() > 0 { Some(test) } else { None };
            Ok((train, test))
        }
        (None, Some(_)) => {
            Err(EdrError::Config("test_per_class without train_per_class".into()))
        }
        (None, None) => Ok((full, None)),
    }
}

// ---------------------------------------------------------------------------
// graph construction
// ---------------------------------------------------------------------------

/// Gaussian affinity graph with optional k-NN sparsification, thresholding,
/// supervision and repulsion — the input for LPP/OLPP/LE.
pub fn affinity_graph(cfg: &RunConfig, ds: &DataSet) -> Result<WeightGraph> {
    let d2 = pairwise_sq_dists(ds)?;
    let mut g = gaussian_weights(&d2, cfg.graph.sigma)?;
    match cfg.graph.knn.as_deref().unwrap_or("union") {
        "union" => g = knn_sparsify(&g, cfg.graph.k(), KnnMode::Union)?,
        "mutual" => g = knn_sparsify(&g, cfg.graph.k(), KnnMode::Mutual)?,
        "none" => {}
        other => return Err(EdrError::Config(format!("unknown knn mode '{other}'"))),
    }
    if let Some(tau) = cfg.graph.threshold {
        g = threshold_sparsify(&g, tau)?;
    }
    if cfg.supervised {
        let labels = require_labels(ds)?;
        g = supervised_weights(&g, labels)?;
    }
    if let Some(beta) = cfg.repulsion_beta {
        let labels = require_labels(ds)?;
        let gr = repulsion_weights(labels, RepulsionEdges::FullyConnected)?;
        g = combine_repulsion(&g, &gr, beta)?;
    }
    Ok(g)
}

/// LLE reconstruction-weight graph — the input for ONPP/NPP/LLE. In
/// supervised mode the neighbor search runs on class-penalized distances.
pub fn lle_graph(cfg: &RunConfig, ds: &DataSet) -> Result<WeightGraph> {
    if cfg.supervised {
        let labels = require_labels(ds)?;
        let d2 = pairwise_sq_dists(ds)?;
        let sd = supervised_distances(&d2, labels, cfg.graph.mu())?;
        lle_weights_with_dists(ds, &sd, cfg.graph.k(), cfg.graph.lle_reg())
    } else {
        lle_weights(ds, cfg.graph.k(), cfg.graph.lle_reg())
    }
}

fn require_labels(ds: &DataSet) -> Result<&[usize]> {
    ds.labels().ok_or_else(|| EdrError::Format("dataset has no labels".into()))
}

fn method_graph(cfg: &RunConfig, base: &str, ds: &DataSet) -> Result<WeightGraph> {
    match base {
        "onpp" | "npp" | "lle" => lle_graph(cfg, ds),
        _ => affinity_graph(cfg, ds),
    }
}

fn fit_options(cfg: &RunConfig) -> FitOptions {
    let mut opts = FitOptions::default();
    if let Some(skip) = cfg.skip_first {
        opts.skip_first = skip;
    }
    opts
}

// ---------------------------------------------------------------------------
// fitting
// ---------------------------------------------------------------------------

/// A fitted model of either family.
pub enum FittedModel {
    Linear(ProjectionModel),
    Nonlinear(EmbeddingModel),
}

fn linear_method(base: &str) -> Option<LinearMethod> {
    match base {
        "onpp" => Some(LinearMethod::Onpp),
        "olpp" => Some(LinearMethod::Olpp),
        "lpp" => Some(LinearMethod::Lpp),
        "npp" => Some(LinearMethod::Npp),
        _ => None,
    }
}

/// Fits `method` at dimension `d` on `train`.
pub fn fit_method(cfg: &RunConfig, method: &MethodId, train: &DataSet, d: usize) -> Result<FittedModel> {
    if method.multiweight {
        let lm = linear_method(&method.base).ok_or_else(|| {
            EdrError::Config(format!("method '{}' has no multi-weight variant", method.base))
        })?;
        let slice_mode = train.feature_dims().len();
        if slice_mode < 2 {
            return Err(EdrError::Shape("multi-weight needs at least two feature modes".into()));
        }
        let slices = train.feature_dims()[slice_mode - 1];
        let mut ws = Vec::with_capacity(slices);
        for r in 1..=slices {
            let sub = train.feature_slice(slice_mode, r)?;
            ws.push(method_graph(cfg, &method.base, &sub)?);
        }
        return Ok(FittedModel::Linear(fit_multiweight(train, &ws, d, lm, fit_options(cfg))?));
    }
    match method.base.as_str() {
        "pca" => Ok(FittedModel::Linear(fit_pca(train, d)?)),
        "spca" => {
            let labels = require_labels(train)?;
            Ok(FittedModel::Linear(fit_spca(train, &delta_kernel(labels), d)?))
        }
        "onpp" => {
            let w = lle_graph(cfg, train)?;
            Ok(FittedModel::Linear(fit_onpp(train, &w, d, fit_options(cfg))?))
        }
        "npp" => {
            let w = lle_graph(cfg, train)?;
            Ok(FittedModel::Linear(fit_npp(train, &w, d, fit_options(cfg))?))
        }
        "olpp" => {
            let w = affinity_graph(cfg, train)?;
            Ok(FittedModel::Linear(fit_olpp(train, &w, d, fit_options(cfg))?))
        }
        "lpp" => {
            let w = affinity_graph(cfg, train)?;
            Ok(FittedModel::Linear(fit_lpp(train, &w, d, fit_options(cfg))?))
        }
        "le" => {
            let w = affinity_graph(cfg, train)?;
            Ok(FittedModel::Nonlinear(fit_le(&w, d)?))
        }
        "lle" => {
            let w = lle_graph(cfg, train)?;
            Ok(FittedModel::Nonlinear(fit_lle_with_weights(
                train,
                &w,
                cfg.graph.k(),
                d,
                cfg.graph.lle_reg(),
            )?))
        }
        other => Err(EdrError::Config(format!("unknown method '{other}'"))),
    }
}

// ---------------------------------------------------------------------------
// evaluation
// ---------------------------------------------------------------------------

/// Train and test embeddings as flat per-sample column matrices.
pub struct CellEmbeddings {
    pub train: DMatrix<f64>,
    pub test: DMatrix<f64>,
}

/// Fits `method` on `train` and embeds both sets. Nonlinear methods use
/// their out-of-sample extensions for `test`; for LE both sides use the
/// pre-rescale eigenvector coordinates so they live in the same frame.
pub fn embed_cell(
    cfg: &RunConfig,
    method: &MethodId,
    train: &DataSet,
    test: &DataSet,
    d: usize,
) -> Result<CellEmbeddings> {
    if method.multiweight || !matches!(method.base.as_str(), "le" | "lle") {
        let model = match fit_method(cfg, method, train, d)? {
            FittedModel::Linear(m) => m,
            FittedModel::Nonlinear(_) => unreachable!(),
        };
        let y_tr = transform(&model, train)?.flattened();
        let y_te = transform(&model, test)?.flattened();
        return Ok(CellEmbeddings { train: y_tr, test: y_te });
    }
    match method.base.as_str() {
        "le" => {
            let w = affinity_graph(cfg, train)?;
            let sigma = w.meta().sigma.ok_or_else(|| {
                EdrError::Numerical("affinity graph carries no σ".into())
            })?;
            let model = fit_le(&w, d)?;
            let (vecs, n) = match &model {
                EmbeddingModel::Le { eigenvectors, .. } => {
                    (eigenvectors.clone(), eigenvectors.nrows())
                }
                _ => unreachable!(),
            };
            // training coordinates: rows of the retained eigenvectors
            let y_tr = vecs.transpose();
            let xte = test.data_matrix();
            let mut y_te = DMatrix::zeros(d, test.n_samples());
            for t in 0..test.n_samples() {
                let sample = DVector::from_column_slice(xte.column(t).as_slice());
                let k_t = le_test_affinity(train, &sample, sigma)?;
                debug_assert_eq!(k_t.len(), n);
                y_te.set_column(t, &oos_le(&model, &k_t)?);
            }
            Ok(CellEmbeddings { train: y_tr, test: y_te })
        }
        "lle" => {
            let model = match fit_method(cfg, method, train, d)? {
                FittedModel::Nonlinear(m) => m,
                _ => unreachable!(),
            };
            let y_tr = model.embedding().clone();
            let y_te = oos_lle(&model, test)?;
            Ok(CellEmbeddings { train: y_tr, test: y_te })
        }
        _ => unreachable!(),
    }
}

/// One sweep cell: fit, embed, classify, score.
pub fn eval_cell(
    cfg: &RunConfig,
    method_id: &str,
    train: &DataSet,
    test: &DataSet,
    d: usize,
) -> Result<f64> {
    let method = parse_method(method_id)?;
    let labels_tr = require_labels(train)?;
    let labels_te = require_labels(test)?;
    let emb = embed_cell(cfg, &method, train, test, d)?;
    let pred = nn_classify(&emb.train, labels_tr, &emb.test)?;
    recognition_rate(&pred, labels_te)
}

// ---------------------------------------------------------------------------
// model persistence: one JSON header line followed by ETEN payloads
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelHeader {
    format: String,
    version: u32,
    method: String,
    d: usize,
    feature_dims: Vec<usize>,
    skip_first: bool,
    eigenvalues: Vec<f64>,
    /// number of ETEN payloads following the header
    slices: usize,
    config: RunConfig,
}

pub fn save_model(path: &Path, model: &ProjectionModel, cfg: &RunConfig) -> Result<()> {
    let tensors: Vec<&DenseTensor> = match &model.projection {
        Projection::Single(p) => vec![p],
        Projection::PerSlice(ps) => ps.iter().collect(),
    };
    let header = ModelHeader {
        format: "edr-model".into(),
        version: 1,
        method: model.method.clone(),
        d: model.d,
        feature_dims: model.feature_dims.clone(),
        skip_first: model.skip_first,
        eigenvalues: model.eigenvalues.clone(),
        slices: tensors.len(),
        config: cfg.clone(),
    };
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut out, &header)
        .map_err(|e| EdrError::Format(format!("model header: {e}")))?;
    out.write_all(b"\n")?;
    for t in tensors {
        edr_core::eten::write_tensor(&mut out, t)?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<ProjectionModel> {
    let mut rd = BufReader::new(std::fs::File::open(path)?);
    let mut line = String::new();
    rd.read_line(&mut line)?;
    let header: ModelHeader = serde_json::from_str(line.trim_end())
        .map_err(|e| EdrError::Format(format!("model header: {e}")))?;
    if header.format != "edr-model" || header.version != 1 {
        return Err(EdrError::Format("not an edr-model v1 file".into()));
    }
    if header.slices == 0 {
        return Err(EdrError::Format("model has no projection payload".into()));
    }
    let mut tensors = Vec::with_capacity(header.slices);
    for _ in 0..header.slices {
        tensors.push(edr_core::eten::read_tensor(&mut rd)?);
    }
    let projection = if tensors.len() == 1 {
        Projection::Single(tensors.pop().unwrap())
    } else {
        Projection::PerSlice(tensors)
    };
    Ok(ProjectionModel {
        projection,
        method: header.method,
        eigenvalues: header.eigenvalues,
        skip_first: header.skip_first,
        feature_dims: header.feature_dims,
        d: header.d,
    })
}

/// Writes an embedding as an ETEN tensor (`d×n`, or `d×I_M×n` for
/// multi-weight embeddings).
pub fn save_embedding(path: &Path, emb: &Embedding) -> Result<()> {
    let t = match emb {
        Embedding::Single(y) => {
            let shape = Shape::new(vec![y.nrows(), y.ncols()])?;
            DenseTensor::new(shape, y.as_slice().to_vec())?
        }
        Embedding::MultiWeight(t) => t.clone(),
    };
    edr_core::eten::write_tensor_file(path, &t)
}

// ---------------------------------------------------------------------------
// oracle check
// ---------------------------------------------------------------------------

/// Runs the tensor route and its matricized oracle side by side and reports
/// subspace / embedding / recognition-rate deltas.
pub fn oracle_reports(
    cfg: &RunConfig,
    train: &DataSet,
    test: Option<&DataSet>,
    methods: &[String],
    d: usize,
) -> Result<Vec<OracleReport>> {
    let x = train.data_matrix();
    let mut reports = Vec::new();
    for id in methods {
        let method = parse_method(id)?;
        if method.multiweight {
            return Err(EdrError::Config("oracle-check covers single-weight methods".into()));
        }
        let base = method.base.as_str();
        if base == "spca" {
            return Err(EdrError::Config("oracle-check has no spca oracle".into()));
        }
        let graph = if base == "pca" { None } else { Some(method_graph(cfg, base, train)?) };
        let skip = cfg.skip_first.unwrap_or(false);
        let oracle = matrix_method(base, &x, graph.as_ref(), d, skip)?;
        let pair = format!("{base}-e vs {base}");
        let report = match fit_method(cfg, &method, train, d)? {
            FittedModel::Linear(model) => {
                let p_t = match &model.projection {
                    Projection::Single(p) => projection_matrix(p),
                    Projection::PerSlice(_) => unreachable!(),
                };
                let p_m = oracle
                    .projection()
                    .ok_or_else(|| EdrError::Numerical("oracle returned no projection".into()))?
                    .clone();
                let y_t = p_t.transpose() * &x;
                let y_m = p_m.transpose() * &x;
                let (ir_t, ir_m) = match test {
                    Some(te) => {
                        let labels_tr = require_labels(train)?;
                        let labels_te = require_labels(te)?;
                        let xt = te.data_matrix();
                        let pred_t =
                            nn_classify(&y_t, labels_tr, &(p_t.transpose() * &xt))?;
                        let pred_m =
                            nn_classify(&y_m, labels_tr, &(p_m.transpose() * &xt))?;
                        (recognition_rate(&pred_t, labels_te)?, recognition_rate(&pred_m, labels_te)?)
                    }
                    None => (0.0, 0.0),
                };
                compare(&pair, &p_t, &p_m, &y_t, &y_m, ir_t, ir_m)?
            }
            FittedModel::Nonlinear(model) => {
                let y_t = model.embedding().clone();
                let y_m = oracle
                    .embedding()
                    .ok_or_else(|| EdrError::Numerical("oracle returned no embedding".into()))?
                    .clone();
                // embedding methods: compare coordinate spans and aligned values
                compare(&pair, &y_t.transpose(), &y_m.transpose(), &y_t, &y_m, 0.0, 0.0)?
            }
        };
        reports.push(report);
    }
    Ok(reports)
}

/// Largest distance in a report, used against the failure threshold.
pub fn report_max(r: &OracleReport) -> f64 {
    r.subspace_distance.max(r.embedding_distance).max(r.ir_delta)
}

// ---------------------------------------------------------------------------
// misc
// ---------------------------------------------------------------------------

/// Applies the `threads` knob to the process-global rayon pool; later calls
/// with a different value are ignored (the pool is built once).
pub fn apply_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}
