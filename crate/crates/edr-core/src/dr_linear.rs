//! Linear tensor dimension reduction: PCA, supervised PCA, ONPP, OLPP, LPP,
//! NPP and their multi-weight variants.
//!
//! Every fit produces a [`ProjectionModel`] holding the projection tensor
//! `P ∈ R^{I_1×…×I_M×d}`; [`transform`] applies `Y = Pᵀ *_M X`. The solvers
//! work on the mode-M unfolding, restricted to the data's column space so
//! that feature dimensions far larger than the sample count stay tractable.

use nalgebra::DMatrix;

use crate::data::DataSet;
use crate::error::{EdrError, Result};
use crate::graph::{laplacian_forms, WeightGraph};
use crate::spectral::{gen_sym_eig, range_basis, select, sym_eig, SelectSpec};
use crate::tensor::{fold_at, DenseTensor, Shape};

const RANGE_TOL: f64 = 1e-10;
const DEFAULT_RIDGE: f64 = 1e-10;

/// Single projection tensor, or one per frontal slice in multi-weight mode.
#[derive(Debug, Clone)]
pub enum Projection {
    Single(DenseTensor),
    PerSlice(Vec<DenseTensor>),
}

/// Fitted linear model: projection(s) plus fit metadata.
#[derive(Debug, Clone)]
pub struct ProjectionModel {
    pub projection: Projection,
    pub method: String,
    /// retained eigenvalues (concatenated per slice in multi-weight mode)
    pub eigenvalues: Vec<f64>,
    pub skip_first: bool,
    pub feature_dims: Vec<usize>,
    pub d: usize,
}

/// Projected samples: `d×n` matrix, or `d×I_M×n` tensor in multi-weight mode.
#[derive(Debug, Clone)]
pub enum Embedding {
    Single(DMatrix<f64>),
    MultiWeight(DenseTensor),
}

impl Embedding {
    pub fn n_samples(&self) -> usize {
        match self {
            Embedding::Single(y) => y.ncols(),
            Embedding::MultiWeight(t) => *t.shape().dims().last().unwrap(),
        }
    }

    /// Per-sample column vectors for downstream classification; multi-weight
    /// embeddings are flattened to `(d·I_M)`-vectors.
    pub fn flattened(&self) -> DMatrix<f64> {
        match self {
            Embedding::Single(y) => y.clone(),
            Embedding::MultiWeight(t) => {
                let n = *t.shape().dims().last().unwrap();
                let rows: usize = t.shape().dims()[..t.order() - 1].iter().product();
                DMatrix::from_column_slice(rows, n, t.data())
            }
        }
    }
}

/// Per-method knobs; defaults match the documented conventions.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub skip_first: bool,
    pub ridge: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { skip_first: false, ridge: DEFAULT_RIDGE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearMethod {
    Onpp,
    Olpp,
    Lpp,
    Npp,
}

impl LinearMethod {
    pub fn name(&self) -> &'static str {
        match self {
            LinearMethod::Onpp => "onpp",
            LinearMethod::Olpp => "olpp",
            LinearMethod::Lpp => "lpp",
            LinearMethod::Npp => "npp",
        }
    }
}

fn centering(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64)
}

/// Folds an m×d projection matrix into `P ∈ R^{I_1×…×I_M×d}`.
fn fold_projection(p: &DMatrix<f64>, feature_dims: &[usize]) -> Result<DenseTensor> {
    let mut dims = feature_dims.to_vec();
    dims.push(p.ncols());
    fold_at(p, &Shape::new(dims)?, feature_dims.len())
}

/// Ψ_M of a projection tensor: m×d matrix.
pub fn projection_matrix(p: &DenseTensor) -> DMatrix<f64> {
    let d = *p.shape().dims().last().unwrap();
    let m: usize = p.shape().dims()[..p.order() - 1].iter().product();
    DMatrix::from_column_slice(m, d, p.data())
}

/// Range-restricted symmetric solve of `X_m A X_mᵀ v = λ v`: with
/// `Q = range(X_m)` and `B = Qᵀ X_m`, solves the r×r problem on `B A Bᵀ`
/// and maps the selected vectors back through `Q`.
fn restricted_sym(
    xm: &DMatrix<f64>,
    a: &DMatrix<f64>,
    spec: SelectSpec,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let q = range_basis(xm, RANGE_TOL);
    let r = q.ncols();
    let need = spec.d + spec.skip_first as usize;
    if r < need {
        return Err(EdrError::RankDeficient(format!(
            "restricted problem has rank {r}, need {need}"
        )));
    }
    let b = q.transpose() * xm;
    let op = &b * a * b.transpose();
    if op.amax() <= 1e-14 * xm.amax().max(1.0) {
        return Err(EdrError::RankDeficient("operator is numerically zero".into()));
    }
    let eig = sym_eig(&op)?;
    let sel = select(&eig, spec)?;
    let mut p = q * sel.vectors;
    crate::linalg::fix_column_signs(&mut p);
    Ok((p, sel.values))
}

/// Range-restricted generalized solve of
/// `X_m A X_mᵀ v = λ X_m C X_mᵀ v` (smallest `d`).
fn restricted_gen(
    xm: &DMatrix<f64>,
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    spec: SelectSpec,
    ridge: f64,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let q = range_basis(xm, RANGE_TOL);
    let r = q.ncols();
    let need = spec.d + spec.skip_first as usize;
    if r < need {
        return Err(EdrError::RankDeficient(format!(
            "restricted problem has rank {r}, need {need}"
        )));
    }
    let b = q.transpose() * xm;
    let lhs = &b * a * b.transpose();
    let rhs = &b * c * b.transpose();
    let eig = gen_sym_eig(&lhs, &rhs, ridge)?;
    let sel = select(&eig, spec)?;
    let mut p = q * sel.vectors;
    crate::linalg::fix_column_signs(&mut p);
    Ok((p, sel.values))
}

/// PCA: the largest `d` left singular tensors of the centered data. The
/// n×n dual problem is used when the feature count exceeds the sample
/// count; primal and dual routes agree on the subspace.
pub fn fit_pca(x: &DataSet, d: usize) -> Result<ProjectionModel> {
    let n = x.n_samples();
    if d == 0 || d > n.saturating_sub(1) {
        return Err(EdrError::Range(format!("d = {d} out of 1..={}", n.saturating_sub(1))));
    }
    let xm = x.data_matrix();
    let z = &xm * centering(n);
    let m = z.nrows();
    let (mut p, values) = if m <= n {
        let svd = z.clone().svd(true, false);
        let u = svd.u.expect("svd with u");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&i, &j| {
            svd.singular_values[j].partial_cmp(&svd.singular_values[i]).unwrap()
        });
        let smax = svd.singular_values[order[0]].max(1e-300);
        if svd.singular_values[order[d - 1]] <= RANGE_TOL * smax {
            return Err(EdrError::RankDeficient(format!(
                "centered data has rank < {d}"
            )));
        }
        let mut p = DMatrix::zeros(m, d);
        let mut values = Vec::with_capacity(d);
        for (k, &i) in order[..d].iter().enumerate() {
            p.set_column(k, &u.column(i));
            values.push(svd.singular_values[i]);
        }
        (p, values)
    } else {
        // dual: (Ψ(Z)ᵀ Ψ(Z)) z = λ z, then map through Ψ(Z)
        let g = z.transpose() * &z;
        let eig = sym_eig(&g)?;
        let sel = select(&eig, SelectSpec::largest(d))?;
        let lmax = sel.values[0].max(1e-300);
        if sel.values[d - 1] <= (RANGE_TOL * lmax.sqrt()).powi(2) {
            return Err(EdrError::RankDeficient(format!(
                "centered data has rank < {d}"
            )));
        }
        let mut p = DMatrix::zeros(m, d);
        let mut values = Vec::with_capacity(d);
        for k in 0..d {
            let col = &z * sel.vectors.column(k);
            let norm = col.norm();
            p.set_column(k, &(col / norm));
            values.push(sel.values[k].max(0.0).sqrt());
        }
        (p, values)
    };
    crate::linalg::fix_column_signs(&mut p);
    Ok(ProjectionModel {
        projection: Projection::Single(fold_projection(&p, x.feature_dims())?),
        method: "pca".into(),
        eigenvalues: values,
        skip_first: false,
        feature_dims: x.feature_dims().to_vec(),
        d,
    })
}

/// Delta label kernel: `K_L[i,j] = 1` iff samples share a class.
pub fn delta_kernel(labels: &[usize]) -> DMatrix<f64> {
    let n = labels.len();
    DMatrix::from_fn(n, n, |i, j| if labels[i] == labels[j] { 1.0 } else { 0.0 })
}

/// Supervised PCA: largest `d` eigen-tensors of the operator built from the
/// doubly-centered label kernel `H K_L H`.
pub fn fit_spca(x: &DataSet, k_l: &DMatrix<f64>, d: usize) -> Result<ProjectionModel> {
    let n = x.n_samples();
    if k_l.nrows() != n || k_l.ncols() != n {
        return Err(EdrError::Shape(format!(
            "label kernel is {}×{}, need {n}×{n}",
            k_l.nrows(),
            k_l.ncols()
        )));
    }
    if d == 0 {
        return Err(EdrError::Range("d must be >= 1".into()));
    }
    let h = centering(n);
    let hkh = &h * k_l * h;
    let xm = x.data_matrix();
    let (p, values) = restricted_sym(&xm, &hkh, SelectSpec::largest(d))?;
    Ok(ProjectionModel {
        projection: Projection::Single(fold_projection(&p, x.feature_dims())?),
        method: "spca".into(),
        eigenvalues: values,
        skip_first: false,
        feature_dims: x.feature_dims().to_vec(),
        d,
    })
}

fn i_minus_w(w: &WeightGraph) -> DMatrix<f64> {
    DMatrix::identity(w.n(), w.n()) - w.matrix()
}

/// ONPP: smallest `d` left singular tensors of `X ×_{M+1} (I−W)`, i.e. the
/// smallest eigen-tensors of the operator built from `M = (I−Wᵀ)(I−W)`.
pub fn fit_onpp(x: &DataSet, w: &WeightGraph, d: usize, opts: FitOptions) -> Result<ProjectionModel> {
    check_graph(x, w)?;
    let iw = i_minus_w(w);
    let m_mat = iw.transpose() * &iw;
    let xm = x.data_matrix();
    let spec = SelectSpec::smallest(d).skip_first(opts.skip_first);
    let (p, values) = restricted_sym(&xm, &m_mat, spec)?;
    model_from(p, values, "onpp", opts.skip_first, x, d)
}

/// OLPP: smallest `d` eigen-tensors of the operator built from `L = D − W`.
pub fn fit_olpp(x: &DataSet, w: &WeightGraph, d: usize, opts: FitOptions) -> Result<ProjectionModel> {
    check_graph(x, w)?;
    require_symmetric(w, "olpp")?;
    let forms = laplacian_forms(w)?;
    let xm = x.data_matrix();
    let spec = SelectSpec::smallest(d).skip_first(opts.skip_first);
    let (p, values) = restricted_sym(&xm, &forms.l, spec)?;
    model_from(p, values, "olpp", opts.skip_first, x, d)
}

/// LPP: smallest `d` generalized eigen-tensors of the `L` operator against
/// the `D` operator; projection columns are B-orthonormal.
pub fn fit_lpp(x: &DataSet, w: &WeightGraph, d: usize, opts: FitOptions) -> Result<ProjectionModel> {
    check_graph(x, w)?;
    require_symmetric(w, "lpp")?;
    let forms = laplacian_forms(w)?;
    if forms.degrees.iter().any(|&v| v <= 0.0) {
        return Err(EdrError::Definiteness("graph has a zero-degree vertex".into()));
    }
    let dm = DMatrix::from_diagonal(&forms.degrees);
    let xm = x.data_matrix();
    let spec = SelectSpec::smallest(d).skip_first(opts.skip_first);
    let (p, values) = restricted_gen(&xm, &forms.l, &dm, spec, opts.ridge)?;
    model_from(p, values, "lpp", opts.skip_first, x, d)
}

/// NPP: smallest `d` generalized eigen-tensors of the `M = (I−Wᵀ)(I−W)`
/// operator against the uncentered covariance operator.
pub fn fit_npp(x: &DataSet, w: &WeightGraph, d: usize, opts: FitOptions) -> Result<ProjectionModel> {
    check_graph(x, w)?;
    let iw = i_minus_w(w);
    let m_mat = iw.transpose() * &iw;
    let eye = DMatrix::identity(w.n(), w.n());
    let xm = x.data_matrix();
    let spec = SelectSpec::smallest(d).skip_first(opts.skip_first);
    let (p, values) = restricted_gen(&xm, &m_mat, &eye, spec, opts.ridge)?;
    model_from(p, values, "npp", opts.skip_first, x, d)
}

fn check_graph(x: &DataSet, w: &WeightGraph) -> Result<()> {
    if w.n() != x.n_samples() {
        return Err(EdrError::Shape(format!(
            "graph on {} vertices, dataset has {} samples",
            w.n(),
            x.n_samples()
        )));
    }
    Ok(())
}

fn require_symmetric(w: &WeightGraph, what: &str) -> Result<()> {
    if !w.is_symmetric() {
        return Err(EdrError::Config(format!("{what} needs a symmetric graph")));
    }
    Ok(())
}

fn model_from(
    p: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    method: &str,
    skip_first: bool,
    x: &DataSet,
    d: usize,
) -> Result<ProjectionModel> {
    Ok(ProjectionModel {
        projection: Projection::Single(fold_projection(&p, x.feature_dims())?),
        method: method.into(),
        eigenvalues,
        skip_first,
        feature_dims: x.feature_dims().to_vec(),
        d,
    })
}

fn fit_single(
    x: &DataSet,
    w: &WeightGraph,
    d: usize,
    method: LinearMethod,
    opts: FitOptions,
) -> Result<ProjectionModel> {
    match method {
        LinearMethod::Onpp => fit_onpp(x, w, d, opts),
        LinearMethod::Olpp => fit_olpp(x, w, d, opts),
        LinearMethod::Lpp => fit_lpp(x, w, d, opts),
        LinearMethod::Npp => fit_npp(x, w, d, opts),
    }
}

/// Multi-weight fit: each frontal slice of the last feature mode gets its
/// own weight graph and its own independent projection over the remaining
/// feature modes.
pub fn fit_multiweight(
    x: &DataSet,
    ws: &[WeightGraph],
    d: usize,
    method: LinearMethod,
    opts: FitOptions,
) -> Result<ProjectionModel> {
    let m = x.feature_dims().len();
    if m < 2 {
        return Err(EdrError::Config("multi-weight needs at least 2 feature modes".into()));
    }
    let i_m = x.feature_dims()[m - 1];
    if ws.len() != i_m {
        return Err(EdrError::Shape(format!(
            "{} weight graphs for {i_m} slices",
            ws.len()
        )));
    }
    let mut projections = Vec::with_capacity(i_m);
    let mut eigenvalues = Vec::new();
    for r in 1..=i_m {
        let sub = x.feature_slice(m, r)?;
        let model = fit_single(&sub, &ws[r - 1], d, method, opts)
            .map_err(|e| EdrError::Numerical(format!("slice {r}: {e}")))?;
        match model.projection {
            Projection::Single(p) => projections.push(p),
            Projection::PerSlice(_) => unreachable!(),
        }
        eigenvalues.extend(model.eigenvalues);
    }
    Ok(ProjectionModel {
        projection: Projection::PerSlice(projections),
        method: format!("{}-mw", method.name()),
        eigenvalues,
        skip_first: opts.skip_first,
        feature_dims: x.feature_dims().to_vec(),
        d,
    })
}

/// `Y = Pᵀ *_M X`; multi-weight models apply each per-slice projection to
/// its slice and stack the results into a `d×I_M×n` tensor.
pub fn transform(model: &ProjectionModel, x: &DataSet) -> Result<Embedding> {
    if x.feature_dims() != model.feature_dims.as_slice() {
        return Err(EdrError::Shape(format!(
            "feature dims {:?} do not match model {:?}",
            x.feature_dims(),
            model.feature_dims
        )));
    }
    match &model.projection {
        Projection::Single(p) => {
            let pm = projection_matrix(p);
            Ok(Embedding::Single(pm.transpose() * x.data_matrix()))
        }
        Projection::PerSlice(ps) => {
            let m = model.feature_dims.len();
            let i_m = model.feature_dims[m - 1];
            let n = x.n_samples();
            let d = model.d;
            let mut data = vec![0.0; d * i_m * n];
            for (r0, p) in ps.iter().enumerate() {
                let sub = x.feature_slice(m, r0 + 1)?;
                let y = projection_matrix(p).transpose() * sub.data_matrix();
                for s in 0..n {
                    for j in 0..d {
                        data[s * d * i_m + r0 * d + j] = y[(j, s)];
                    }
                }
            }
            Ok(Embedding::MultiWeight(DenseTensor::new(
                Shape::new(vec![d, i_m, n])?,
                data,
            )?))
        }
    }
}
