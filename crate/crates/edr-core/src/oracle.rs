//! Matricized classical implementations of the table of baseline methods,
//! plus brute-force numerical oracles. Used by tests and the `oracle-check`
//! CLI command; these paths favor literal transcription over speed.

use nalgebra::DMatrix;

use crate::error::{EdrError, Result};
use crate::graph::{laplacian_forms, WeightGraph};
use crate::linalg::{procrustes_distance, subspace_distance};
use crate::spectral::{gen_sym_eig, range_basis, select, sym_eig, SelectSpec};
use crate::tensor::{ivec, DenseTensor, Shape};

const RANGE_TOL: f64 = 1e-10;
const RIDGE: f64 = 1e-10;

/// Output of a classical method: a projection basis (columns) or a direct
/// embedding (rows).
#[derive(Debug, Clone)]
pub enum MatrixDr {
    /// m×d projection matrix
    Projection(DMatrix<f64>),
    /// d×n embedding
    Embedding(DMatrix<f64>),
}

impl MatrixDr {
    pub fn projection(&self) -> Option<&DMatrix<f64>> {
        match self {
            MatrixDr::Projection(p) => Some(p),
            MatrixDr::Embedding(_) => None,
        }
    }

    pub fn embedding(&self) -> Option<&DMatrix<f64>> {
        match self {
            MatrixDr::Embedding(y) => Some(y),
            MatrixDr::Projection(_) => None,
        }
    }
}

fn centering(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64)
}

/// `M = (I−Wᵀ)(I−W)`; computed directly because LLE reconstruction weights
/// may be negative, which the Laplacian constructor rejects.
fn lle_m_matrix(w: &WeightGraph) -> DMatrix<f64> {
    let n = w.n();
    let iw = DMatrix::identity(n, n) - w.matrix();
    iw.transpose() * &iw
}

/// Range-restricted symmetric solve mirroring the tensor path's policy.
fn restricted(x: &DMatrix<f64>, a: &DMatrix<f64>, spec: SelectSpec) -> Result<DMatrix<f64>> {
    let q = range_basis(x, RANGE_TOL);
    if q.ncols() < spec.d + spec.skip_first as usize {
        return Err(EdrError::RankDeficient(format!(
            "restricted rank {} < requested {}",
            q.ncols(),
            spec.d
        )));
    }
    let b = q.transpose() * x;
    let op = &b * a * b.transpose();
    let eig = sym_eig(&op)?;
    let sel = select(&eig, spec)?;
    let mut p = q * sel.vectors;
    crate::linalg::fix_column_signs(&mut p);
    Ok(p)
}

fn restricted_generalized(
    x: &DMatrix<f64>,
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    spec: SelectSpec,
) -> Result<DMatrix<f64>> {
    let q = range_basis(x, RANGE_TOL);
    if q.ncols() < spec.d + spec.skip_first as usize {
        return Err(EdrError::RankDeficient(format!(
            "restricted rank {} < requested {}",
            q.ncols(),
            spec.d
        )));
    }
    let b = q.transpose() * x;
    let lhs = &b * a * b.transpose();
    let rhs = &b * c * b.transpose();
    let eig = gen_sym_eig(&lhs, &rhs, RIDGE)?;
    let sel = select(&eig, spec)?;
    let mut p = q * sel.vectors;
    crate::linalg::fix_column_signs(&mut p);
    Ok(p)
}

/// Classical baseline solutions on an m×n data matrix, transcribed from the
/// standard solution column of each method:
///
/// * `pca`  — largest d left singular vectors of `XH`
/// * `olpp` — smallest d eigenvectors of `X L Xᵀ`
/// * `onpp` — smallest d eigenvectors of `X M Xᵀ`, `M = (I−Wᵀ)(I−W)`
/// * `lpp`  — solution of `X̂(I−Ŵ)X̂ᵀ u = λ X̂ X̂ᵀ u` with `X̂ = XD^{1/2}`,
///   `Ŵ = D^{−1/2} W D^{−1/2}`
/// * `npp`  — solution of `X M Xᵀ u = λ X Xᵀ u`
/// * `lle`  — smallest d eigenvectors of `M` (second onward)
/// * `le`   — solution of `L u = λ D u` (second onward)
pub fn matrix_method(
    name: &str,
    x: &DMatrix<f64>,
    w: Option<&WeightGraph>,
    d: usize,
    skip_first: bool,
) -> Result<MatrixDr> {
    let n = x.ncols();
    let need_graph = || {
        w.ok_or_else(|| EdrError::Config(format!("method '{name}' needs a weight graph")))
    };
    match name {
        "pca" => {
            let z = x * centering(n);
            let svd = z.svd(true, false);
            let u = svd.u.unwrap();
            let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
            order.sort_by(|&i, &j| {
                svd.singular_values[j].partial_cmp(&svd.singular_values[i]).unwrap()
            });
            if d > order.len() {
                return Err(EdrError::Range(format!("d = {d} too large")));
            }
            let mut p = DMatrix::zeros(x.nrows(), d);
            for (k, &i) in order[..d].iter().enumerate() {
                p.set_column(k, &u.column(i));
            }
            crate::linalg::fix_column_signs(&mut p);
            Ok(MatrixDr::Projection(p))
        }
        "olpp" => {
            let forms = laplacian_forms(need_graph()?)?;
            let p = restricted(x, &forms.l, SelectSpec::smallest(d).skip_first(skip_first))?;
            Ok(MatrixDr::Projection(p))
        }
        "onpp" => {
            let m = lle_m_matrix(need_graph()?);
            let p = restricted(x, &m, SelectSpec::smallest(d).skip_first(skip_first))?;
            Ok(MatrixDr::Projection(p))
        }
        "lpp" => {
            let forms = laplacian_forms(need_graph()?)?;
            if forms.degrees.iter().any(|&v| v <= 0.0) {
                return Err(EdrError::Definiteness("zero-degree vertex".into()));
            }
            let dsqrt: Vec<f64> = forms.degrees.iter().map(|v| v.sqrt()).collect();
            // X̂ = X D^{1/2}, Ŵ = D^{-1/2} W D^{-1/2}
            let mut xhat = x.clone();
            for j in 0..n {
                let s = dsqrt[j];
                for i in 0..x.nrows() {
                    xhat[(i, j)] *= s;
                }
            }
            let wg = need_graph()?;
            let mut what = wg.matrix().clone();
            for i in 0..n {
                for j in 0..n {
                    what[(i, j)] /= dsqrt[i] * dsqrt[j];
                }
            }
            let iw = DMatrix::identity(n, n) - what;
            let eye = DMatrix::identity(n, n);
            let p = restricted_generalized(
                &xhat,
                &iw,
                &eye,
                SelectSpec::smallest(d).skip_first(skip_first),
            )?;
            Ok(MatrixDr::Projection(p))
        }
        "npp" => {
            let m = lle_m_matrix(need_graph()?);
            let eye = DMatrix::identity(n, n);
            let p = restricted_generalized(
                x,
                &m,
                &eye,
                SelectSpec::smallest(d).skip_first(skip_first),
            )?;
            Ok(MatrixDr::Projection(p))
        }
        "lle" => {
            let m = lle_m_matrix(need_graph()?);
            let eig = sym_eig(&m)?;
            let sel = select(&eig, SelectSpec::smallest(d).skip_first(true))?;
            Ok(MatrixDr::Embedding(sel.vectors.transpose()))
        }
        "le" => {
            let forms = laplacian_forms(need_graph()?)?;
            let dm = DMatrix::from_diagonal(&forms.degrees);
            let eig = gen_sym_eig(&forms.l, &dm, RIDGE)?;
            let sel = select(&eig, SelectSpec::smallest(d).skip_first(true))?;
            Ok(MatrixDr::Embedding(sel.vectors.transpose()))
        }
        other => Err(EdrError::Config(format!("unknown method '{other}'"))),
    }
}

/// Literal nested-sum evaluation of the Einstein product, contracting the
/// last `n` modes of `a` with the first `n` of `b`. Guarded to small sizes.
pub fn brute_contract(a: &DenseTensor, b: &DenseTensor, n: usize) -> Result<DenseTensor> {
    let adims = a.shape().dims();
    let bdims = b.shape().dims();
    if n > a.order() || n > b.order() {
        return Err(EdrError::Shape("contraction order exceeds tensor order".into()));
    }
    let (afree, acontract) = adims.split_at(a.order() - n);
    let (bcontract, bfree) = bdims.split_at(n);
    if acontract != bcontract {
        return Err(EdrError::Shape(format!(
            "contracted extents {acontract:?} vs {bcontract:?}"
        )));
    }
    let mut out_dims: Vec<usize> = afree.to_vec();
    out_dims.extend_from_slice(bfree);
    let total: usize = out_dims.iter().product::<usize>().max(1)
        * acontract.iter().product::<usize>().max(1);
    if total > 1_000_000 {
        return Err(EdrError::Range("brute_contract size guard exceeded".into()));
    }
    let out_shape = Shape::new(out_dims.clone())?;
    let contract_shape = Shape::new(acontract.to_vec())?;
    let a_shape = a.shape().clone();
    let b_shape = b.shape().clone();
    let mut out = DenseTensor::zeros(out_shape.clone());

    // iterate 1-based multi-indices of a shape
    fn indices(dims: &[usize]) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for &d in dims {
            let mut next = Vec::with_capacity(out.len() * d);
            for v in 1..=d {
                for base in &out {
                    let mut b = base.clone();
                    b.push(v);
                    next.push(b);
                }
            }
            out = next;
        }
        out
    }

    let free_idx = indices(&out_dims);
    let sum_idx = indices(acontract);
    let nf = afree.len();
    for fidx in &free_idx {
        let mut acc = 0.0;
        for sidx in &sum_idx {
            let mut ai: Vec<usize> = fidx[..nf].to_vec();
            ai.extend_from_slice(sidx);
            let mut bi: Vec<usize> = sidx.clone();
            bi.extend_from_slice(&fidx[nf..]);
            let av = a.data()[ivec(&ai, &a_shape)? - 1];
            let bv = b.data()[ivec(&bi, &b_shape)? - 1];
            acc += av * bv;
        }
        let pos = ivec(fidx, &out_shape)? - 1;
        out.data_mut()[pos] = acc;
    }
    let _ = contract_shape;
    Ok(out)
}

/// Side-by-side result of a tensor-route / matrix-route pair.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub pair: String,
    pub subspace_distance: f64,
    /// per-sample embedding residual after optimal orthogonal alignment
    pub embedding_distance: f64,
    pub ir_delta: f64,
}

impl OracleReport {
    pub fn is_finite(&self) -> bool {
        self.subspace_distance.is_finite()
            && self.embedding_distance.is_finite()
            && self.ir_delta.is_finite()
    }
}

/// Compares a tensor-route result against its matrix oracle: projection
/// subspace distance, Procrustes-aligned embedding residual, and the
/// recognition-rate delta supplied by the caller.
pub fn compare(
    pair: &str,
    p_tensor: &DMatrix<f64>,
    p_matrix: &DMatrix<f64>,
    y_tensor: &DMatrix<f64>,
    y_matrix: &DMatrix<f64>,
    ir_tensor: f64,
    ir_matrix: f64,
) -> Result<OracleReport> {
    if p_tensor.shape() != p_matrix.shape() || y_tensor.shape() != y_matrix.shape() {
        return Err(EdrError::Shape("compared results have different shapes".into()));
    }
    Ok(OracleReport {
        pair: pair.to_string(),
        subspace_distance: subspace_distance(p_tensor, p_matrix),
        embedding_distance: procrustes_distance(y_tensor, y_matrix),
        ir_delta: (ir_tensor - ir_matrix).abs(),
    })
}
