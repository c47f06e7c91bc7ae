//! Nonlinear embeddings: Laplacian Eigenmap and Locally Linear Embedding,
//! each with its out-of-sample extension.

use nalgebra::{DMatrix, DVector};

use crate::data::DataSet;
use crate::error::{EdrError, Result};
use crate::graph::{laplacian_forms, lle_weights, reconstruction_weights, WeightGraph};
use crate::spectral::{select, sym_eig, SelectSpec};

const ZERO_EIG_TOL: f64 = 1e-10;

/// Fitted nonlinear embedding with the state its out-of-sample extension
/// needs: LE keeps the retained eigenpairs of `L_n` and the degree vector,
/// LLE keeps the training data.
#[derive(Debug, Clone)]
pub enum EmbeddingModel {
    Le {
        /// d×n embedding (after the `D^{−1/2}` rescale)
        y: DMatrix<f64>,
        /// retained eigenvalues `λ_2..λ_{d+1}` of `L_n`
        eigenvalues: Vec<f64>,
        /// matching eigenvectors as n×d columns
        eigenvectors: DMatrix<f64>,
        degrees: DVector<f64>,
    },
    Lle {
        /// d×n embedding
        y: DMatrix<f64>,
        train: DataSet,
        k: usize,
        reg: f64,
    },
}

impl EmbeddingModel {
    pub fn embedding(&self) -> &DMatrix<f64> {
        match self {
            EmbeddingModel::Le { y, .. } => y,
            EmbeddingModel::Lle { y, .. } => y,
        }
    }

    pub fn d(&self) -> usize {
        self.embedding().nrows()
    }
}

/// Laplacian Eigenmap: rows of `Ŷ` are eigenvectors `2..d+1` of the
/// normalized Laplacian, rescaled as `Y = Ŷ·D^{−1/2}` so that
/// `Y D Yᵀ = I_d`.
pub fn fit_le(w: &WeightGraph, d: usize) -> Result<EmbeddingModel> {
    if !w.is_symmetric() {
        return Err(EdrError::Config("le needs a symmetric graph".into()));
    }
    let n = w.n();
    if d == 0 || d + 1 > n {
        return Err(EdrError::Range(format!("d = {d} out of 1..{}", n.saturating_sub(1))));
    }
    let forms = laplacian_forms(w)?;
    let eig = sym_eig(&forms.l_n)?;
    let zero_mult = eig.values.iter().filter(|&&v| v.abs() <= ZERO_EIG_TOL).count();
    if zero_mult >= d + 1 {
        return Err(EdrError::Definiteness(format!(
            "graph too disconnected: eigenvalue 0 has multiplicity {zero_mult} >= d+1"
        )));
    }
    let sel = select(&eig, SelectSpec::smallest(d).skip_first(true))?;
    let dinv_sqrt: Vec<f64> = forms
        .degrees
        .iter()
        .map(|&v| if v > 0.0 { 1.0 / v.sqrt() } else { 0.0 })
        .collect();
    let mut y = DMatrix::zeros(d, n);
    for j in 0..d {
        for i in 0..n {
            y[(j, i)] = sel.vectors[(i, j)] * dinv_sqrt[i];
        }
    }
    Ok(EmbeddingModel::Le {
        y,
        eigenvalues: sel.values,
        eigenvectors: sel.vectors,
        degrees: forms.degrees,
    })
}

/// LE out-of-sample: `y_{t,j} = (1/λ_j)·k_tᵀ v_j`, with `k_t` built by the
/// same affinity rule as training. The coordinates correspond to the
/// pre-rescale eigenvector rows (no `D^{−1/2}` factor for the test point).
pub fn oos_le(model: &EmbeddingModel, k_t: &DVector<f64>) -> Result<DVector<f64>> {
    let (eigenvalues, eigenvectors) = match model {
        EmbeddingModel::Le { eigenvalues, eigenvectors, .. } => (eigenvalues, eigenvectors),
        EmbeddingModel::Lle { .. } => {
            return Err(EdrError::Config("oos_le needs an LE model".into()))
        }
    };
    if k_t.len() != eigenvectors.nrows() {
        return Err(EdrError::Shape(format!(
            "affinity vector length {} != n = {}",
            k_t.len(),
            eigenvectors.nrows()
        )));
    }
    let mut y = DVector::zeros(eigenvalues.len());
    for (j, &lambda) in eigenvalues.iter().enumerate() {
        if lambda.abs() <= ZERO_EIG_TOL {
            return Err(EdrError::Numerical(format!(
                "retained eigenvalue {j} is zero; out-of-sample undefined"
            )));
        }
        y[j] = eigenvectors.column(j).dot(k_t) / lambda;
    }
    Ok(y)
}

/// LLE with internally computed reconstruction weights: `Y` rows are
/// eigenvectors `2..d+1` of `(I−Wᵀ)(I−W)` (the all-ones vector is the
/// trivial one with eigenvalue 0).
pub fn fit_lle(x: &DataSet, k: usize, d: usize, reg: f64) -> Result<EmbeddingModel> {
    let w = lle_weights(x, k, reg)?;
    fit_lle_with_weights(x, &w, k, d, reg)
}

/// LLE from precomputed row-stochastic weights (used by the supervised
/// variant, which changes only the neighbor search).
pub fn fit_lle_with_weights(
    x: &DataSet,
    w: &WeightGraph,
    k: usize,
    d: usize,
    reg: f64,
) -> Result<EmbeddingModel> {
    let n = x.n_samples();
    if w.n() != n {
        return Err(EdrError::Shape("weight graph size mismatch".into()));
    }
    if d == 0 || d + 1 > n {
        return Err(EdrError::Range(format!("d = {d} out of 1..{}", n.saturating_sub(1))));
    }
    let iw = DMatrix::identity(n, n) - w.matrix();
    let m = iw.transpose() * &iw;
    let eig = sym_eig(&m)?;
    let sel = select(&eig, SelectSpec::smallest(d).skip_first(true))?;
    Ok(EmbeddingModel::Lle {
        y: sel.vectors.transpose(),
        train: x.clone(),
        k,
        reg,
    })
}

/// LLE out-of-sample: each test point is reconstructed from its `k`
/// nearest training samples with sum-to-one weights, and those weights are
/// applied to the training embedding columns.
pub fn oos_lle(model: &EmbeddingModel, xt: &DataSet) -> Result<DMatrix<f64>> {
    let (y, train, k, reg) = match model {
        EmbeddingModel::Lle { y, train, k, reg } => (y, train, *k, *reg),
        EmbeddingModel::Le { .. } => {
            return Err(EdrError::Config("oos_lle needs an LLE model".into()))
        }
    };
    if xt.feature_dims() != train.feature_dims() {
        return Err(EdrError::Shape("test feature dims differ from training".into()));
    }
    let xtr = train.data_matrix();
    let xte = xt.data_matrix();
    let n = train.n_samples();
    let nt = xt.n_samples();
    let mut out = DMatrix::zeros(y.nrows(), nt);
    for t in 0..nt {
        let p = xte.column(t).into_owned();
        // k nearest training samples, ties toward the smaller index
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let da = (&p - xtr.column(a)).norm_squared();
            let db = (&p - xtr.column(b)).norm_squared();
            da.partial_cmp(&db).unwrap().then(a.cmp(&b))
        });
        order.truncate(k);
        let mut nb = DMatrix::zeros(xtr.nrows(), k);
        for (c, &j) in order.iter().enumerate() {
            nb.set_column(c, &xtr.column(j));
        }
        let wt = reconstruction_weights(&p, &nb, reg)?;
        let mut col = DVector::zeros(y.nrows());
        for (c, &j) in order.iter().enumerate() {
            col += y.column(j) * wt[c];
        }
        out.set_column(t, &col);
    }
    Ok(out)
}

/// Affinity vector of a test sample against the training set under the
/// training Gaussian rule (`σ` from the graph metadata).
pub fn le_test_affinity(train: &DataSet, sample: &DVector<f64>, sigma: f64) -> Result<DVector<f64>> {
    if sigma <= 0.0 {
        return Err(EdrError::Config("σ must be positive".into()));
    }
    let xm = train.data_matrix();
    if sample.len() != xm.nrows() {
        return Err(EdrError::Shape("test sample dimension mismatch".into()));
    }
    Ok(DVector::from_fn(train.n_samples(), |i, _| {
        let d2 = (sample - xm.column(i)).norm_squared();
        (-d2 / (sigma * sigma)).exp()
    }))
}
