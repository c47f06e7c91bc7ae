//! Kernelized variants on a Gram matrix: kernel PCA, kernel LPP, kernel
//! ONPP and kernel OLPP, plus Gram construction and centering.

use nalgebra::DMatrix;

use crate::data::DataSet;
use crate::error::{EdrError, Result};
use crate::graph::{laplacian_forms, pairwise_sq_dists, WeightGraph};
use crate::spectral::{gen_sym_eig, select, sym_eig, SelectSpec};

/// The five supported kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `exp(−‖x−y‖²/σ²)`; `sigma = None` uses the auto rule from `graph`
    Gaussian { sigma: Option<f64> },
    /// `(⟨x,y⟩ + offset)^degree`
    Polynomial { degree: u32, offset: f64 },
    /// `⟨x,y⟩`
    Linear,
    /// `exp(−‖x−y‖/σ)`
    Laplacian { sigma: f64 },
    /// `tanh(slope·⟨x,y⟩ + offset)`
    Sigmoid { slope: f64, offset: f64 },
}

/// Symmetric Gram matrix with a centering flag.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    k: DMatrix<f64>,
    centered: bool,
}

impl GramMatrix {
    pub fn new(k: DMatrix<f64>, centered: bool) -> Result<Self> {
        if !k.is_square() {
            return Err(EdrError::Shape("Gram matrix must be square".into()));
        }
        let asym = (&k - k.transpose()).amax();
        if asym > 1e-8 * k.amax().max(1e-300) {
            return Err(EdrError::Shape(format!(
                "Gram matrix asymmetric (max {asym:.3e})"
            )));
        }
        if centered {
            let n = k.nrows();
            let ones = nalgebra::DVector::from_element(n, 1.0);
            if (&k * &ones).amax() > 1e-8 * k.amax().max(1.0) {
                return Err(EdrError::Shape("centered Gram has nonzero row sums".into()));
            }
        }
        Ok(GramMatrix { k, centered })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn n(&self) -> usize {
        self.k.nrows()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }
}

/// Gram matrix of a dataset under the given kernel, computed from Frobenius
/// inner products / distances of the sample slices.
pub fn gram(x: &DataSet, spec: KernelSpec) -> Result<GramMatrix> {
    let xm = x.data_matrix();
    let inner = xm.transpose() * &xm;
    let n = x.n_samples();
    let k = match spec {
        KernelSpec::Linear => inner,
        KernelSpec::Polynomial { degree, offset } => {
            if degree == 0 {
                return Err(EdrError::Config("polynomial degree must be >= 1".into()));
            }
            inner.map(|v| (v + offset).powi(degree as i32))
        }
        KernelSpec::Sigmoid { slope, offset } => inner.map(|v| (slope * v + offset).tanh()),
        KernelSpec::Gaussian { sigma } => {
            let d2 = pairwise_sq_dists(x)?;
            let s = match sigma {
                Some(s) => s,
                None => crate::graph::auto_sigma(&d2),
            };
            if s <= 0.0 {
                return Err(EdrError::Config(format!("σ = {s} must be positive")));
            }
            d2.map(|v| (-v / (s * s)).exp())
        }
        KernelSpec::Laplacian { sigma } => {
            if sigma <= 0.0 {
                return Err(EdrError::Config(format!("σ = {sigma} must be positive")));
            }
            let d2 = pairwise_sq_dists(x)?;
            d2.map(|v| (-v.sqrt() / sigma).exp())
        }
    };
    let k = (&k + k.transpose()) * 0.5;
    let _ = n;
    GramMatrix::new(k, false)
}

/// Double centering `K̂ = J K J` with `J = I − (1/n)11ᵀ`.
pub fn center_gram(g: &GramMatrix) -> Result<GramMatrix> {
    let n = g.n();
    let j = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    let khat = &j * g.matrix() * &j;
    let khat = (&khat + khat.transpose()) * 0.5;
    GramMatrix::new(khat, true)
}

fn centered(g: &GramMatrix) -> Result<GramMatrix> {
    if g.is_centered() {
        Ok(g.clone())
    } else {
        center_gram(g)
    }
}

/// Kernel fit output: embedding rows plus the retained eigenvalues.
#[derive(Debug, Clone)]
pub struct KernelFit {
    /// d×n embedding
    pub y: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

/// Kernel PCA: rows of `Y` are the largest `d` eigenvectors of the centered
/// Gram, each scaled by `√λ_j`, so that `YᵀY` reproduces the dominant part
/// of `K̂`.
pub fn fit_kpca(g: &GramMatrix, d: usize) -> Result<KernelFit> {
    let gc = centered(g)?;
    let n = gc.n();
    if d == 0 || d > n {
        return Err(EdrError::Range(format!("d = {d} out of 1..={n}")));
    }
    let eig = sym_eig(gc.matrix())?;
    let sel = select(&eig, SelectSpec::largest(d))?;
    let lmax = sel.values[0].max(1e-300);
    if sel.values[d - 1] <= 1e-12 * lmax {
        return Err(EdrError::RankDeficient(format!(
            "centered Gram has fewer than {d} positive eigenvalues"
        )));
    }
    let mut y = DMatrix::zeros(d, n);
    for j in 0..d {
        let s = sel.values[j].sqrt();
        for i in 0..n {
            y[(j, i)] = s * sel.vectors[(i, j)];
        }
    }
    Ok(KernelFit { y, eigenvalues: sel.values })
}

/// Kernel LPP. The reduction eliminates `K` from the eigenproblem, leaving
/// `L z = λ D z`; `K` is still checked for the stated invertibility
/// hypothesis (a warning is logged when it is ill-conditioned).
pub fn fit_klpp(g: &GramMatrix, w: &WeightGraph, d: usize, ridge: f64) -> Result<KernelFit> {
    if w.n() != g.n() {
        return Err(EdrError::Shape("graph and Gram sizes differ".into()));
    }
    if !w.is_symmetric() {
        return Err(EdrError::Config("klpp needs a symmetric graph".into()));
    }
    let keig = sym_eig(g.matrix())?;
    let kmax = keig.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let kmin = keig.values.iter().fold(f64::INFINITY, |m, &v| m.min(v.abs()));
    if kmin <= 0.0 || kmax / kmin > 1e12 {
        log::warn!("kernel LPP: Gram matrix is ill-conditioned (proceeding anyway)");
    }
    let forms = laplacian_forms(w)?;
    if forms.degrees.iter().any(|&v| v <= 0.0) {
        return Err(EdrError::Definiteness("graph has a zero-degree vertex".into()));
    }
    let dm = DMatrix::from_diagonal(&forms.degrees);
    let eig = gen_sym_eig(&forms.l, &dm, ridge)?;
    let sel = select(&eig, SelectSpec::smallest(d))?;
    Ok(KernelFit { y: sel.vectors.transpose(), eigenvalues: sel.values })
}

/// Symmetric PSD square root via eigendecomposition, eigenvalues clamped
/// at zero; errors when the matrix is indefinite beyond tolerance.
fn psd_sqrt(k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = sym_eig(k)?;
    let lmax = eig.values.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    if eig.values[0] < -1e-8 * lmax.max(1.0) {
        return Err(EdrError::Definiteness(format!(
            "Gram matrix indefinite (λ_min = {:.3e})",
            eig.values[0]
        )));
    }
    let n = k.nrows();
    let mut scaled = eig.vectors.clone();
    for j in 0..n {
        let s = eig.values[j].max(0.0).sqrt();
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    Ok(&scaled * eig.vectors.transpose())
}

/// Kernel ONPP: the non-symmetric problem on `K(I−W)(I−Wᵀ)` is solved
/// through the congruent symmetric form `K^{1/2}(I−W)(I−Wᵀ)K^{1/2}`,
/// mapping eigenvectors back as `z = K^{1/2} w`.
pub fn fit_konpp(g: &GramMatrix, w: &WeightGraph, d: usize) -> Result<KernelFit> {
    let n = g.n();
    if w.n() != n {
        return Err(EdrError::Shape("graph and Gram sizes differ".into()));
    }
    if d == 0 || d > n {
        return Err(EdrError::Range(format!("d = {d} out of 1..={n}")));
    }
    let iw = DMatrix::identity(n, n) - w.matrix();
    let m = &iw * iw.transpose();
    let ksqrt = psd_sqrt(g.matrix())?;
    let s = &ksqrt * &m * &ksqrt;
    let eig = sym_eig(&s)?;
    let sel = select(&eig, SelectSpec::smallest(d))?;
    let z = &ksqrt * &sel.vectors;
    Ok(KernelFit { y: z.transpose(), eigenvalues: sel.values })
}

/// Kernel OLPP: rows of `Y` are the smallest `d` eigenvectors of `K`.
pub fn fit_kolpp(g: &GramMatrix, d: usize, skip_first: bool) -> Result<KernelFit> {
    let n = g.n();
    if d == 0 || d + skip_first as usize > n {
        return Err(EdrError::Range(format!("d = {d} out of 1..={n}")));
    }
    let eig = sym_eig(g.matrix())?;
    let sel = select(&eig, SelectSpec::smallest(d).skip_first(skip_first))?;
    Ok(KernelFit { y: sel.vectors.transpose(), eigenvalues: sel.values })
}
