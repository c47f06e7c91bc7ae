//! Dense symmetric eigensolvers, the generalized symmetric-definite solver,
//! thin SVD utilities and the E-SVD, plus eigenpair selection policies.
//!
//! All solvers return eigenvalues sorted ascending with a deterministic sign
//! convention: each vector is scaled so its largest-magnitude entry is
//! positive.

use nalgebra::DMatrix;

use crate::error::{EdrError, Result};
use crate::linalg::fix_column_signs;
use crate::tensor::{fold_at, DenseTensor, Shape, SplitSpec};

/// Eigenvalues (ascending) with aligned orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct EigResult {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Which end of the spectrum to keep and whether to skip the first
/// (trivial) eigenpair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Smallest,
    Largest,
}

#[derive(Debug, Clone, Copy)]
pub struct SelectSpec {
    pub d: usize,
    pub side: Side,
    pub skip_first: bool,
}

impl SelectSpec {
    pub fn smallest(d: usize) -> Self {
        SelectSpec { d, side: Side::Smallest, skip_first: false }
    }

    pub fn largest(d: usize) -> Self {
        SelectSpec { d, side: Side::Largest, skip_first: false }
    }

    pub fn skip_first(mut self, skip: bool) -> Self {
        self.skip_first = skip;
        self
    }
}

fn check_symmetric(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if !a.is_square() {
        return Err(EdrError::Shape(format!("{what}: non-square input")));
    }
    let amax = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let asym = (a - a.transpose()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if asym > 1e-8 * amax.max(1e-300) {
        return Err(EdrError::Shape(format!(
            "{what}: matrix is not symmetric (max asymmetry {asym:.3e})"
        )));
    }
    Ok(())
}

/// Full spectrum of a symmetric matrix, ascending, orthonormal vectors.
/// The input is symmetrized by averaging before solving.
pub fn sym_eig(a: &DMatrix<f64>) -> Result<EigResult> {
    check_symmetric(a, "sym_eig")?;
    let sym = (a + a.transpose()) * 0.5;
    let n = sym.nrows();
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    fix_column_signs(&mut vectors);
    Ok(EigResult { values, vectors })
}

/// Generalized symmetric-definite problem `A v = λ B v` via Cholesky
/// reduction `B = LLᵀ`. Vectors come back B-orthonormal.
///
/// When the smallest eigenvalue of `B` falls below `ridge · trace(B)/n`,
/// `ridge · (trace(B)/n) · I` is added before factorizing; if `B` is still
/// not positive definite the definiteness error is surfaced.
pub fn gen_sym_eig(a: &DMatrix<f64>, b: &DMatrix<f64>, ridge: f64) -> Result<EigResult> {
    check_symmetric(a, "gen_sym_eig(A)")?;
    check_symmetric(b, "gen_sym_eig(B)")?;
    if a.nrows() != b.nrows() {
        return Err(EdrError::Shape("gen_sym_eig: A and B sizes differ".into()));
    }
    let n = b.nrows();
    let mut bs = (b + b.transpose()) * 0.5;
    let scale = bs.trace() / n as f64;
    let bmin = sym_eig(&bs)?.values[0];
    if bmin < ridge * scale {
        for i in 0..n {
            bs[(i, i)] += ridge * scale;
        }
    }
    let chol = bs.clone().cholesky().ok_or_else(|| {
        EdrError::Definiteness("right-hand matrix of the generalized problem".into())
    })?;
    let l = chol.l();
    // C = L⁻¹ A L⁻ᵀ, solved triangularly.
    let m1 = l
        .solve_lower_triangular(&((a + a.transpose()) * 0.5))
        .ok_or_else(|| EdrError::Numerical("singular Cholesky factor".into()))?;
    let c = l
        .solve_lower_triangular(&m1.transpose())
        .ok_or_else(|| EdrError::Numerical("singular Cholesky factor".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    let reduced = sym_eig(&c)?;
    // Back-substitute: v = L⁻ᵀ u.
    let mut vectors = l
        .transpose()
        .solve_upper_triangular(&reduced.vectors)
        .ok_or_else(|| EdrError::Numerical("singular Cholesky factor".into()))?;
    fix_column_signs(&mut vectors);
    Ok(EigResult { values: reduced.values, vectors })
}

/// Selects `d` eigenpairs from the requested end of an ascending spectrum.
/// Smallest pairs come back ascending, largest descending; `skip_first`
/// drops the pair closest to the requested end first.
pub fn select(res: &EigResult, spec: SelectSpec) -> Result<EigResult> {
    let n = res.values.len();
    let skip = spec.skip_first as usize;
    if spec.d == 0 {
        return Err(EdrError::Range("selection count must be >= 1".into()));
    }
    if spec.d + skip > n {
        return Err(EdrError::Range(format!(
            "requested {} pairs (skip {}) from a spectrum of {}",
            spec.d, skip, n
        )));
    }
    let indices: Vec<usize> = match spec.side {
        Side::Smallest => (skip..skip + spec.d).collect(),
        Side::Largest => (0..spec.d).map(|k| n - 1 - skip - k).collect(),
    };
    let values = indices.iter().map(|&i| res.values[i]).collect();
    let mut vectors = DMatrix::zeros(res.vectors.nrows(), spec.d);
    for (k, &i) in indices.iter().enumerate() {
        vectors.set_column(k, &res.vectors.column(i));
    }
    Ok(EigResult { values, vectors })
}

/// Orthonormal basis of the column space of `x`, dropping directions with
/// `σ <= tol · σ_max`.
pub fn range_basis(x: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    crate::linalg::orthonormal_cols(x, tol)
}

/// Completes orthonormal columns `q` (p×r) to a full orthogonal p×p matrix.
fn complete_basis(q: &DMatrix<f64>) -> DMatrix<f64> {
    let p = q.nrows();
    let r = q.ncols();
    let mut full = DMatrix::zeros(p, p);
    full.columns_mut(0, r).copy_from(q);
    let mut have = r;
    let mut e = 0usize;
    while have < p {
        let mut v = DMatrix::zeros(p, 1);
        v[(e, 0)] = 1.0;
        // two rounds of Gram-Schmidt against the accepted columns
        for _ in 0..2 {
            for j in 0..have {
                let c = full.column(j).dot(&v.column(0));
                for i in 0..p {
                    v[(i, 0)] -= c * full[(i, j)];
                }
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            for i in 0..p {
                full[(i, have)] = v[(i, 0)] / norm;
            }
            have += 1;
        }
        e += 1;
        assert!(e <= p + have, "basis completion failed");
    }
    full
}

/// E-SVD of a tensor for the given split: `X = U *_M S *_N Vᵀ` with unitary
/// `U`, `V` and singular values descending. Returns `(U, S, V)` where `U`
/// and `V` are square tensors over the row and column extents.
pub fn esvd(x: &DenseTensor, split: SplitSpec) -> Result<(DenseTensor, Vec<f64>, DenseTensor)> {
    let xm = x.unfold(split)?;
    let j = split.j();
    let (p, q) = (xm.nrows(), xm.ncols());
    let svd = xm.svd(true, true);
    let mut u_thin = svd.u.unwrap();
    let mut v_thin = svd.v_t.unwrap().transpose();
    let s: Vec<f64> = svd.singular_values.iter().cloned().collect();
    // pairwise sign fix keeping U S Vᵀ intact
    for c in 0..u_thin.ncols() {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for i in 0..p {
            let a = u_thin[(i, c)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        if u_thin[(best, c)] < 0.0 {
            for i in 0..p {
                u_thin[(i, c)] = -u_thin[(i, c)];
            }
            for i in 0..q {
                v_thin[(i, c)] = -v_thin[(i, c)];
            }
        }
    }
    let u_full = complete_basis(&u_thin);
    let v_full = complete_basis(&v_thin);
    let row_dims = x.shape().dims()[..j].to_vec();
    let col_dims = x.shape().dims()[j..].to_vec();
    let mut u_shape = row_dims.clone();
    u_shape.extend_from_slice(&row_dims);
    let mut v_shape = col_dims.clone();
    v_shape.extend_from_slice(&col_dims);
    let u = fold_at(&u_full, &Shape::new(u_shape)?, j)?;
    let v = fold_at(&v_full, &Shape::new(v_shape)?, x.order() - j)?;
    Ok((u, s, v))
}
