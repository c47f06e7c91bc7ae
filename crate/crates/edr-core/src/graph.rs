//! Affinity-graph construction and derived matrices: Gaussian and k-NN
//! weights, supervised/repulsion variants, Laplacians, the centering matrix,
//! and LLE reconstruction weights.

use nalgebra::{DMatrix, DVector};

use crate::data::DataSet;
use crate::error::{EdrError, Result};

/// How a weight matrix was built; carried for reporting and serialization.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GraphMeta {
    pub kind: String,
    pub sigma: Option<f64>,
    pub k: Option<usize>,
    pub beta: Option<f64>,
}

/// n×n nonnegative affinity matrix.
#[derive(Debug, Clone)]
pub struct WeightGraph {
    w: DMatrix<f64>,
    symmetric: bool,
    meta: GraphMeta,
}

impl WeightGraph {
    pub fn new(w: DMatrix<f64>, symmetric: bool, meta: GraphMeta) -> Result<Self> {
        if w.nrows() != w.ncols() {
            return Err(EdrError::Shape(format!(
                "weight matrix {}×{} not square",
                w.nrows(),
                w.ncols()
            )));
        }
        if symmetric {
            let asym = (&w - w.transpose()).amax();
            if asym != 0.0 {
                return Err(EdrError::Shape(format!(
                    "graph flagged symmetric but ‖W−Wᵀ‖_max = {asym:e}"
                )));
            }
        }
        Ok(WeightGraph { w, symmetric, meta })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn meta(&self) -> &GraphMeta {
        &self.meta
    }
}

/// Degree and Laplacian matrices derived from an affinity graph, plus the
/// centering matrix `H = I − (1/n)·11ᵀ`.
#[derive(Debug, Clone)]
pub struct LaplacianForms {
    pub degrees: DVector<f64>,
    /// `L = D − W`
    pub l: DMatrix<f64>,
    /// `L_n = D^{−1/2} L D^{−1/2}` (zero-degree entries of `D^{−1/2}` are 0)
    pub l_n: DMatrix<f64>,
    /// `M = (I − Wᵀ)(I − W)`
    pub m: DMatrix<f64>,
    /// centering matrix
    pub h: DMatrix<f64>,
}

/// Squared pairwise Frobenius distances `D²_ij = ‖X⁽ⁱ⁾ − X⁽ʲ⁾‖_F²`.
pub fn pairwise_sq_dists(ds: &DataSet) -> Result<DMatrix<f64>> {
    let n = ds.n_samples();
    if n < 2 {
        return Err(EdrError::Config("need at least 2 samples".into()));
    }
    let x = ds.data_matrix();
    let g = x.transpose() * &x;
    let mut d2 = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (g[(i, i)] + g[(j, j)] - 2.0 * g[(i, j)]).max(0.0);
            d2[(i, j)] = v;
            d2[(j, i)] = v;
        }
    }
    Ok(d2)
}

/// `σ` selection: half the median of the off-diagonal pairwise distances
/// (plain distances, not squared).
pub fn auto_sigma(d2: &DMatrix<f64>) -> f64 {
    let n = d2.nrows();
    let mut dists: Vec<f64> = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(d2[(i, j)].sqrt());
        }
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    0.5 * median
}

/// Gaussian heat-kernel weights `W_ij = exp(−D²_ij / σ²)`; `sigma = None`
/// uses [`auto_sigma`].
pub fn gaussian_weights(d2: &DMatrix<f64>, sigma: Option<f64>) -> Result<WeightGraph> {
    let sigma = match sigma {
        Some(s) => s,
        None => auto_sigma(d2),
    };
    if sigma <= 0.0 {
        return Err(EdrError::Config(format!("σ = {sigma} must be positive")));
    }
    let w = d2.map(|v| (-v / (sigma * sigma)).exp());
    WeightGraph::new(
        w,
        true,
        GraphMeta { kind: "gaussian".into(), sigma: Some(sigma), ..Default::default() },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnnMode {
    /// keep an edge if either endpoint selects it (symmetrizes by max)
    Union,
    /// keep an edge only if both endpoints select it
    Mutual,
}

/// Per-row k-nearest neighbors by weight (larger weight = nearer), self
/// excluded, ties broken toward the smaller sample index.
fn knn_rows(w: &DMatrix<f64>, k: usize) -> Vec<Vec<usize>> {
    let n = w.nrows();
    (0..n)
        .map(|i| {
            let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            order.sort_by(|&a, &b| {
                w[(i, b)]
                    .partial_cmp(&w[(i, a)])
                    .unwrap()
                    .then(a.cmp(&b))
            });
            order.truncate(k);
            order
        })
        .collect()
}

/// Sparsifies an affinity graph to each vertex's k strongest edges.
/// The diagonal is preserved.
pub fn knn_sparsify(g: &WeightGraph, k: usize, mode: KnnMode) -> Result<WeightGraph> {
    let n = g.n();
    if k == 0 || k >= n {
        return Err(EdrError::Range(format!("k = {k} out of 1..{n}")));
    }
    let neigh = knn_rows(g.matrix(), k);
    let mut keep = vec![vec![false; n]; n];
    for (i, row) in neigh.iter().enumerate() {
        for &j in row {
            keep[i][j] = true;
        }
    }
    let w0 = g.matrix();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        w[(i, i)] = w0[(i, i)];
        for j in 0..n {
            if i == j {
                continue;
            }
            let on = match mode {
                KnnMode::Union => keep[i][j] || keep[j][i],
                KnnMode::Mutual => keep[i][j] && keep[j][i],
            };
            if on {
                w[(i, j)] = match mode {
                    KnnMode::Union => w0[(i, j)].max(w0[(j, i)]),
                    KnnMode::Mutual => w0[(i, j)].min(w0[(j, i)]),
                };
            }
        }
    }
    let symmetric = (&w - w.transpose()).amax() == 0.0;
    let mut meta = g.meta().clone();
    meta.k = Some(k);
    WeightGraph::new(w, symmetric, meta)
}

/// Zeroes entries below `tau` (off-diagonal only).
pub fn threshold_sparsify(g: &WeightGraph, tau: f64) -> Result<WeightGraph> {
    let mut w = g.matrix().clone();
    for i in 0..w.nrows() {
        for j in 0..w.ncols() {
            if i != j && w[(i, j)] < tau {
                w[(i, j)] = 0.0;
            }
        }
    }
    let symmetric = (&w - w.transpose()).amax() == 0.0;
    WeightGraph::new(w, symmetric, g.meta().clone())
}

/// Zeroes all cross-class entries, leaving a (permuted) block-diagonal graph.
pub fn supervised_weights(g: &WeightGraph, labels: &[usize]) -> Result<WeightGraph> {
    let n = g.n();
    if labels.len() != n {
        return Err(EdrError::Shape(format!("{} labels for {n} vertices", labels.len())));
    }
    let mut w = g.matrix().clone();
    for i in 0..n {
        for j in 0..n {
            if labels[i] != labels[j] {
                w[(i, j)] = 0.0;
            }
        }
    }
    let mut meta = g.meta().clone();
    meta.kind = format!("supervised-{}", meta.kind);
    WeightGraph::new(w, g.is_symmetric(), meta)
}

/// Edge set over which repulsion weights may be placed.
pub enum RepulsionEdges<'a> {
    FullyConnected,
    /// adjacency of an existing graph: edge where `W_ij > 0`
    Graph(&'a WeightGraph),
}

/// Repulsion graph: unit weight on every (selected) edge joining two
/// differently-labeled vertices. The fully-connected case equals
/// `1_n − blockdiag(1_{n_i})` after grouping by class.
pub fn repulsion_weights(labels: &[usize], edges: RepulsionEdges) -> Result<WeightGraph> {
    let n = labels.len();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i == j || labels[i] == labels[j] {
                continue;
            }
            let on = match edges {
                RepulsionEdges::FullyConnected => true,
                RepulsionEdges::Graph(g) => g.matrix()[(i, j)] > 0.0,
            };
            if on {
                w[(i, j)] = 1.0;
            }
        }
    }
    let symmetric = (&w - w.transpose()).amax() == 0.0;
    WeightGraph::new(w, symmetric, GraphMeta { kind: "repulsion".into(), ..Default::default() })
}

/// `W_s = W + β·W^(r)`.
pub fn combine_repulsion(g: &WeightGraph, gr: &WeightGraph, beta: f64) -> Result<WeightGraph> {
    if g.n() != gr.n() {
        return Err(EdrError::Shape(format!("{} vs {} vertices", g.n(), gr.n())));
    }
    let w = g.matrix() + gr.matrix() * beta;
    let symmetric = g.is_symmetric() && gr.is_symmetric();
    let mut meta = g.meta().clone();
    meta.beta = Some(beta);
    meta.kind = format!("{}+repulsion", meta.kind);
    WeightGraph::new(w, symmetric, meta)
}

/// Degree, Laplacians and centering matrix for an affinity graph.
pub fn laplacian_forms(g: &WeightGraph) -> Result<LaplacianForms> {
    let w = g.matrix();
    let n = g.n();
    if w.iter().any(|&v| v < 0.0) {
        return Err(EdrError::Config("negative weight in graph".into()));
    }
    let degrees = DVector::from_iterator(n, w.row_iter().map(|r| r.sum()));
    let mut l = DMatrix::from_diagonal(&degrees);
    l -= w;
    let dinv_sqrt =
        DVector::from_iterator(n, degrees.iter().map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 }));
    let mut l_n = l.clone();
    for i in 0..n {
        for j in 0..n {
            l_n[(i, j)] *= dinv_sqrt[i] * dinv_sqrt[j];
        }
    }
    let iw = DMatrix::identity(n, n) - w;
    let m = iw.transpose() * &iw;
    let h = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    Ok(LaplacianForms { degrees, l, l_n, m, h })
}

/// Solves the sum-to-one constrained local reconstruction problem: for the
/// Grammian `G_jk = ⟨x − ν_j, x − ν_k⟩` over the neighbor columns `ν` of
/// `neighbors`, returns `w = G⁻¹1 / (1ᵀG⁻¹1)`. Adds `reg·tr(G)/k` to the
/// diagonal only when `G` is ill-conditioned (estimate > 1e12).
pub fn reconstruction_weights(
    x: &DVector<f64>,
    neighbors: &DMatrix<f64>,
    reg: f64,
) -> Result<DVector<f64>> {
    let k = neighbors.ncols();
    if k == 0 || neighbors.nrows() != x.len() {
        return Err(EdrError::Shape("neighbor matrix shape mismatch".into()));
    }
    let mut diffs = DMatrix::zeros(x.len(), k);
    for j in 0..k {
        diffs.set_column(j, &(x - neighbors.column(j)));
    }
    let mut gram = diffs.transpose() * &diffs;
    let eig = gram.clone().symmetric_eigen();
    let emax = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let emin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let ill = emin <= 0.0 || emax / emin > 1e12;
    if ill && reg > 0.0 {
        // an all-zero Grammian (exactly coincident neighbors) has no scale
        // to borrow from, so fall back to the bare reg value
        let mut bump = reg * gram.trace() / k as f64;
        if bump <= 0.0 {
            bump = reg;
        }
        for j in 0..k {
            gram[(j, j)] += bump;
        }
    }
    let ones = DVector::from_element(k, 1.0);
    let sol = gram
        .lu()
        .solve(&ones)
        .ok_or_else(|| EdrError::Numerical("singular local Grammian".into()))?;
    let denom = sol.sum();
    if denom.abs() < 1e-300 {
        return Err(EdrError::Numerical("degenerate local geometry: 1ᵀG⁻¹1 = 0".into()));
    }
    Ok(sol / denom)
}

/// Per-row k-NN neighbor indices of a dataset by Frobenius distance, self
/// excluded, ties toward the smaller index.
pub fn knn_indices(ds: &DataSet, k: usize) -> Result<Vec<Vec<usize>>> {
    let n = ds.n_samples();
    if k == 0 || k >= n {
        return Err(EdrError::Range(format!("k = {k} out of 1..{n}")));
    }
    let d2 = pairwise_sq_dists(ds)?;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| {
            d2[(i, a)].partial_cmp(&d2[(i, b)]).unwrap().then(a.cmp(&b))
        });
        order.truncate(k);
        out.push(order);
    }
    Ok(out)
}

/// Row-stochastic LLE reconstruction weights: each sample expressed as an
/// affine combination of its k nearest neighbors. Diagonal is zero.
pub fn lle_weights(ds: &DataSet, k: usize, reg: f64) -> Result<WeightGraph> {
    let n = ds.n_samples();
    let neigh = knn_indices(ds, k)?;
    let x = ds.data_matrix();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        let xi = x.column(i).into_owned();
        let mut nb = DMatrix::zeros(x.nrows(), k);
        for (c, &j) in neigh[i].iter().enumerate() {
            nb.set_column(c, &x.column(j));
        }
        let wi = reconstruction_weights(&xi, &nb, reg)?;
        for (c, &j) in neigh[i].iter().enumerate() {
            w[(i, j)] = wi[c];
        }
    }
    WeightGraph::new(
        w,
        false,
        GraphMeta { kind: "lle".into(), k: Some(k), ..Default::default() },
    )
}

/// Modified squared distances for supervised LLE: adds
/// `μ·max(D²)` to every cross-class pair before neighbor search.
pub fn supervised_distances(d2: &DMatrix<f64>, labels: &[usize], mu: f64) -> Result<DMatrix<f64>> {
    let n = d2.nrows();
    if labels.len() != n {
        return Err(EdrError::Shape(format!("{} labels for {n} samples", labels.len())));
    }
    let dmax = d2.amax();
    let mut out = d2.clone();
    for i in 0..n {
        for j in 0..n {
            if labels[i] != labels[j] {
                out[(i, j)] += mu * dmax;
            }
        }
    }
    Ok(out)
}

/// LLE weights computed from an explicit squared-distance matrix for the
/// neighbor search (supervised variant); the reconstruction itself still
/// uses the raw sample vectors.
pub fn lle_weights_with_dists(
    ds: &DataSet,
    d2: &DMatrix<f64>,
    k: usize,
    reg: f64,
) -> Result<WeightGraph> {
    let n = ds.n_samples();
    if k == 0 || k >= n {
        return Err(EdrError::Range(format!("k = {k} out of 1..{n}")));
    }
    if d2.nrows() != n || d2.ncols() != n {
        return Err(EdrError::Shape("distance matrix shape mismatch".into()));
    }
    let x = ds.data_matrix();
    let mut w = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| {
            d2[(i, a)].partial_cmp(&d2[(i, b)]).unwrap().then(a.cmp(&b))
        });
        order.truncate(k);
        let xi = x.column(i).into_owned();
        let mut nb = DMatrix::zeros(x.nrows(), k);
        for (c, &j) in order.iter().enumerate() {
            nb.set_column(c, &x.column(j));
        }
        let wi = reconstruction_weights(&xi, &nb, reg)?;
        for (c, &j) in order.iter().enumerate() {
            w[(i, j)] = wi[c];
        }
    }
    WeightGraph::new(
        w,
        false,
        GraphMeta { kind: "slle".into(), k: Some(k), ..Default::default() },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{DenseTensor, Shape};
    use crate::test_util::{random_matrix, seeded_rng};
    use rand::Rng;

    fn dataset_from_cols(m: &DMatrix<f64>) -> DataSet {
        DataSet::from_matrix(m, None, "test").unwrap()
    }

    #[test]
    fn pairwise_matches_loop_oracle() {
        let mut rng = seeded_rng(11);
        // order-2 samples: X ∈ R^{3×2×5}
        let t = crate::test_util::random_tensor(&mut rng, &[3, 2, 5]);
        let ds = DataSet::new(t.clone(), None, "t").unwrap();
        let d2 = pairwise_sq_dists(&ds).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let a = t.frontal_slice(i + 1).unwrap();
                let b = t.frontal_slice(j + 1).unwrap();
                let diff: f64 = a
                    .data()
                    .iter()
                    .zip(b.data())
                    .map(|(x, y)| (x - y) * (x - y))
                    .sum();
                assert!((d2[(i, j)] - diff).abs() <= 1e-12);
            }
        }
        assert_eq!(d2[(2, 2)], 0.0);
    }

    #[test]
    fn pairwise_duplicates_and_scalar_case() {
        let m = DMatrix::from_column_slice(1, 3, &[0.0, 3.0, 0.0]);
        let d2 = pairwise_sq_dists(&dataset_from_cols(&m)).unwrap();
        assert_eq!(d2[(0, 1)], 9.0);
        assert_eq!(d2[(0, 2)], 0.0);
    }

    #[test]
    fn gaussian_basics() {
        let mut d2 = DMatrix::zeros(3, 3);
        d2[(0, 1)] = 4.0;
        d2[(1, 0)] = 4.0;
        let g = gaussian_weights(&d2, Some(2.0)).unwrap();
        assert!((g.matrix()[(0, 1)] - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(g.matrix()[(0, 2)], 1.0); // coincident points
        assert_eq!(g.matrix()[(0, 0)], 1.0);
        assert!(g.is_symmetric());
        assert!(gaussian_weights(&d2, Some(0.0)).is_err());
    }

    #[test]
    fn auto_sigma_collinear_oracle() {
        // points 0,1,2,3 on a line; pairwise distances {1,1,1,2,2,3}
        let m = DMatrix::from_column_slice(1, 4, &[0.0, 1.0, 2.0, 3.0]);
        let d2 = pairwise_sq_dists(&dataset_from_cols(&m)).unwrap();
        let mut dists = vec![1.0, 2.0, 3.0, 1.0, 2.0, 1.0];
        dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = 0.5 * (dists[2] + dists[3]);
        assert!((auto_sigma(&d2) - 0.5 * median).abs() < 1e-15);
    }

    #[test]
    fn gaussian_weight_range_property() {
        let mut rng = seeded_rng(3);
        let m = random_matrix(&mut rng, 4, 8);
        let d2 = pairwise_sq_dists(&dataset_from_cols(&m)).unwrap();
        let g = gaussian_weights(&d2, None).unwrap();
        for v in g.matrix().iter() {
            assert!(*v > 0.0 && *v <= 1.0);
        }
        for i in 0..8 {
            assert_eq!(g.matrix()[(i, i)], 1.0);
        }
    }

    #[test]
    fn knn_full_k_keeps_graph() {
        let mut rng = seeded_rng(5);
        let m = random_matrix(&mut rng, 3, 6);
        let d2 = pairwise_sq_dists(&dataset_from_cols(&m)).unwrap();
        let g = gaussian_weights(&d2, Some(1.0)).unwrap();
        let s = knn_sparsify(&g, 5, KnnMode::Union).unwrap();
        assert!((s.matrix() - g.matrix()).amax() < 1e-15);
    }

    #[test]
    fn knn_line_geometry() {
        let m = DMatrix::from_column_slice(1, 3, &[0.0, 1.0, 10.0]);
        let d2 = pairwise_sq_dists(&dataset_from_cols(&m)).unwrap();
        let g = gaussian_weights(&d2, Some(5.0)).unwrap();
        let s = knn_sparsify(&g, 1, KnnMode::Mutual).unwrap();
        // point 3 keeps only point 2; mutual mode drops 2↔3 (2 prefers 1)
        assert!(s.matrix()[(2, 0)] == 0.0);
        assert!(s.matrix()[(0, 1)] > 0.0 && s.matrix()[(1, 0)] > 0.0);
        let u = knn_sparsify(&g, 1, KnnMode::Union).unwrap();
        assert!(u.matrix()[(2, 1)] > 0.0 && u.matrix()[(1, 2)] > 0.0);
        assert!(u.is_symmetric());
    }

    #[test]
    fn knn_matches_sort_oracle() {
        let mut rng = seeded_rng(6);
        let m = random_matrix(&mut rng, 4, 8);
        let d2 = pairwise_sq_dists(&dataset_from_cols(&m)).unwrap();
        let g = gaussian_weights(&d2, Some(1.0)).unwrap();
        let k = 3;
        let s = knn_sparsify(&g, k, KnnMode::Union).unwrap();
        for i in 0..8 {
            let mut ds: Vec<(f64, usize)> =
                (0..8).filter(|&j| j != i).map(|j| (d2[(i, j)], j)).collect();
            ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mine: Vec<usize> = ds[..k].iter().map(|p| p.1).collect();
            for j in 0..8 {
                if i != j && mine.contains(&j) {
                    assert!(s.matrix()[(i, j)] > 0.0, "edge {i}->{j} missing");
                }
            }
        }
    }

    #[test]
    fn supervised_zeroes_cross_class() {
        let w = DMatrix::from_element(5, 5, 1.0);
        let g = WeightGraph::new(w, true, GraphMeta::default()).unwrap();
        let labels = vec![0, 0, 1, 1, 1];
        let s = supervised_weights(&g, &labels).unwrap();
        let nnz = s.matrix().iter().filter(|&&v| v != 0.0).count();
        assert_eq!(nnz, 2 * 2 + 3 * 3);
        // same class untouched
        assert_eq!(s.matrix()[(0, 1)], 1.0);
        assert_eq!(s.matrix()[(0, 2)], 0.0);
        // all-distinct classes → diagonal only
        let g2 = supervised_weights(&g, &[0, 1, 2, 3, 4]).unwrap();
        let nnz2 = g2.matrix().iter().filter(|&&v| v != 0.0).count();
        assert_eq!(nnz2, 5);
    }

    #[test]
    fn supervised_block_diagonal_after_permutation() {
        let mut rng = seeded_rng(7);
        let a = random_matrix(&mut rng, 6, 6).map(f64::abs);
        let w = (&a + a.transpose()) * 0.5;
        let g = WeightGraph::new(w, true, GraphMeta::default()).unwrap();
        let labels = vec![2, 0, 1, 0, 2, 1];
        let s = supervised_weights(&g, &labels).unwrap();
        // permute samples so classes are contiguous; matrix must be block diag
        let mut perm: Vec<usize> = (0..6).collect();
        perm.sort_by_key(|&i| labels[i]);
        for (pi, &i) in perm.iter().enumerate() {
            for (pj, &j) in perm.iter().enumerate() {
                if labels[i] != labels[j] {
                    assert_eq!(s.matrix()[(i, j)], 0.0, "cross block at ({pi},{pj})");
                }
            }
        }
    }

    #[test]
    fn repulsion_formula() {
        // single class → zero
        let r = repulsion_weights(&[1, 1, 1], RepulsionEdges::FullyConnected).unwrap();
        assert_eq!(r.matrix().amax(), 0.0);
        // 2 points, 2 classes
        let r = repulsion_weights(&[0, 1], RepulsionEdges::FullyConnected).unwrap();
        assert_eq!(r.matrix()[(0, 1)], 1.0);
        assert_eq!(r.matrix()[(0, 0)], 0.0);
        // classes (2,1): 1_3 − blockdiag gives exactly 4 ones
        let r = repulsion_weights(&[0, 0, 1], RepulsionEdges::FullyConnected).unwrap();
        let ones = r.matrix().iter().filter(|&&v| v == 1.0).count();
        assert_eq!(ones, 4);
        let expect = DMatrix::from_element(3, 3, 1.0)
            - DMatrix::from_fn(3, 3, |i, j| if (i < 2) == (j < 2) { 1.0 } else { 0.0 });
        assert_eq!(r.matrix(), &expect);
    }

    #[test]
    fn combine_repulsion_entrywise() {
        let mut rng = seeded_rng(8);
        let a = random_matrix(&mut rng, 4, 4).map(f64::abs);
        let w = (&a + a.transpose()) * 0.5;
        let g = WeightGraph::new(w.clone(), true, GraphMeta::default()).unwrap();
        let gr = repulsion_weights(&[0, 0, 1, 1], RepulsionEdges::FullyConnected).unwrap();
        let c0 = combine_repulsion(&g, &gr, 0.0).unwrap();
        assert_eq!(c0.matrix(), g.matrix());
        let c = combine_repulsion(&g, &gr, 0.5).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = w[(i, j)] + 0.5 * gr.matrix()[(i, j)];
                assert!((c.matrix()[(i, j)] - expect).abs() < 1e-15);
            }
        }
        let z = WeightGraph::new(DMatrix::zeros(4, 4), true, GraphMeta::default()).unwrap();
        let c1 = combine_repulsion(&z, &gr, 1.0).unwrap();
        assert_eq!(c1.matrix(), gr.matrix());
    }

    #[test]
    fn laplacian_k3_and_identities() {
        let w = DMatrix::from_fn(3, 3, |i, j| if i == j { 0.0 } else { 1.0 });
        let g = WeightGraph::new(w.clone(), true, GraphMeta::default()).unwrap();
        let f = laplacian_forms(&g).unwrap();
        // L = 3I − 11ᵀ on K_3 ... here degrees are 2 so L = 2I − (W)
        let eig = f.l.clone().symmetric_eigen();
        let mut ev: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(ev[0].abs() < 1e-12);
        assert!((ev[1] - 3.0).abs() < 1e-12);
        assert!((ev[2] - 3.0).abs() < 1e-12);
        // row sums of L vanish
        let ones = DVector::from_element(3, 1.0);
        assert!((&f.l * &ones).amax() < 1e-12);
        // H idempotent
        assert!(((&f.h * &f.h) - &f.h).amax() <= 1e-12);
        // W = 0 → L = 0, M = I
        let z = WeightGraph::new(DMatrix::zeros(3, 3), true, GraphMeta::default()).unwrap();
        let fz = laplacian_forms(&z).unwrap();
        assert_eq!(fz.l.amax(), 0.0);
        assert!((&fz.m - DMatrix::identity(3, 3)).amax() < 1e-15);
        assert_eq!(fz.l_n.amax(), 0.0); // zero degrees handled, not an error
    }

    #[test]
    fn laplacian_quadratic_form_identity() {
        let mut rng = seeded_rng(9);
        let a = random_matrix(&mut rng, 6, 6).map(f64::abs);
        let mut w = (&a + a.transpose()) * 0.5;
        for i in 0..6 {
            w[(i, i)] = 0.0;
        }
        let g = WeightGraph::new(w.clone(), true, GraphMeta::default()).unwrap();
        let f = laplacian_forms(&g).unwrap();
        for _ in 0..5 {
            let x: DVector<f64> = DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0));
            let quad = (x.transpose() * &f.l * &x)[(0, 0)];
            let mut s = 0.0;
            for i in 0..6 {
                for j in 0..6 {
                    s += w[(i, j)] * (x[i] - x[j]).powi(2);
                }
            }
            assert!((quad - 0.5 * s).abs() < 1e-10);
        }
        // PSD
        let eig = f.l.symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&v| v >= -1e-8));
    }

    #[test]
    fn lle_symmetric_neighbors_and_k1() {
        // point at 0 centered between −1 and 1; k = 2
        let m = DMatrix::from_column_slice(1, 3, &[0.0, -1.0, 1.0]);
        let g = lle_weights(&dataset_from_cols(&m), 2, 1e-3).unwrap();
        assert!((g.matrix()[(0, 1)] - 0.5).abs() < 1e-12);
        assert!((g.matrix()[(0, 2)] - 0.5).abs() < 1e-12);
        assert_eq!(g.matrix()[(0, 0)], 0.0);
        // k = 1 forces weight 1 on the single neighbor
        let g1 = lle_weights(&dataset_from_cols(&m), 1, 1e-3).unwrap();
        assert!((g1.matrix()[(1, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lle_rows_sum_to_one_and_match_kkt_oracle() {
        let mut rng = seeded_rng(10);
        let m = random_matrix(&mut rng, 4, 6);
        let ds = dataset_from_cols(&m);
        let k = 3;
        let g = lle_weights(&ds, k, 1e-3).unwrap();
        let neigh = knn_indices(&ds, k).unwrap();
        for i in 0..6 {
            let row_sum: f64 = g.matrix().row(i).sum();
            assert!((row_sum - 1.0).abs() <= 1e-12);
            // dense KKT solve: [2G 1; 1ᵀ 0][w;λ] = [0;1]
            let xi = m.column(i).into_owned();
            let mut gram = DMatrix::zeros(k, k);
            for a in 0..k {
                for b in 0..k {
                    let da = &xi - m.column(neigh[i][a]);
                    let db = &xi - m.column(neigh[i][b]);
                    gram[(a, b)] = da.dot(&db);
                }
            }
            let mut kkt = DMatrix::zeros(k + 1, k + 1);
            kkt.view_mut((0, 0), (k, k)).copy_from(&(&gram * 2.0));
            for a in 0..k {
                kkt[(a, k)] = 1.0;
                kkt[(k, a)] = 1.0;
            }
            let mut rhs = DVector::zeros(k + 1);
            rhs[k] = 1.0;
            let sol = kkt.lu().solve(&rhs).unwrap();
            for (c, &j) in neigh[i].iter().enumerate() {
                assert!(
                    (g.matrix()[(i, j)] - sol[c]).abs() <= 1e-8,
                    "row {i} neighbor {j}"
                );
            }
        }
    }

    #[test]
    fn lle_weights_are_optimal_among_random_feasible() {
        let mut rng = seeded_rng(12);
        let m = random_matrix(&mut rng, 5, 7);
        let ds = dataset_from_cols(&m);
        let k = 3;
        let g = lle_weights(&ds, k, 1e-3).unwrap();
        let neigh = knn_indices(&ds, k).unwrap();
        for i in 0..7 {
            let xi = m.column(i).into_owned();
            let recon = |w: &[f64]| -> f64 {
                let mut r = xi.clone();
                for (c, &j) in neigh[i].iter().enumerate() {
                    r -= m.column(j) * w[c];
                }
                r.norm()
            };
            let wopt: Vec<f64> = neigh[i].iter().map(|&j| g.matrix()[(i, j)]).collect();
            let base = recon(&wopt);
            for _ in 0..1000 {
                let mut w: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..2.0)).collect();
                let s: f64 = w.iter().sum();
                if s.abs() < 1e-6 {
                    continue;
                }
                w.iter_mut().for_each(|v| *v /= s);
                assert!(recon(&w) >= base - 1e-9);
            }
        }
    }

    #[test]
    fn lle_on_tensor_samples() {
        // order-2 samples behave like their vectorizations
        let mut rng = seeded_rng(13);
        let t = crate::test_util::random_tensor(&mut rng, &[2, 3, 6]);
        let ds = DataSet::new(t.clone(), None, "t").unwrap();
        let flat = DataSet::from_matrix(&ds.data_matrix(), None, "flat").unwrap();
        let a = lle_weights(&ds, 3, 1e-3).unwrap();
        let b = lle_weights(&flat, 3, 1e-3).unwrap();
        assert!((a.matrix() - b.matrix()).amax() < 1e-14);
    }

    #[test]
    fn supervised_distances_push_cross_class_out() {
        let m = DMatrix::from_column_slice(1, 4, &[0.0, 0.1, 0.2, 0.3]);
        let ds = dataset_from_cols(&m);
        let d2 = pairwise_sq_dists(&ds).unwrap();
        let labels = vec![0, 1, 0, 0];
        let mu = 2.0;
        let sd = supervised_distances(&d2, &labels, mu).unwrap();
        // cross-class pair grew by μ · max(D²)
        let dmax = d2.amax();
        assert!((sd[(0, 1)] - (d2[(0, 1)] + mu * dmax)).abs() < 1e-12);
        assert_eq!(sd[(0, 2)], d2[(0, 2)]);
        // neighbor search with modified distances avoids the cross-class point
        let g = lle_weights_with_dists(&ds, &sd, 2, 1e-3).unwrap();
        assert_eq!(g.matrix()[(0, 1)], 0.0);
        assert!(g.matrix()[(0, 2)] != 0.0 && g.matrix()[(0, 3)] != 0.0);
    }

    #[test]
    fn duplicated_points_reconstruct_exactly() {
        // two copies of each of 3 points; k=1 finds the duplicate → residual 0
        let m = DMatrix::from_column_slice(
            2,
            6,
            &[0.0, 0.0, 0.0, 0.0, 1.0, 2.0, 1.0, 2.0, 3.0, 1.0, 3.0, 1.0],
        );
        let ds = dataset_from_cols(&m);
        let g = lle_weights(&ds, 1, 1e-3).unwrap();
        for i in 0..6 {
            let mut r = m.column(i).into_owned();
            for j in 0..6 {
                r -= m.column(j) * g.matrix()[(i, j)];
            }
            assert!(r.norm() < 1e-8, "sample {i} residual {}", r.norm());
        }
    }

    #[test]
    fn weight_graph_shape_checks() {
        assert!(WeightGraph::new(DMatrix::zeros(2, 3), false, GraphMeta::default()).is_err());
        let mut w = DMatrix::zeros(2, 2);
        w[(0, 1)] = 1.0;
        assert!(WeightGraph::new(w.clone(), true, GraphMeta::default()).is_err());
        assert!(WeightGraph::new(w, false, GraphMeta::default()).is_ok());
        let neg = DMatrix::from_element(2, 2, -1.0);
        let g = WeightGraph::new(neg, true, GraphMeta::default()).unwrap();
        assert!(laplacian_forms(&g).is_err());
    }

    #[test]
    fn frontal_slice_dataset_roundtrip() {
        // sanity: DataSet::sample agrees with tensor frontal_slice
        let t = DenseTensor::new(
            Shape::new(vec![2, 2, 2]).unwrap(),
            (0..8).map(|v| v as f64).collect(),
        )
        .unwrap();
        let ds = DataSet::new(t.clone(), None, "t").unwrap();
        assert_eq!(ds.sample(2).unwrap().data(), t.frontal_slice(2).unwrap().data());
    }
}
