//! Dense N-order tensors and the Einstein-product algebra.
//!
//! Entries are stored flat in `ivec` order (first index fastest), so the
//! unfolding `Ψ_j` of a tensor is the same buffer reinterpreted as a
//! column-major matrix with `prod(dims[..j])` rows. All public multi-indices,
//! modes and slice indices are 1-based, matching the usual tensor notation.

use nalgebra::DMatrix;

use crate::error::{EdrError, Result};

/// Ordered list of mode extents. An empty list denotes a scalar tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shape {
    dims: Vec<usize>,
}

impl Shape {
    /// A zero extent is allowed and denotes an empty tensor (used for
    /// empty sample sets); no valid multi-index exists into such a shape.
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        let mut n: usize = 1;
        for &d in &dims {
            n = n
                .checked_mul(d)
                .ok_or_else(|| EdrError::Shape("element count overflows".into()))?;
        }
        Ok(Shape { dims })
    }

    pub fn scalar() -> Self {
        Shape { dims: Vec::new() }
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_elems(&self) -> usize {
        self.dims.iter().product()
    }
}

/// Split of an order-N tensor into a row group (first `j` modes) and a
/// column group (the rest), defining the unfolding `Ψ_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    j: usize,
}

impl SplitSpec {
    /// Requires `1 <= j < order`; checked against a shape in `unfold`/`fold`.
    pub fn new(j: usize) -> Result<Self> {
        if j == 0 {
            return Err(EdrError::Range("split point must be >= 1".into()));
        }
        Ok(SplitSpec { j })
    }

    pub fn j(&self) -> usize {
        self.j
    }
}

/// Maps a 1-based multi-index to its 1-based position in the vectorized
/// tensor: `ivec(i, I) = i_1 + Σ_{k>=2} (i_k - 1) Π_{l<k} I_l`.
pub fn ivec(index: &[usize], shape: &Shape) -> Result<usize> {
    if index.len() != shape.order() {
        return Err(EdrError::Range(format!(
            "multi-index of length {} against order-{} shape",
            index.len(),
            shape.order()
        )));
    }
    let mut offset = 0usize;
    let mut stride = 1usize;
    for (k, (&i, &extent)) in index.iter().zip(shape.dims()).enumerate() {
        if i == 0 || i > extent {
            return Err(EdrError::Range(format!(
                "index {} out of 1..={} at mode {}",
                i,
                extent,
                k + 1
            )));
        }
        offset += (i - 1) * stride;
        stride *= extent;
    }
    Ok(offset + 1)
}

/// Dense tensor of 64-bit reals in `ivec` order.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    data: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Shape, data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.num_elems() {
            return Err(EdrError::Shape(format!(
                "data length {} != element count {}",
                data.len(),
                shape.num_elems()
            )));
        }
        Ok(DenseTensor { shape, data })
    }

    pub fn zeros(shape: Shape) -> Self {
        let n = shape.num_elems();
        DenseTensor {
            shape,
            data: vec![0.0; n],
        }
    }

    pub fn from_fn(shape: Shape, mut f: impl FnMut(&[usize]) -> f64) -> Self {
        let mut t = DenseTensor::zeros(shape);
        let order = t.shape.order();
        let mut idx = vec![1usize; order];
        for off in 0..t.data.len() {
            t.data[off] = f(&idx);
            for k in 0..order {
                idx[k] += 1;
                if idx[k] <= t.shape.dims()[k] {
                    break;
                }
                idx[k] = 1;
            }
        }
        t
    }

    pub fn scalar(value: f64) -> Self {
        DenseTensor {
            shape: Shape::scalar(),
            data: vec![value],
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.order()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Element at a 1-based multi-index.
    pub fn get(&self, index: &[usize]) -> Result<f64> {
        Ok(self.data[ivec(index, &self.shape)? - 1])
    }

    pub fn set(&mut self, index: &[usize], value: f64) -> Result<()> {
        let off = ivec(index, &self.shape)? - 1;
        self.data[off] = value;
        Ok(())
    }

    /// `Ψ_j`: the tensor as a `prod(dims[..j]) × prod(dims[j..])` matrix.
    pub fn unfold(&self, split: SplitSpec) -> Result<DMatrix<f64>> {
        if split.j() >= self.order() {
            return Err(EdrError::Range(format!(
                "split {} invalid for order {}",
                split.j(),
                self.order()
            )));
        }
        Ok(self.unfold_at(split.j()))
    }

    /// Unfolding with a relaxed split `0 <= j <= order`; `j = 0` gives a row
    /// vector, `j = order` a column vector.
    pub(crate) fn unfold_at(&self, j: usize) -> DMatrix<f64> {
        debug_assert!(j <= self.order());
        let rows: usize = self.shape.dims()[..j].iter().product();
        let cols: usize = self.shape.dims()[j..].iter().product();
        DMatrix::from_column_slice(rows, cols, &self.data)
    }

    /// Frontal slice `X[:,...,:,i]` (1-based), dropping the last mode.
    pub fn frontal_slice(&self, i: usize) -> Result<DenseTensor> {
        if self.order() == 0 {
            return Err(EdrError::Range("frontal slice of a scalar".into()));
        }
        let last = *self.shape.dims().last().unwrap();
        if i == 0 || i > last {
            return Err(EdrError::Range(format!("slice {} out of 1..={}", i, last)));
        }
        let stride = self.shape.num_elems() / last;
        let shape = Shape::new(self.shape.dims()[..self.order() - 1].to_vec())?;
        DenseTensor::new(shape, self.data[(i - 1) * stride..i * stride].to_vec())
    }

    /// Frobenius norm.
    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Inverse of `Ψ`: reinterprets a matrix as a tensor of the given shape.
pub fn fold(mat: &DMatrix<f64>, shape: &Shape, split: SplitSpec) -> Result<DenseTensor> {
    if split.j() >= shape.order() {
        return Err(EdrError::Range(format!(
            "split {} invalid for order {}",
            split.j(),
            shape.order()
        )));
    }
    fold_at(mat, shape, split.j())
}

pub(crate) fn fold_at(mat: &DMatrix<f64>, shape: &Shape, j: usize) -> Result<DenseTensor> {
    let rows: usize = shape.dims()[..j].iter().product();
    let cols: usize = shape.dims()[j..].iter().product();
    if mat.nrows() != rows || mat.ncols() != cols {
        return Err(EdrError::Shape(format!(
            "matrix {}x{} cannot fold into {:?} split at {}",
            mat.nrows(),
            mat.ncols(),
            shape.dims(),
            j
        )));
    }
    DenseTensor::new(shape.clone(), mat.as_slice().to_vec())
}

/// Einstein product `A *_n B`: contracts the last `n` modes of `A` with the
/// first `n` modes of `B`. Implemented as unfold, matrix multiply, fold.
pub fn einstein_product(a: &DenseTensor, b: &DenseTensor, n: usize) -> Result<DenseTensor> {
    if n == 0 {
        return Err(EdrError::Shape("contraction count must be >= 1".into()));
    }
    if n > a.order() || n > b.order() {
        return Err(EdrError::Shape(format!(
            "cannot contract {} modes of order-{} and order-{} tensors",
            n,
            a.order(),
            b.order()
        )));
    }
    let ma = a.order() - n;
    if a.shape().dims()[ma..] != b.shape().dims()[..n] {
        return Err(EdrError::Shape(format!(
            "contracted extents {:?} vs {:?}",
            &a.shape().dims()[ma..],
            &b.shape().dims()[..n]
        )));
    }
    let am = a.unfold_at(ma);
    let bm = b.unfold_at(n);
    let cm = am * bm;
    let mut dims = a.shape().dims()[..ma].to_vec();
    dims.extend_from_slice(&b.shape().dims()[n..]);
    fold_at(&cm, &Shape::new(dims)?, ma)
}

/// m-mode product `X ×_m U` with `U ∈ R^{J×I_m}`; `m` is 1-based.
pub fn m_mode_product(x: &DenseTensor, u: &DMatrix<f64>, m: usize) -> Result<DenseTensor> {
    if m == 0 || m > x.order() {
        return Err(EdrError::Range(format!(
            "mode {} out of 1..={}",
            m,
            x.order()
        )));
    }
    let im = x.shape().dims()[m - 1];
    if u.ncols() != im {
        return Err(EdrError::Shape(format!(
            "matrix has {} columns, mode {} extent is {}",
            u.ncols(),
            m,
            im
        )));
    }
    let j = u.nrows();
    let left: usize = x.shape().dims()[..m - 1].iter().product();
    let right: usize = x.shape().dims()[m..].iter().product();
    let mut dims = x.shape().dims().to_vec();
    dims[m - 1] = j;
    let mut out = DenseTensor::zeros(Shape::new(dims)?);
    // Per right-block: Out_r = X_r U^T with X_r the contiguous left×I_m slab.
    for r in 0..right {
        let xr = DMatrix::from_column_slice(left, im, &x.data[r * left * im..(r + 1) * left * im]);
        let or = xr * u.transpose();
        out.data[r * left * j..(r + 1) * left * j].copy_from_slice(or.as_slice());
    }
    Ok(out)
}

/// Block transpose: row group of size `n` swaps with the remaining modes, so
/// `unfold(Aᵀ) = unfold(A)ᵀ` for the matching splits.
pub fn block_transpose(a: &DenseTensor, n: usize) -> Result<DenseTensor> {
    if n == 0 || n >= a.order() {
        return Err(EdrError::Range(format!(
            "row-group size {} invalid for order {}",
            n,
            a.order()
        )));
    }
    let at = a.unfold_at(n).transpose();
    let m = a.order() - n;
    let mut dims = a.shape().dims()[n..].to_vec();
    dims.extend_from_slice(&a.shape().dims()[..n]);
    fold_at(&at, &Shape::new(dims)?, m)
}

/// Flat inner product `⟨X, Y⟩ = Σ X·Y` of same-shape tensors.
pub fn inner(x: &DenseTensor, y: &DenseTensor) -> Result<f64> {
    if x.shape() != y.shape() {
        return Err(EdrError::Shape("inner product of unequal shapes".into()));
    }
    Ok(x.data.iter().zip(&y.data).map(|(a, b)| a * b).sum())
}

/// Trace of a square even-order tensor: sum of the diagonal of `Ψ_N`.
pub fn trace(a: &DenseTensor) -> Result<f64> {
    let order = a.order();
    if order == 0 || order % 2 != 0 {
        return Err(EdrError::Shape("trace needs a square even-order tensor".into()));
    }
    let n = order / 2;
    if a.shape().dims()[..n] != a.shape().dims()[n..] {
        return Err(EdrError::Shape("trace needs matching row/column extents".into()));
    }
    let p: usize = a.shape().dims()[..n].iter().product();
    Ok((0..p).map(|i| a.data[i * p + i]).sum())
}

/// Identity tensor over row/column extents `I`: unfolds to `I_{ΠI}`.
pub fn identity_tensor(extents: &Shape) -> Result<DenseTensor> {
    let values = DenseTensor::new(extents.clone(), vec![1.0; extents.num_elems()])?;
    diag_tensor(&values)
}

/// Square even-order tensor with the given values on its diagonal.
pub fn diag_tensor(values: &DenseTensor) -> Result<DenseTensor> {
    if values.order() == 0 {
        return Err(EdrError::Shape("diagonal of a scalar".into()));
    }
    let p = values.shape().num_elems();
    let mut dims = values.shape().dims().to_vec();
    dims.extend_from_slice(values.shape().dims());
    let mut out = DenseTensor::zeros(Shape::new(dims)?);
    for i in 0..p {
        out.data[i * p + i] = values.data[i];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::{random_tensor, seeded_rng};
    use rand::Rng;

    #[test]
    fn ivec_examples() {
        let s = Shape::new(vec![3, 4]).unwrap();
        assert_eq!(ivec(&[1, 1], &s).unwrap(), 1);
        assert_eq!(ivec(&[2, 1], &s).unwrap(), 2);
        assert_eq!(ivec(&[3, 4], &s).unwrap(), 12);
        assert!(ivec(&[4, 1], &s).is_err());
        assert!(ivec(&[0, 1], &s).is_err());
    }

    #[test]
    fn ivec_is_bijective() {
        let s = Shape::new(vec![3, 4]).unwrap();
        let mut seen = vec![false; 12];
        for i2 in 1..=4 {
            for i1 in 1..=3 {
                let v = ivec(&[i1, i2], &s).unwrap();
                assert!((1..=12).contains(&v));
                assert!(!seen[v - 1]);
                seen[v - 1] = true;
            }
        }
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn unfold_order2_is_identity() {
        let t = DenseTensor::new(
            Shape::new(vec![2, 3]).unwrap(),
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        )
        .unwrap();
        let m = t.unfold(SplitSpec::new(1).unwrap()).unwrap();
        assert_eq!(m[(0, 0)], 1.0);
        assert_eq!(m[(1, 0)], 2.0);
        assert_eq!(m[(0, 2)], 5.0);
        assert_eq!(m[(1, 2)], 6.0);
    }

    #[test]
    fn unfold_constant_tensor() {
        let t = DenseTensor::new(Shape::new(vec![2, 2, 2]).unwrap(), vec![1.0; 8]).unwrap();
        let m = t.unfold(SplitSpec::new(2).unwrap()).unwrap();
        assert_eq!((m.nrows(), m.ncols()), (4, 2));
        assert!(m.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn unfold_matches_index_loop() {
        let mut rng = seeded_rng(7);
        let t = random_tensor(&mut rng, &[2, 3, 2]);
        let m = t.unfold(SplitSpec::new(1).unwrap()).unwrap();
        let col_shape = Shape::new(vec![3, 2]).unwrap();
        for i1 in 1..=2usize {
            for i2 in 1..=3usize {
                for i3 in 1..=2usize {
                    let c = ivec(&[i2, i3], &col_shape).unwrap();
                    assert_eq!(m[(i1 - 1, c - 1)], t.get(&[i1, i2, i3]).unwrap());
                }
            }
        }
    }

    #[test]
    fn fold_unfold_roundtrip() {
        let mut rng = seeded_rng(11);
        for _ in 0..50 {
            let order = rng.gen_range(2..=5);
            let dims: Vec<usize> = (0..order).map(|_| rng.gen_range(1..=3)).collect();
            let t = random_tensor(&mut rng, &dims);
            let j = rng.gen_range(1..order);
            let split = SplitSpec::new(j).unwrap();
            let back = fold(&t.unfold(split).unwrap(), t.shape(), split).unwrap();
            assert_eq!(back.data(), t.data()); // bit-exact
        }
    }

    #[test]
    fn fold_scalar_matrix() {
        let m = DMatrix::from_element(1, 1, 7.0);
        let t = fold(&m, &Shape::new(vec![1, 1]).unwrap(), SplitSpec::new(1).unwrap()).unwrap();
        assert_eq!(t.data(), &[7.0]);
    }

    #[test]
    fn einstein_identity_and_matrix_cases() {
        let mut rng = seeded_rng(3);
        let x = random_tensor(&mut rng, &[2, 3, 4]);
        let id = identity_tensor(&Shape::new(vec![2, 3, 4]).unwrap()).unwrap();
        let y = einstein_product(&id, &x, 3).unwrap();
        for (a, b) in y.data().iter().zip(x.data()) {
            assert!((a - b).abs() < 1e-14);
        }

        let a = random_tensor(&mut rng, &[3, 4]);
        let b = random_tensor(&mut rng, &[4, 2]);
        let c = einstein_product(&a, &b, 1).unwrap();
        let cm = a.unfold_at(1) * b.unfold_at(1);
        for (x, y) in c.data().iter().zip(cm.as_slice()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn einstein_matches_nested_sum() {
        let mut rng = seeded_rng(5);
        let a = random_tensor(&mut rng, &[2, 3, 4]);
        let b = random_tensor(&mut rng, &[3, 4, 2]);
        let c = einstein_product(&a, &b, 2).unwrap();
        for i in 1..=2usize {
            for j in 1..=2usize {
                let mut s = 0.0;
                for k1 in 1..=3usize {
                    for k2 in 1..=4usize {
                        s += a.get(&[i, k1, k2]).unwrap() * b.get(&[k1, k2, j]).unwrap();
                    }
                }
                assert!((c.get(&[i, j]).unwrap() - s).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn einstein_shape_mismatch() {
        let a = DenseTensor::zeros(Shape::new(vec![2, 3]).unwrap());
        let b = DenseTensor::zeros(Shape::new(vec![4, 2]).unwrap());
        assert!(einstein_product(&a, &b, 1).is_err());
    }

    #[test]
    fn m_mode_identity_and_matrix_cases() {
        let mut rng = seeded_rng(13);
        let x = random_tensor(&mut rng, &[2, 3, 4]);
        let id = DMatrix::<f64>::identity(3, 3);
        let y = m_mode_product(&x, &id, 2).unwrap();
        assert_eq!(y.data(), x.data());

        let x2 = random_tensor(&mut rng, &[3, 4]);
        let u = DMatrix::from_fn(2, 3, |i, j| (i * 3 + j) as f64);
        let y1 = m_mode_product(&x2, &u, 1).unwrap();
        let e1 = &u * x2.unfold_at(1);
        for (a, b) in y1.data().iter().zip(e1.as_slice()) {
            assert!((a - b).abs() < 1e-14);
        }
        let u2 = DMatrix::from_fn(5, 4, |i, j| (i + j) as f64 * 0.5);
        let y2 = m_mode_product(&x2, &u2, 2).unwrap();
        let e2 = x2.unfold_at(1) * u2.transpose();
        for (a, b) in y2.data().iter().zip(e2.as_slice()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn m_mode_matches_loop_oracle() {
        let mut rng = seeded_rng(17);
        let x = random_tensor(&mut rng, &[2, 3, 4]);
        let u = DMatrix::from_fn(5, 3, |_, _| rng.gen_range(-1.0..1.0));
        let y = m_mode_product(&x, &u, 2).unwrap();
        for i1 in 1..=2usize {
            for j in 1..=5usize {
                for i3 in 1..=4usize {
                    let mut s = 0.0;
                    for i2 in 1..=3usize {
                        s += u[(j - 1, i2 - 1)] * x.get(&[i1, i2, i3]).unwrap();
                    }
                    assert!((y.get(&[i1, j, i3]).unwrap() - s).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn transpose_involution_and_symmetry() {
        let mut rng = seeded_rng(19);
        let a = random_tensor(&mut rng, &[2, 3, 3, 2]);
        let att = block_transpose(&block_transpose(&a, 2).unwrap(), 2).unwrap();
        assert_eq!(att.data(), a.data());

        // symmetric square tensor maps to itself
        let m = {
            let r = DMatrix::from_fn(6, 6, |_, _| rng.gen_range(-1.0..1.0));
            &r + r.transpose()
        };
        let s = fold_at(&m, &Shape::new(vec![2, 3, 2, 3]).unwrap(), 2).unwrap();
        let st = block_transpose(&s, 2).unwrap();
        for (a, b) in st.data().iter().zip(s.data()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn transpose_of_product_rule() {
        let mut rng = seeded_rng(23);
        for _ in 0..20 {
            let a = random_tensor(&mut rng, &[2, 3, 4]);
            let b = random_tensor(&mut rng, &[3, 4, 2]);
            let lhs = block_transpose(&einstein_product(&a, &b, 2).unwrap(), 1).unwrap();
            let rhs = einstein_product(
                &block_transpose(&b, 2).unwrap(),
                &block_transpose(&a, 1).unwrap(),
                2,
            )
            .unwrap();
            for (x, y) in lhs.data().iter().zip(rhs.data()) {
                assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn inner_norm_trace_basics() {
        let mut rng = seeded_rng(29);
        let x = random_tensor(&mut rng, &[3, 2]);
        let zero = DenseTensor::zeros(Shape::new(vec![3, 2]).unwrap());
        assert_eq!(inner(&x, &zero).unwrap(), 0.0);

        let id = identity_tensor(&Shape::new(vec![2, 3]).unwrap()).unwrap();
        assert!((id.frob_norm() - 6.0f64.sqrt()).abs() < 1e-14);
        assert!((trace(&id).unwrap() - 6.0).abs() < 1e-14);
    }

    #[test]
    fn inner_equals_trace_of_transpose_product() {
        let mut rng = seeded_rng(31);
        for _ in 0..20 {
            let x = random_tensor(&mut rng, &[2, 3, 2, 2]);
            let y = random_tensor(&mut rng, &[2, 3, 2, 2]);
            let xt = block_transpose(&x, 2).unwrap();
            let t = trace(&einstein_product(&xt, &y, 2).unwrap()).unwrap();
            assert!((inner(&x, &y).unwrap() - t).abs() <= 1e-12);
        }
    }

    #[test]
    fn cyclic_trace_property() {
        let mut rng = seeded_rng(37);
        for _ in 0..20 {
            // X: I×K, Z: K×K, Y: K×I with I = (2,2), K = (3,)
            let x = random_tensor(&mut rng, &[2, 2, 3]);
            let z = random_tensor(&mut rng, &[3, 3]);
            let y = random_tensor(&mut rng, &[3, 2, 2]);
            let lhs = trace(
                &einstein_product(&einstein_product(&x, &z, 1).unwrap(), &y, 1).unwrap(),
            )
            .unwrap();
            let rhs = trace(
                &einstein_product(&y, &einstein_product(&x, &z, 1).unwrap(), 2).unwrap(),
            )
            .unwrap();
            assert!((lhs - rhs).abs() <= 1e-12);
        }
    }

    #[test]
    fn identity_diag_slice() {
        let id = identity_tensor(&Shape::new(vec![2, 3]).unwrap()).unwrap();
        let m = id.unfold_at(2);
        assert_eq!(m, DMatrix::<f64>::identity(6, 6));

        let ones = DenseTensor::new(Shape::new(vec![2, 3]).unwrap(), vec![1.0; 6]).unwrap();
        assert_eq!(diag_tensor(&ones).unwrap().data(), id.data());

        let mut rng = seeded_rng(41);
        let x = random_tensor(&mut rng, &[2, 3, 4]);
        let s = x.frontal_slice(2).unwrap();
        for i1 in 1..=2usize {
            for i2 in 1..=3usize {
                assert_eq!(s.get(&[i1, i2]).unwrap(), x.get(&[i1, i2, 2]).unwrap());
            }
        }
        assert!(x.frontal_slice(5).is_err());
    }
}
