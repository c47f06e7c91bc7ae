//! Criterion benchmarks for the hot paths: Einstein contraction, the dense
//! symmetric eigensolver, and a full PCA fit.

use criterion::{criterion_group, criterion_main, Criterion};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use edr_core::data::DataSet;
use edr_core::dr_linear::fit_pca;
use edr_core::spectral::sym_eig;
use edr_core::tensor::{einstein_product, DenseTensor, Shape};

fn random_tensor(rng: &mut ChaCha8Rng, dims: &[usize]) -> DenseTensor {
    let shape = Shape::new(dims.to_vec()).unwrap();
    let n = shape.num_elems();
    let data: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    DenseTensor::new(shape, data).unwrap()
}

fn bench_einstein(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_tensor(&mut rng, &[16, 16, 12, 12]);
    let b = random_tensor(&mut rng, &[12, 12, 16, 16]);
    c.bench_function("einstein_product 16x16x12x12 *_2", |bch| {
        bch.iter(|| einstein_product(&a, &b, 2).unwrap())
    });
}

fn bench_sym_eig(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let m = nalgebra::DMatrix::<f64>::from_fn(120, 120, |_, _| rng.gen_range(-1.0..1.0));
    let s = (&m + m.transpose()) * 0.5;
    c.bench_function("sym_eig 120x120", |bch| bch.iter(|| sym_eig(&s).unwrap()));
}

fn bench_fit_pca(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let t = random_tensor(&mut rng, &[28, 28, 200]);
    let ds = DataSet::new(t, None, "bench").unwrap();
    c.bench_function("fit_pca 28x28x200 d=25", |bch| {
        bch.iter(|| fit_pca(&ds, 25).unwrap())
    });
}

criterion_group!(benches, bench_einstein, bench_sym_eig, bench_fit_pca);
criterion_main!(benches);
