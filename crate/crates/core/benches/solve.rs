//! Criterion benches comparing the data-parallel solver against the
//! sequential fallback, across backends and dimensions.
//!
//! Run with `cargo bench -p teq-core`. Building with
//! `--no-default-features` removes rayon entirely; the `parallel` rows then
//! measure the same sequential code path.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use teq_core::dnc::{
    lyap2d_dnc, lyapnd_dnc, Backend, Coeff, ShiftPolicy, SolverConfig, SylvesterProblem,
};
use teq_core::generators;
use teq_core::hmatrix::HMatrix;

fn config(parallel: bool, backend: Backend) -> SolverConfig {
    SolverConfig {
        eps: 1e-6,
        n_min: 64,
        n_min_inner: None,
        backend,
        parallel,
        shift_policy: ShiftPolicy::APriori,
        seed: 0,
    }
}

fn bench_2d(c: &mut Criterion) {
    let n = 512;
    let band = generators::laplace1d(n);
    let c1 = Coeff::new(HMatrix::from_banded(&band, 64), 1).unwrap();
    let c2 = Coeff::new(HMatrix::from_banded(&band, 64), 2).unwrap();
    let b = generators::randn_mat(n, n, 3);
    let mut g = c.benchmark_group("laplace2d_n512");
    g.sample_size(10);
    for (name, parallel) in [("sequential", false), ("parallel", true)] {
        g.bench_function(name, |bench| {
            bench.iter(|| {
                let sol = lyap2d_dnc(&c1, &c2, black_box(&b), &config(parallel, Backend::Fadi))
                    .unwrap();
                black_box(sol.x);
            })
        });
    }
    g.finish();
}

fn bench_3d(c: &mut Criterion) {
    let n = 64;
    let band = generators::laplace1d(n);
    let coeffs: Vec<Coeff> = (0..3)
        .map(|t| Coeff::new(HMatrix::from_banded(&band, 16), t).unwrap())
        .collect();
    let b = generators::randn_tensor(&[n, n, n], 5);
    let mut g = c.benchmark_group("laplace3d_n64");
    g.sample_size(10);
    for (name, parallel) in [("sequential", false), ("parallel", true)] {
        g.bench_function(name, |bench| {
            bench.iter(|| {
                let refs: Vec<&Coeff> = coeffs.iter().collect();
                let p = SylvesterProblem::new(refs, b.clone()).unwrap();
                let mut cfg = config(parallel, Backend::Fadi);
                cfg.n_min = 16;
                let sol = lyapnd_dnc(&p, &cfg).unwrap();
                black_box(sol.x);
            })
        });
    }
    g.finish();
}

fn bench_backends(c: &mut Criterion) {
    let n = 256;
    let a = generators::random_spd_hss(n, 1.3, 8, 7);
    let c1 = Coeff::new(HMatrix::from_dense(&a, 32, 1e-9, 64).unwrap(), 1).unwrap();
    let c2 = Coeff::new(HMatrix::from_dense(&a, 32, 1e-9, 64).unwrap(), 2).unwrap();
    let b = generators::randn_mat(n, n, 9);
    let mut g = c.benchmark_group("hss2d_n256_backends");
    g.sample_size(10);
    for (name, backend) in [
        ("fadi", Backend::Fadi),
        ("rk", Backend::Rk),
        ("ek", Backend::Ek),
    ] {
        g.bench_function(name, |bench| {
            bench.iter(|| {
                let mut cfg = config(false, backend);
                cfg.n_min = 32;
                let sol = lyap2d_dnc(&c1, &c2, black_box(&b), &cfg).unwrap();
                black_box(sol.x);
            })
        });
    }
    g.finish();
}

criterion_group!(benches, bench_2d, bench_3d, bench_backends);
criterion_main!(benches);
