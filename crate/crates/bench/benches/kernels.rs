use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use equilab_bench::{fs_basis, grid_for, rippled_cap};
use equilab_core::envelope::{default_max_iter, DEFAULT_TOL};
use equilab_core::{build_basis, build_grid, find_roots, gram_matrix, psh_envelope, sample_section, MeasureSpec, WeightField};
use std::hint::black_box;

fn gram(c: &mut Criterion) {
    let mut group = c.benchmark_group("gram");
    for p in [20usize, 80] {
        let g = grid_for(128, p);
        let w = WeightField::family("bump{0,1,0.5}".parse().unwrap());
        group.bench_with_input(BenchmarkId::new("matrix", p), &p, |b, &p| b.iter(|| gram_matrix(p, &w, &g).unwrap()));
        group.bench_with_input(BenchmarkId::new("basis", p), &p, |b, &p| b.iter(|| build_basis(p, &w, &g).unwrap()));
    }
    group.finish();
}

fn envelope(c: &mut Criterion) {
    let mut group = c.benchmark_group("envelope");
    group.sample_size(10);
    for n in [64usize, 128] {
        let g = build_grid(n, n).unwrap();
        let radial = WeightField::family("cap{1}".parse().unwrap());
        let rippled = rippled_cap(&g);
        group.bench_with_input(BenchmarkId::new("cap", n), &n, |b, _| {
            b.iter(|| psh_envelope(&radial, &g, DEFAULT_TOL, default_max_iter(&g)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("rippled-cap", n), &n, |b, _| {
            b.iter(|| psh_envelope(&rippled, &g, DEFAULT_TOL, default_max_iter(&g)).unwrap())
        });
    }
    group.finish();
}

fn roots(c: &mut Criterion) {
    let mut group = c.benchmark_group("roots");
    for p in [50usize, 200] {
        let basis = fs_basis(p);
        let samples: Vec<_> =
            (0..16).map(|t| sample_section(&basis, &MeasureSpec::GaussianComplex, 7, t).unwrap()).collect();
        group.bench_with_input(BenchmarkId::new("gaussian", p), &p, |b, _| {
            b.iter(|| samples.iter().map(|s| find_roots(black_box(s)).unwrap().total_multiplicity()).sum::<usize>())
        });
    }
    group.finish();
}

criterion_group!(benches, gram, envelope, roots);
criterion_main!(benches);
