use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pgpr::centralized::{icf_factorize, icf_predict, pic_predict, pitc_predict, BlockStructure};
use pgpr::parallel::{Engine, PartitionMode};
use pgpr::fgp_predict;
use pgpr_bench::fixture;

const N_TEST: usize = 64;
const WORKERS: usize = 4;

fn centralized(c: &mut Criterion) {
    let mut group = c.benchmark_group("centralized");
    group.sample_size(10);
    for n in [256, 1024] {
        let f = fixture(n, N_TEST, 32);
        let blocks = BlockStructure::even_with_tests(n, N_TEST, WORKERS).unwrap();
        group.bench_with_input(BenchmarkId::new("fgp", n), &n, |b, _| {
            b.iter(|| fgp_predict(black_box(&f.train), &f.test, &f.hyper, false).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("pitc", n), &n, |b, _| {
            b.iter(|| pitc_predict(black_box(&f.train), &f.test, &f.support, &blocks, &f.hyper, false).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("pic", n), &n, |b, _| {
            b.iter(|| pic_predict(black_box(&f.train), &f.test, &f.support, &blocks, &f.hyper, false).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("icf", n), &n, |b, _| {
            b.iter(|| {
                let factor = icf_factorize(black_box(&f.train), &f.hyper, 64).unwrap();
                icf_predict(&f.train, &f.test, &factor, &f.hyper, false).unwrap()
            })
        });
    }
    group.finish();
}

fn parallel(c: &mut Criterion) {
    let mut group = c.benchmark_group("parallel");
    group.sample_size(10);
    for n in [256, 1024] {
        let f = fixture(n, N_TEST, 32);
        let engine = || Engine::partitioned(&f.train, &f.test, WORKERS, PartitionMode::Random, 0).unwrap();
        group.bench_with_input(BenchmarkId::new("ppitc", n), &n, |b, _| {
            b.iter_batched(engine, |mut e| e.ppitc_predict(&f.support, &f.hyper, false).unwrap(), criterion::BatchSize::LargeInput)
        });
        group.bench_with_input(BenchmarkId::new("ppic", n), &n, |b, _| {
            b.iter_batched(engine, |mut e| e.ppic_predict(&f.support, &f.hyper, false).unwrap(), criterion::BatchSize::LargeInput)
        });
        group.bench_with_input(BenchmarkId::new("picf", n), &n, |b, _| {
            b.iter_batched(engine, |mut e| e.picf_predict(&f.hyper, 64, false, false).unwrap(), criterion::BatchSize::LargeInput)
        });
    }
    group.finish();
}

criterion_group!(benches, centralized, parallel);
criterion_main!(benches);
