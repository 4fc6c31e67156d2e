use criterion::{criterion_group, criterion_main, Criterion};
use sqisw_bench::{noisy_experiment, sqisw_pairs};
use sqisw_core::experiment::run_qpt;
use sqisw_core::tomography::{qpt_reconstruct, qst_forward, qst_reconstruct};
use sqisw_core::Gate;
use std::hint::black_box;

fn tomography(c: &mut Criterion) {
    let pairs = sqisw_pairs();
    let outcomes = qst_forward(&pairs[5].1).unwrap();
    c.bench_function("qst_reconstruct", |b| {
        b.iter(|| qst_reconstruct(black_box(&outcomes)).unwrap())
    });
    c.bench_function("qpt_reconstruct", |b| {
        b.iter(|| qpt_reconstruct(black_box(&pairs)).unwrap())
    });

    let exp = noisy_experiment();
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    group.bench_function("qpt_sqisw_finite_pulses", |b| {
        b.iter(|| run_qpt(&Gate::Sqisw, black_box(&exp)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, tomography);
criterion_main!(benches);
